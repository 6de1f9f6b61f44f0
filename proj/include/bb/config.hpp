#pragma once

#include <optional>
#include <string>

#include "bb/analysis.hpp"

namespace bb {

struct BasinConfig {
    BasinGrid grid;
    double capture_radius = 0.05;
    int threads = 0;  // 0 = hardware default
};

struct VerifyConfig {
    // Scales ghat_11 before the residual evaluation; anything other than
    // 1.0 deliberately corrupts the geometry so the sensitivity of the
    // residual checks can be demonstrated end to end.
    double ghat11_factor = 1.0;
};

// A fully parsed and validated run configuration.
struct RunConfig {
    FamilySpec spec;
    SimConfig sim;
    State x0;  // defaults to the equilibrium (s0, 0, 0, 0)
    std::optional<LinearGains> linear_gains;
    std::optional<LinearGains> fit_target;
    std::optional<BasinConfig> basin;
    VerifyConfig verify;
};

// Parses JSON configuration text.  Unknown keys, malformed values, and any
// violated model invariant are rejected with a config_error naming the
// offending section.field.
RunConfig parse_config(const std::string& text);

// Reads and parses a configuration file.
RunConfig load_config(const std::string& path);

}  // namespace bb
