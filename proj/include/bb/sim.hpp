#pragma once

#include <iosfwd>
#include <vector>

#include "bb/controller.hpp"

namespace bb {

enum class Termination { completed, beam_exit, singularity, numerical_failure };

const char* to_string(Termination t);

// Simulation settings.  dt is the output sample spacing; the integrator
// takes adaptive internal steps but lands exactly on the sample grid.
struct SimConfig {
    double t_final = 10.0;
    double dt = 1e-3;
    double integrator_tol = 1e-10;
    bool stop_on_beam_exit = true;

    void validate() const;
};

// Which feedback law drives the torque input.
enum class LawKind { nonlinear_family, linear, open_loop };

struct Law {
    LawKind kind = LawKind::nonlinear_family;
    LinearGains gains{};  // used only by LawKind::linear
};

struct Sample {
    double t = 0.0;
    State x;
    ControlBreakdown u;
    double H_hat = 0.0;
    double H_hat_rate = 0.0;
};

struct Trajectory {
    std::vector<Sample> samples;
    Termination termination = Termination::completed;
};

// Closed-loop energy 1/2 ghat(qdot, qdot) + vhat.  Safe through the strip
// (no matrix inverse involved).
double hhat(const State& x, const FamilySpec& spec);

// Exact energy rate predicted by the dissipation term: -ghat(chat, qdot).
double hhat_rate_exact(const State& x, const FamilySpec& spec);

// Largest gap between the sampled finite-difference H_hat_rate and the
// exact dissipation rate over the finite prefix of a trajectory.
double hhat_rate_identity_max(const Trajectory& traj, const FamilySpec& spec);

// Time derivative of the full state under the chosen law.
Eigen::Vector4d closed_loop_rhs(const State& x, const FamilySpec& spec, const Law& law);

// Integrates from x0 with an embedded Runge-Kutta 4(5) pair, recording a
// sample every dt.  The first sample is always at t = 0.  Beam exit is
// detected at sample times; singular or numerically failing evaluations
// terminate the trajectory with the matching status.
Trajectory simulate(const State& x0, const FamilySpec& spec, const SimConfig& cfg, const Law& law);

// Writes the trajectory in the canonical CSV layout with a trailing
// termination comment line.
void write_csv(std::ostream& os, const Trajectory& traj);

}  // namespace bb
