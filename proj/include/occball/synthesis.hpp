#pragma once

// Output-feedback H-infinity synthesis on an identified model.
//
// Generalized plant (n states, w = [w_x; w_y]):
//   x+ = A x + w_x + B u
//   y  = C x + w_y
//   z  = [I; 0] x + [0; eps] u
// The controller is strictly causal (D = 0): u(k) depends on y(0..k-1).

#include <string>

#include "occball/linalg.hpp"

namespace occball {

struct GeneralizedPlant {
    Mat A;
    Mat B1;   // n x (n+1)
    Mat B2;   // n x 1
    Mat C1;   // (n+1) x n
    Mat D12;  // (n+1) x 1
    Mat C2;   // 1 x n
    Mat D21;  // 1 x (n+1)
    double epsilon = 0.0;
    double dt = 0.02;

    [[nodiscard]] Eigen::Index states() const { return A.rows(); }
};

/// Control-effort weights chosen per sensor tier: 5e-3 for exact measurements,
/// 1e-6 for the perception-derived ones.
inline constexpr double kEpsilonNoiseFree = 5e-3;
inline constexpr double kEpsilonPerception = 1e-6;

[[nodiscard]] GeneralizedPlant build_generalized_plant(const StateSpaceModel& model, double epsilon);

struct SynthesisOptions {
    double gamma_min = 1e-2;
    double gamma_max = 1e6;
    double bisection_tol = 1e-3;  // relative
    int grid_size = 4096;         // a-posteriori norm check
    int max_backoff_steps = 60;
};

struct SynthesizedController {
    StateSpaceModel controller;  // maps y to u directly (u = K y)
    double gamma_achieved = 0.0;
    double epsilon = 0.0;
    bool feasible = false;
    double closed_loop_norm = 0.0;    // measured w -> z norm on the design model
    double closed_loop_radius = 0.0;
    int bisection_steps = 0;
    std::string diagnostics;
};

/// Outcome of the two-Riccati test at a single performance level.
struct GammaAttempt {
    bool feasible = false;
    std::string failure;  // which condition failed
    StateSpaceModel controller;
};

/// Central controller at level gamma: control DARE X, filter DARE Y,
/// spectral-radius coupling rho(X Y) < gamma^2.
[[nodiscard]] GammaAttempt attempt_gamma(const GeneralizedPlant& plant, double gamma);

/// Closed loop of the generalized plant with a y -> u controller, from w to z.
[[nodiscard]] StateSpaceModel generalized_closed_loop(const GeneralizedPlant& plant, const StateSpaceModel& controller);

/// Log-space bisection over gamma followed by an a-posteriori certificate
/// (internal stability and measured norm <= gamma (1 + 1e-6)); gamma is stepped
/// up until the certificate holds.
[[nodiscard]] SynthesizedController hinf_synthesize(const GeneralizedPlant& plant, const SynthesisOptions& options = {});

}  // namespace occball
