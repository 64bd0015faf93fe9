#pragma once

// Fundamental limits of feedback: H-infinity norms, the unstable pole/zero
// lower bound on the complementary sensitivity, and S/T realizations.

#include <vector>

#include "occball/linalg.hpp"

namespace occball {

struct HinfNorm {
    double value = 0.0;
    double peak_frequency = 0.0;  // rad/sample in [0, pi]
    int grid_size = 0;
};

/// Peak gain over the unit circle: uniform grid on [0, pi] refined by
/// golden-section search around the grid argmax. MIMO models use the largest
/// singular value. Throws UnstableModel unless every pole is strictly inside.
[[nodiscard]] HinfNorm hinf_norm(const StateSpaceModel& model, int grid_size = 4096);

struct LimitBound {
    double value = 1.0;
    /// No unstable poles: the bound carries no information.
    bool vacuous = false;
    /// Unstable pole and zero coincide: no internally stabilizing controller exists.
    bool infinite = false;
};

/// max over unstable poles p of prod over unstable zeros q of |(1 - 1/(pq)) / (1/p - 1/q)|.
/// Entries within `unit_circle_tol` of the unit circle, or inside it, are ignored.
[[nodiscard]] LimitBound pole_zero_bound(const std::vector<Complex>& poles, const std::vector<Complex>& zeros,
                                        double unit_circle_tol = 1e-7);
[[nodiscard]] LimitBound pole_zero_bound(const StateSpaceModel& plant, double unit_circle_tol = 1e-7);

struct ClosedLoop {
    StateSpaceModel plant;
    StateSpaceModel controller;
    StateSpaceModel S;  // 1 / (1 + P C)
    StateSpaceModel T;  // P C / (1 + P C)
    bool internally_stable = false;
    double spectral_radius = 0.0;
};

/// Negative feedback u = -C y around P (controller given in that convention).
/// Both realizations share the full interconnection A matrix, so internal
/// stability is read off T.A directly.
[[nodiscard]] ClosedLoop closed_loop(const StateSpaceModel& plant, const StateSpaceModel& controller);

}  // namespace occball
