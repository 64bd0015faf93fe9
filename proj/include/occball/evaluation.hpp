#pragma once

#include <cstdint>
#include <vector>

#include "occball/controller.hpp"
#include "occball/limits.hpp"
#include "occball/plant.hpp"
#include "occball/synthesis.hpp"

namespace occball {

struct EvaluationSummary {
    double avg_reward = 0.0;
    double success_rate = 0.0;
    std::vector<EpisodeResult> episodes;
};

/// `n_episodes` independent episodes; episode i uses seed derive_seed(seed, "eval", i).
[[nodiscard]] EvaluationSummary evaluate(Controller& controller, const PhysicalParams& params, const SensorSpec& sensor,
                                         int n_episodes, std::uint64_t seed, const EpisodeConfig& base = {});

[[nodiscard]] EvaluationSummary summarize(std::vector<EpisodeResult> episodes);

struct MaxAngleResult {
    double degrees = 0.0;
    /// One of the probes above the returned angle survived: the stabilized
    /// set is not an interval and the bisection result is a lower estimate.
    bool non_monotone = false;
    int probes = 0;
};

/// Bisection on the initial tilt in [0, theta_limit] with every other state
/// zero; "stabilized" means surviving max_steps. Every probe uses the same
/// noise seed.
[[nodiscard]] MaxAngleResult max_stabilized_angle(Controller& controller, const PhysicalParams& params,
                                                  const SensorSpec& sensor, double tol_deg = 0.01,
                                                  std::uint64_t seed = 0, const EpisodeConfig& base = {});

[[nodiscard]] bool stabilizes_from(Controller& controller, const PhysicalParams& params, const SensorSpec& sensor,
                                   double theta0_deg, std::uint64_t seed, const EpisodeConfig& base = {});

struct ValidationReport {
    bool stable_on_true_plant = false;
    double true_loop_radius = 0.0;
    double hinf_T = 0.0;  // NaN when the true loop is unstable
    LimitBound bound;
    MaxAngleResult max_angle;
};

/// Checks a y -> u controller against the true linearization and the
/// nonlinear simulator.
[[nodiscard]] ValidationReport validate_controller(const StateSpaceModel& controller, const PhysicalParams& true_params,
                                                   const SensorSpec& sensor, double angle_tol_deg = 0.01,
                                                   std::uint64_t seed = 0);

/// Negates a y -> u controller into the u = -C y convention used for S and T.
[[nodiscard]] StateSpaceModel negative_feedback_form(const StateSpaceModel& controller);

}  // namespace occball
