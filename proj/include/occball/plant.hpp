#pragma once

// Nonlinear cartpole with a fixation-point sensor.
//
// State convention: h is the cart position, theta the pole tilt from upright.
// Dynamics (r folded into u):
//   (M + m) h'' + m l (theta'' - theta'^2 sin theta) = u
//   h'' cos theta + l theta'' - g sin theta = 0
// Measurement: y = h + l0 sin theta + noise.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "occball/controller.hpp"
#include "occball/linalg.hpp"
#include "occball/rng.hpp"

namespace occball {

struct PhysicalParams {
    double cart_mass = 1.0;    // M, kg
    double pole_mass = 0.1;    // m, kg
    double pole_length = 1.0;  // l, m
    double gravity = 9.81;     // g, m/s^2
    double tau = 0.02;         // Euler step, s
    double fixation = 1.0;     // l0, m

    void validate() const;
    [[nodiscard]] static PhysicalParams with_fixation(double l0) {
        PhysicalParams p;
        p.fixation = l0;
        return p;
    }
};

struct SimState {
    double h = 0.0;
    double h_dot = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;

    [[nodiscard]] Vec to_vec() const;
    [[nodiscard]] static SimState from_vec(const Vec& v);
    [[nodiscard]] bool finite() const;
    friend bool operator==(const SimState&, const SimState&) = default;
};

struct EpisodeConfig {
    int max_steps = 500;
    double init_halfwidth = 0.05;
    double h_limit = 0.6;            // m
    double theta_limit_deg = 15.0;   // degrees
    double reference = 0.0;          // r, added to the commanded force
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] double theta_limit() const;
};

enum class SensorTier { noise_free, depth_like, rgb_like };

[[nodiscard]] std::string to_string(SensorTier tier);
/// Accepts "noise_free"/"true_z", "depth_like"/"depth", "rgb_like"/"rgb".
[[nodiscard]] SensorTier sensor_tier_from_string(const std::string& name);
/// Normalized RMSE of the perception map: 0, 0.03 % and 0.25 %.
[[nodiscard]] double noise_fraction(SensorTier tier);

struct SensorSpec {
    SensorTier tier = SensorTier::noise_free;
    double noise_frac = 0.0;
    double z_range = 0.0;          // 2 (h_limit + l0 sin theta_limit)
    std::string rng_stream = "sensor";

    [[nodiscard]] double sigma() const { return noise_frac * z_range; }
    [[nodiscard]] static SensorSpec make(SensorTier tier, double fixation, const EpisodeConfig& config = {});
};

struct Accelerations {
    double h_ddot = 0.0;
    double theta_ddot = 0.0;
};

[[nodiscard]] Accelerations accelerations(const PhysicalParams& params, const SimState& state, double u);

/// One explicit Euler step; accelerations are taken at the pre-step state.
[[nodiscard]] SimState step(const PhysicalParams& params, const SimState& state, double u);
/// Applies the same force for `count` consecutive steps.
[[nodiscard]] SimState step_n(const PhysicalParams& params, SimState state, double u, int count);

/// Noise-free fixation-point position h + l0 sin theta.
[[nodiscard]] double fixation_position(const PhysicalParams& params, const SimState& state);
/// Fixation position plus N(0, sigma^2) drawn from `rng`.
[[nodiscard]] double observe(const PhysicalParams& params, const SimState& state, const SensorSpec& sensor, Rng& rng);

/// Euler-consistent linearization about upright rest: A = I + tau Ac,
/// B = tau Bc, C = [1 0 l0 0], D = 0.
[[nodiscard]] StateSpaceModel linearize(const PhysicalParams& params);

/// Time-indexed (state, measurement, input) records. `states` may be empty when
/// only input/output data is available.
struct Trajectory {
    std::vector<double> y;
    std::vector<double> u;
    std::vector<SimState> states;

    [[nodiscard]] std::size_t size() const { return y.size(); }
    [[nodiscard]] bool has_states() const { return !states.empty(); }
    void validate() const;
};

enum class Termination { max_steps, h_limit, theta_limit, controller_error };
[[nodiscard]] std::string to_string(Termination cause);

struct EpisodeResult {
    int steps = 0;  // survived steps, equal to the episode reward
    bool success = false;
    Termination cause = Termination::max_steps;
    std::uint64_t seed = 0;

    [[nodiscard]] double reward() const { return static_cast<double>(steps); }
};

struct Episode {
    EpisodeResult result;
    Trajectory trajectory;
};

/// Samples each state variable from U[-halfwidth, halfwidth].
[[nodiscard]] SimState sample_initial_state(const EpisodeConfig& config, Rng& rng);

/// Random initial state drawn from the config seed, then `run_episode_from`.
[[nodiscard]] Episode run_episode(const PhysicalParams& params, const EpisodeConfig& config, Controller& controller,
                                  const SensorSpec& sensor);

/// Runs until a limit is breached or max_steps transitions complete. A step
/// counts as survived when the post-step state is inside the limits.
[[nodiscard]] Episode run_episode_from(const PhysicalParams& params, const EpisodeConfig& config,
                                       const SimState& initial, Controller& controller, const SensorSpec& sensor,
                                       bool record_trajectory = true);

[[nodiscard]] std::optional<Termination> limit_violation(const EpisodeConfig& config, const SimState& state);

}  // namespace occball
