#include "occball/plant.hpp"

#include <cmath>
#include <numbers>

namespace occball {

void PhysicalParams::validate() const {
    const bool ok = cart_mass > 0.0 && pole_mass > 0.0 && pole_length > 0.0 && tau > 0.0 && fixation > 0.0 &&
                    fixation <= pole_length && std::isfinite(gravity);
    if (!ok) {
        throw InputError("physical parameters: need M, m, l, tau > 0 and 0 < l0 <= l");
    }
}

Vec SimState::to_vec() const {
    Vec v(4);
    v << h, h_dot, theta, theta_dot;
    return v;
}

SimState SimState::from_vec(const Vec& v) {
    if (v.size() != 4) {
        throw InputError("SimState::from_vec: expected 4 entries");
    }
    return {v(0), v(1), v(2), v(3)};
}

bool SimState::finite() const {
    return std::isfinite(h) && std::isfinite(h_dot) && std::isfinite(theta) && std::isfinite(theta_dot);
}

void EpisodeConfig::validate() const {
    if (max_steps < 1 || !(init_halfwidth >= 0.0) || !(h_limit > 0.0) || !(theta_limit_deg > 0.0)) {
        throw InputError("episode config: max_steps >= 1 and positive limits required");
    }
}

double EpisodeConfig::theta_limit() const { return theta_limit_deg * std::numbers::pi / 180.0; }

std::string to_string(SensorTier tier) {
    switch (tier) {
        case SensorTier::noise_free:
            return "noise_free";
        case SensorTier::depth_like:
            return "depth_like";
        case SensorTier::rgb_like:
            return "rgb_like";
    }
    return "unknown";
}

SensorTier sensor_tier_from_string(const std::string& name) {
    if (name == "noise_free" || name == "true_z") {
        return SensorTier::noise_free;
    }
    if (name == "depth_like" || name == "depth") {
        return SensorTier::depth_like;
    }
    if (name == "rgb_like" || name == "rgb") {
        return SensorTier::rgb_like;
    }
    throw InputError("unknown sensor tier '" + name + "'");
}

double noise_fraction(SensorTier tier) {
    switch (tier) {
        case SensorTier::noise_free:
            return 0.0;
        case SensorTier::depth_like:
            return 0.0003;
        case SensorTier::rgb_like:
            return 0.0025;
    }
    return 0.0;
}

SensorSpec SensorSpec::make(SensorTier tier, double fixation, const EpisodeConfig& config) {
    SensorSpec s;
    s.tier = tier;
    s.noise_frac = noise_fraction(tier);
    s.z_range = 2.0 * (config.h_limit + fixation * std::sin(config.theta_limit()));
    s.rng_stream = "sensor/" + to_string(tier);
    return s;
}

Accelerations accelerations(const PhysicalParams& p, const SimState& s, double u) {
    const double sin_t = std::sin(s.theta);
    const double cos_t = std::cos(s.theta);
    const double ml = p.pole_mass * p.pole_length;
    // [M+m   m l] [h'']   [u + m l theta'^2 sin]
    // [cos     l] [t''] = [g sin               ]
    const double a11 = p.cart_mass + p.pole_mass;
    const double a12 = ml;
    const double a21 = cos_t;
    const double a22 = p.pole_length;
    const double r1 = u + ml * s.theta_dot * s.theta_dot * sin_t;
    const double r2 = p.gravity * sin_t;
    const double det = a11 * a22 - a12 * a21;
    if (!(std::abs(det) > 0.0)) {
        throw Error("accelerations: singular mass matrix");
    }
    return {(r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det};
}

SimState step(const PhysicalParams& p, const SimState& s, double u) {
    const auto acc = accelerations(p, s, u);
    return {s.h + p.tau * s.h_dot, s.h_dot + p.tau * acc.h_ddot, s.theta + p.tau * s.theta_dot,
            s.theta_dot + p.tau * acc.theta_ddot};
}

SimState step_n(const PhysicalParams& params, SimState state, double u, int count) {
    for (int i = 0; i < count; ++i) {
        state = step(params, state, u);
    }
    return state;
}

double fixation_position(const PhysicalParams& params, const SimState& state) {
    return state.h + params.fixation * std::sin(state.theta);
}

double observe(const PhysicalParams& params, const SimState& state, const SensorSpec& sensor, Rng& rng) {
    const double z = fixation_position(params, state);
    const double sigma = sensor.sigma();
    if (sigma <= 0.0) {
        return z;
    }
    std::normal_distribution<double> noise(0.0, sigma);
    return z + noise(rng);
}

StateSpaceModel linearize(const PhysicalParams& p) {
    p.validate();
    const double big_m = p.cart_mass;
    const double m = p.pole_mass;
    const double l = p.pole_length;
    const double g = p.gravity;
    Mat ac = Mat::Zero(4, 4);
    ac(0, 1) = 1.0;
    ac(1, 2) = -m * g / big_m;
    ac(2, 3) = 1.0;
    ac(3, 2) = (big_m + m) * g / (big_m * l);
    Mat bc = Mat::Zero(4, 1);
    bc(1, 0) = 1.0 / big_m;
    bc(3, 0) = -1.0 / (big_m * l);
    Mat c(1, 4);
    c << 1.0, 0.0, p.fixation, 0.0;
    return StateSpaceModel(Mat::Identity(4, 4) + p.tau * ac, p.tau * bc, c, Mat::Zero(1, 1), p.tau);
}

void Trajectory::validate() const {
    if (y.empty() || y.size() != u.size()) {
        throw InputError("trajectory: y and u must have equal, non-zero length");
    }
    if (!states.empty() && states.size() != y.size()) {
        throw InputError("trajectory: state record length differs from y");
    }
}

std::string to_string(Termination cause) {
    switch (cause) {
        case Termination::max_steps:
            return "max_steps";
        case Termination::h_limit:
            return "h_limit";
        case Termination::theta_limit:
            return "theta_limit";
        case Termination::controller_error:
            return "controller_error";
    }
    return "unknown";
}

SimState sample_initial_state(const EpisodeConfig& config, Rng& rng) {
    std::uniform_real_distribution<double> dist(-config.init_halfwidth, config.init_halfwidth);
    SimState s;
    s.h = dist(rng);
    s.h_dot = dist(rng);
    s.theta = dist(rng);
    s.theta_dot = dist(rng);
    return s;
}

std::optional<Termination> limit_violation(const EpisodeConfig& config, const SimState& state) {
    if (!(std::abs(state.h) <= config.h_limit)) {
        return Termination::h_limit;
    }
    if (!(std::abs(state.theta) <= config.theta_limit())) {
        return Termination::theta_limit;
    }
    return std::nullopt;
}

Episode run_episode(const PhysicalParams& params, const EpisodeConfig& config, Controller& controller,
                    const SensorSpec& sensor) {
    auto rng = make_rng(config.seed, "episode/init");
    const auto initial = sample_initial_state(config, rng);
    return run_episode_from(params, config, initial, controller, sensor);
}

Episode run_episode_from(const PhysicalParams& params, const EpisodeConfig& config, const SimState& initial,
                         Controller& controller, const SensorSpec& sensor, bool record_trajectory) {
    params.validate();
    config.validate();
    Episode ep;
    ep.result.seed = config.seed;
    auto noise_rng = make_rng(config.seed, sensor.rng_stream);
    controller.reset();

    SimState state = initial;
    if (record_trajectory) {
        ep.trajectory.y.reserve(static_cast<std::size_t>(config.max_steps));
        ep.trajectory.u.reserve(static_cast<std::size_t>(config.max_steps));
        ep.trajectory.states.reserve(static_cast<std::size_t>(config.max_steps));
    }
    for (int t = 0; t < config.max_steps; ++t) {
        const double y = observe(params, state, sensor, noise_rng);
        const double u = controller.act(y);
        if (!std::isfinite(u)) {
            ep.result.cause = Termination::controller_error;
            ep.result.steps = t;
            return ep;
        }
        if (record_trajectory) {
            ep.trajectory.states.push_back(state);
            ep.trajectory.y.push_back(y);
            ep.trajectory.u.push_back(u);
        }
        state = step(params, state, u + config.reference);
        if (auto cause = limit_violation(config, state)) {
            ep.result.cause = *cause;
            ep.result.steps = t;
            return ep;
        }
    }
    ep.result.steps = config.max_steps;
    ep.result.success = true;
    ep.result.cause = Termination::max_steps;
    return ep;
}

LtiController::LtiController(StateSpaceModel model) : model_(std::move(model)) {
    model_.validate();
    if (!model_.is_siso()) {
        throw UnsupportedShape("LtiController: controller must be SISO");
    }
    state_ = Vec::Zero(model_.states());
}

void LtiController::reset() { state_.setZero(); }

double LtiController::act(double y) {
    const double u = (model_.C * state_)(0) + model_.D(0, 0) * y;
    if (model_.states() > 0) {
        state_ = model_.A * state_ + model_.B.col(0) * y;
    }
    return u;
}

}  // namespace occball
