#include "occball/evaluation.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace occball {

EvaluationSummary summarize(std::vector<EpisodeResult> episodes) {
    EvaluationSummary out;
    if (episodes.empty()) {
        return out;
    }
    double reward = 0.0;
    int successes = 0;
    for (const auto& e : episodes) {
        reward += e.reward();
        successes += e.success ? 1 : 0;
    }
    const auto n = static_cast<double>(episodes.size());
    out.avg_reward = reward / n;
    out.success_rate = successes / n;
    out.episodes = std::move(episodes);
    return out;
}

EvaluationSummary evaluate(Controller& controller, const PhysicalParams& params, const SensorSpec& sensor,
                           int n_episodes, std::uint64_t seed, const EpisodeConfig& base) {
    if (n_episodes < 1) {
        throw InputError("evaluate: need at least one episode");
    }
    std::vector<EpisodeResult> results;
    results.reserve(static_cast<std::size_t>(n_episodes));
    for (int i = 0; i < n_episodes; ++i) {
        EpisodeConfig cfg = base;
        cfg.seed = derive_seed(seed, "eval", static_cast<std::uint64_t>(i));
        auto rng = make_rng(cfg.seed, "episode/init");
        const auto init = sample_initial_state(cfg, rng);
        results.push_back(run_episode_from(params, cfg, init, controller, sensor, false).result);
    }
    return summarize(std::move(results));
}

bool stabilizes_from(Controller& controller, const PhysicalParams& params, const SensorSpec& sensor,
                     double theta0_deg, std::uint64_t seed, const EpisodeConfig& base) {
    EpisodeConfig cfg = base;
    cfg.seed = seed;
    SimState init;
    init.theta = theta0_deg * std::numbers::pi / 180.0;
    return run_episode_from(params, cfg, init, controller, sensor, false).result.success;
}

MaxAngleResult max_stabilized_angle(Controller& controller, const PhysicalParams& params, const SensorSpec& sensor,
                                    double tol_deg, std::uint64_t seed, const EpisodeConfig& base) {
    MaxAngleResult out;
    auto probe = [&](double deg) {
        ++out.probes;
        return stabilizes_from(controller, params, sensor, deg, seed, base);
    };
    if (!probe(0.0)) {
        return out;
    }
    double lo = 0.0;
    double hi = base.theta_limit_deg;
    if (probe(hi)) {
        out.degrees = hi;
        return out;
    }
    while (hi - lo >= tol_deg) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.degrees = lo;
    const double span = base.theta_limit_deg - hi;
    for (const double frac : {0.25, 0.5, 0.75}) {
        if (span > 0.0 && probe(hi + frac * span)) {
            out.non_monotone = true;
        }
    }
    return out;
}

StateSpaceModel negative_feedback_form(const StateSpaceModel& controller) {
    StateSpaceModel out = controller;
    out.C = -out.C;
    out.D = -out.D;
    return out;
}

ValidationReport validate_controller(const StateSpaceModel& controller, const PhysicalParams& true_params,
                                     const SensorSpec& sensor, double angle_tol_deg, std::uint64_t seed) {
    ValidationReport report;
    const auto plant = linearize(true_params);
    const auto loop = closed_loop(plant, negative_feedback_form(controller));
    report.true_loop_radius = loop.spectral_radius;
    report.stable_on_true_plant = loop.internally_stable;
    report.hinf_T = loop.internally_stable ? hinf_norm(loop.T).value : std::numeric_limits<double>::quiet_NaN();
    report.bound = pole_zero_bound(plant);
    LtiController runner(controller);
    report.max_angle = max_stabilized_angle(runner, true_params, sensor, angle_tol_deg, seed);
    return report;
}

}  // namespace occball
