#include <doctest.h>

#include <cmath>

#include "occball/controller.hpp"
#include "occball/errors.hpp"
#include "occball/plant.hpp"

using namespace occball;

namespace {

// Hand solve of the 2x2 acceleration system by Cramer's rule.
Accelerations cramer(const PhysicalParams& p, const SimState& s, double u) {
    const double a11 = p.cart_mass + p.pole_mass;
    const double a12 = p.pole_mass * p.pole_length;
    const double a21 = std::cos(s.theta);
    const double a22 = p.pole_length;
    const double b1 = u + p.pole_mass * p.pole_length * s.theta_dot * s.theta_dot * std::sin(s.theta);
    const double b2 = p.gravity * std::sin(s.theta);
    const double det = a11 * a22 - a12 * a21;
    return {(b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det};
}

}  // namespace

TEST_CASE("accelerations") {
    const PhysicalParams p;
    const auto rest = accelerations(p, {}, 0.0);
    CHECK(rest.h_ddot == 0.0);
    CHECK(rest.theta_ddot == 0.0);

    SimState tilt;
    tilt.theta = 0.01;
    const auto a = accelerations(p, tilt, 0.0);
    CHECK(std::abs(a.h_ddot - (-0.0098098)) < 1e-6);
    CHECK(std::abs(a.theta_ddot - 0.107908) < 1e-6);

    const auto push = accelerations(p, {}, 1.0);
    CHECK(std::abs(push.h_ddot - 1.0) < 1e-12);
    CHECK(std::abs(push.theta_ddot + 1.0) < 1e-12);

    Rng rng(4);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const SimState s{d(rng), d(rng), d(rng), 3 * d(rng)};
        const double u = 10 * d(rng);
        const auto got = accelerations(p, s, u);
        const auto want = cramer(p, s, u);
        CHECK(std::abs(got.h_ddot - want.h_ddot) < 1e-12);
        CHECK(std::abs(got.theta_ddot - want.theta_ddot) < 1e-12);
        // Odd symmetry under state and input negation.
        const auto neg = accelerations(p, {-s.h, -s.h_dot, -s.theta, -s.theta_dot}, -u);
        CHECK(std::abs(neg.h_ddot + got.h_ddot) < 1e-12);
        CHECK(std::abs(neg.theta_ddot + got.theta_ddot) < 1e-12);
    }
}

TEST_CASE("euler step") {
    const PhysicalParams p;
    CHECK(step(p, {}, 0.0) == SimState{});
    SimState tilt;
    tilt.theta = 0.01;
    const auto s = step(p, tilt, 0.0);
    CHECK(s.h == 0.0);
    CHECK(std::abs(s.h_dot - (-0.000196196)) < 1e-8);
    CHECK(std::abs(s.theta - 0.01) < 1e-15);
    CHECK(std::abs(s.theta_dot - 0.00215816) < 1e-8);

    const auto two = step_n(p, tilt, 0.5, 2);
    CHECK(two == step(p, step(p, tilt, 0.5), 0.5));
}

TEST_CASE("linearization matches finite differences of the step map") {
    for (const double l0 : {1.0, 0.8}) {
        const auto p = PhysicalParams::with_fixation(l0);
        const auto lin = linearize(p);
        const double h = 1e-6;
        for (int j = 0; j < 4; ++j) {
            Vec e = Vec::Zero(4);
            e(j) = h;
            const Vec fd = (step(p, SimState::from_vec(e), 0.0).to_vec() - step(p, SimState::from_vec(-e), 0.0).to_vec()) / (2 * h);
            CHECK((fd - lin.A.col(j)).norm() < 1e-8);
        }
        const Vec fdu = (step(p, {}, h).to_vec() - step(p, {}, -h).to_vec()) / (2 * h);
        CHECK((fdu - lin.B.col(0)).norm() < 1e-8);
        CHECK(lin.C(0, 0) == 1.0);
        CHECK(lin.C(0, 2) == l0);
        CHECK(lin.D(0, 0) == 0.0);
    }
    const auto lin7 = linearize(PhysicalParams::with_fixation(0.7));
    Vec x(4);
    x << 0.2, 0.0, 0.1, 0.0;
    CHECK(std::abs((lin7.C * x)(0) - 0.27) < 1e-15);
}

TEST_CASE("observation") {
    Rng rng(1);
    const PhysicalParams p;
    const auto exact = SensorSpec::make(SensorTier::noise_free, 1.0);
    SimState s;
    s.h = 0.1;
    CHECK(observe(p, s, exact, rng) == 0.1);
    SimState t;
    t.theta = 15.0 * std::acos(-1.0) / 180.0;
    CHECK(std::abs(fixation_position(PhysicalParams::with_fixation(0.9), t) - 0.232937) < 1e-6);

    // z range 2 (0.6 + sin 15 deg) at l0 = 1, times 0.03 %.
    const auto depth = SensorSpec::make(SensorTier::depth_like, 1.0);
    CHECK(std::abs(depth.sigma() - 0.0003 * 2.0 * (0.6 + std::sin(t.theta))) < 1e-12);
    CHECK(std::abs(depth.sigma() - 5.153e-4) < 1e-6);
    CHECK(noise_fraction(SensorTier::rgb_like) == 0.0025);

    // Sample standard deviation of the rgb noise.
    const auto rgb = SensorSpec::make(SensorTier::rgb_like, 1.0);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double e = observe(p, {}, rgb, rng);
        sum += e;
        sq += e * e;
    }
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    CHECK(std::abs(sd / rgb.sigma() - 1.0) < 0.03);
    CHECK(sensor_tier_from_string("rgb") == SensorTier::rgb_like);
    CHECK_THROWS_AS((void)sensor_tier_from_string("lidar"), InputError);
}

TEST_CASE("episodes") {
    const PhysicalParams p;
    const auto sensor = SensorSpec::make(SensorTier::noise_free, 1.0);
    ZeroController zero;
    const EpisodeConfig cfg;
    const auto still = run_episode_from(p, cfg, {}, zero, sensor);
    CHECK(still.result.steps == 500);
    CHECK(still.result.success);
    CHECK(still.result.reward() == 500.0);
    CHECK(still.trajectory.size() > 0);

    SimState tilted;
    tilted.theta = 5.0 * std::acos(-1.0) / 180.0;
    const auto fall = run_episode_from(p, cfg, tilted, zero, sensor);
    CHECK(fall.result.steps < 500);
    CHECK_FALSE(fall.result.success);
    CHECK(fall.result.cause == Termination::theta_limit);

    EpisodeConfig seeded;
    seeded.seed = 99;
    const auto a = run_episode(p, seeded, zero, sensor);
    const auto b = run_episode(p, seeded, zero, sensor);
    CHECK(a.result.steps == b.result.steps);
    CHECK(a.trajectory.y == b.trajectory.y);
}

TEST_CASE("parameter validation") {
    PhysicalParams bad;
    bad.fixation = 1.5;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = {};
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    EpisodeConfig cfg;
    cfg.max_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}
