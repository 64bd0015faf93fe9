#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/SVD>

#include "occball/errors.hpp"
#include "occball/sysid.hpp"
#include "support.hpp"

using namespace occball;
using occball::testing::gaussian;
using occball::testing::max_response_error;
using occball::testing::Observer;
using occball::testing::random_observer;

namespace {

Trajectory arx2_data(int length, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Trajectory t;
    t.u.resize(length);
    t.y.assign(length, 0.0);
    for (int k = 0; k < length; ++k) {
        t.u[k] = u(rng);
    }
    for (int k = 2; k < length; ++k) {
        t.y[k] = 0.5 * t.y[k - 1] + 0.8 * t.u[k - 1] - 0.2 * t.y[k - 2] + 0.3 * t.u[k - 2];
    }
    return t;
}

std::vector<Trajectory> linear_data(const StateSpaceModel& m, int n_traj, int length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_real_distribution<double> x0(-0.05, 0.05);
    std::vector<Trajectory> out;
    for (int i = 0; i < n_traj; ++i) {
        Trajectory t;
        Vec x(4);
        x << x0(rng), x0(rng), x0(rng), x0(rng);
        for (int k = 0; k < length; ++k) {
            t.states.push_back(SimState::from_vec(x));
            t.y.push_back((m.C * x)(0));
            t.u.push_back(u(rng));
            x = m.A * x + m.B * t.u.back();
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TEST_CASE("arx recovers a known second-order process") {
    std::mt19937_64 rng(8);
    const std::vector<Trajectory> data{arx2_data(300, rng), arx2_data(200, rng)};
    const auto arx = fit_arx(data, 2);
    CHECK(std::abs(arx.output_coefficient(1) - 0.5) < 1e-8);
    CHECK(std::abs(arx.input_coefficient(1) - 0.8) < 1e-8);
    CHECK(std::abs(arx.output_coefficient(2) + 0.2) < 1e-8);
    CHECK(std::abs(arx.input_coefficient(2) - 0.3) < 1e-8);
    CHECK(std::abs(arx.predict(data[0].y, data[0].u, 50) - data[0].y[50]) < 1e-8);

    CHECK_THROWS_AS((void)fit_arx(data, 0), InputError);
    const std::vector<Trajectory> tiny{arx2_data(5, rng)};
    CHECK_THROWS_AS((void)fit_arx(tiny, 4), InsufficientData);
}

TEST_CASE("ho-kalman recovers random observers from exact Markov parameters") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto obs = random_observer(4, rng);
        const auto hk = ho_kalman(obs.arx(10), 4);
        CAPTURE(trial);
        CHECK_FALSE(hk.rank_deficient);
        CHECK(max_response_error(obs.plant(), hk.model(0.02)) < 1e-6);
        // Observer Markov parameters are reproduced too.
        const Mat at = hk.A_hat - hk.L_hat * hk.C_hat;
        CHECK(std::abs((hk.C_hat * at * hk.L_hat)(0, 0) - (obs.C * obs.At * obs.L)(0, 0)) < 1e-8);
        CHECK(std::abs(hk.observer_radius - spectral_radius(at)) < 1e-12);
    }
}

TEST_CASE("ho-kalman hankel layout") {
    ArxModel arx;
    arx.order = 3;
    arx.coefficients.resize(6);
    arx.coefficients << 10, 11, 20, 21, 30, 31;  // lag1 (y, u), lag2, lag3
    const Mat h = ho_kalman_hankel(arx);
    REQUIRE(h.rows() == 3);
    REQUIRE(h.cols() == 6);
    // Row 0 holds powers 2, 1, 0 from left to right as (B, L) pairs.
    CHECK(h(0, 0) == 31);
    CHECK(h(0, 1) == 30);
    CHECK(h(0, 4) == 11);
    CHECK(h(0, 5) == 10);
    // Row 1 shifts by one power; power 3 is truncated.
    CHECK(h(1, 0) == 0);
    CHECK(h(1, 2) == 31);
    CHECK(h(1, 5) == 20);
    CHECK(h(2, 5) == 30);
}

TEST_CASE("ho-kalman scalar and degenerate cases") {
    // x+ = 0.3 x + u + 0.5 y, z = 2 x: rank one Hankel.
    Observer scalar{Mat::Constant(1, 1, 0.3), Mat::Ones(1, 1), Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 2.0)};
    const auto hk = ho_kalman(scalar.arx(12), 1);
    CHECK(max_response_error(scalar.plant(), hk.model(0.02)) < 1e-6);
    CHECK(std::abs(hk.A_hat(0, 0) - (0.3 + 0.5 * 2.0)) < 1e-6);

    ArxModel zero;
    zero.order = 5;
    zero.coefficients = Vec::Zero(10);
    const auto hz = ho_kalman(zero, 2);
    CHECK(hz.rank_deficient);
    CHECK(hz.A_hat.isZero());
    CHECK(hz.B_hat.isZero());
    CHECK(hz.C_hat.isZero());
    CHECK(hz.L_hat.isZero());

    CHECK_THROWS_AS((void)ho_kalman(scalar.arx(4), 5), InputError);
}

TEST_CASE("ho-kalman is invariant to SVD sign flips") {
    std::mt19937_64 rng(31);
    const auto obs = random_observer(4, rng);
    const Mat h = ho_kalman_hankel(obs.arx(10));
    Eigen::JacobiSVD<Mat> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto base = detail::realize_from_svd(svd.matrixU(), svd.singularValues(), svd.matrixV(), 10, 4);
    Mat u = svd.matrixU();
    Mat v = svd.matrixV();
    u.col(1) *= -1;
    v.col(1) *= -1;
    u.col(3) *= -1;
    v.col(3) *= -1;
    const auto flipped = detail::realize_from_svd(u, svd.singularValues(), v, 10, 4);
    CHECK(max_response_error(base.model(0.02), flipped.model(0.02)) < 1e-9);
    CHECK(max_response_error(obs.plant(), flipped.model(0.02)) < 1e-6);
}

TEST_CASE("full-state fit") {
    const auto params = PhysicalParams::with_fixation(0.8);
    const auto truth = linearize(params);
    const auto lin = fit_full_state(linear_data(truth, 10, 60, 4), 0.8, 0.02);
    CHECK((lin.A - truth.A).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((lin.B - truth.B).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((lin.C - truth.C).cwiseAbs().maxCoeff() == 0.0);

    const auto sensor = SensorSpec::make(SensorTier::noise_free, 1.0);
    const auto data = collect_sysid_data(PhysicalParams{}, sensor, 100, 7);
    const auto fitted = fit_full_state(data, 1.0, 0.02);
    const auto p = poles(fitted);
    const double q = 0.02 * std::sqrt(1.1 * 9.81);
    for (const double expected : {1.0, 1.0, 1.0 + q, 1.0 - q}) {
        double best = 1e9;
        for (const auto& z : p) {
            best = std::min(best, std::abs(z - expected));
        }
        CHECK(best < 2e-2);
    }

    std::vector<Trajectory> no_states{Trajectory{{0.0, 1.0}, {0.0, 0.0}, {}}};
    CHECK_THROWS_AS((void)fit_full_state(no_states, 1.0, 0.02), InputError);
}

TEST_CASE("data collection") {
    const auto sensor = SensorSpec::make(SensorTier::depth_like, 0.9);
    const auto params = PhysicalParams::with_fixation(0.9);
    const auto big = collect_sysid_budget(params, sensor, 1000, 5);
    CHECK(total_samples(big) == 1000);
    const auto small = collect_sysid_data(params, sensor, 2, 5);
    REQUIRE(big.size() > 2);
    CHECK(small[0].y == big[0].y);
    CHECK(small[1].u == big[1].u);
    for (const auto& t : big) {
        CHECK(t.y.size() == t.u.size());
        CHECK(t.states.size() == t.u.size());
    }
    CHECK(collect_sysid_budget(params, sensor, 1000, 5)[3].y == big[3].y);
}

// The min-norm ARX fit followed by rank-n truncation does not reach the
// 1e-3 agreement on linear plant data: the p = 10 predictor of this plant is
// not an order-4 object. Kept as a tracked expected failure.
TEST_CASE("arx then ho-kalman on linear plant data" * doctest::should_fail()) {
    const auto truth = linearize(PhysicalParams{});
    const auto data = linear_data(truth, 100, 60, 9);
    const auto model = identify_arxhk(data, 10, 4, 0.02);
    double worst = 0.0;
    for (int k = 1; k < 512; ++k) {
        const Complex z = std::polar(1.0, std::numbers::pi * k / 511.0);
        const Complex t = tf_eval_siso(truth, z);
        worst = std::max(worst, std::abs(tf_eval_siso(model, z) - t) / std::abs(t));
    }
    MESSAGE("max relative error " << worst);
    CHECK(worst < 1e-3);
}
