#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "occball/errors.hpp"
#include "occball/linalg.hpp"
#include "occball/plant.hpp"

using namespace occball;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = n(rng);
        }
    }
    return m;
}

// Closed forms for the Euler-discretized cart-pole.
double unstable_pole(double tau = 0.02) { return 1.0 + tau * std::sqrt(1.1 * 9.81 / 1.0); }
double zero_offset(double l0, double tau = 0.02) { return tau * std::sqrt(9.81 / (1.0 - l0)); }

bool same_multiset(std::vector<Complex> a, std::vector<Complex> b, double tol) {
    if (a.size() != b.size()) {
        return false;
    }
    for (const auto& x : a) {
        auto it = std::min_element(b.begin(), b.end(),
                                   [&](const Complex& p, const Complex& q) { return std::abs(p - x) < std::abs(q - x); });
        if (std::abs(*it - x) > tol) {
            return false;
        }
        b.erase(it);
    }
    return true;
}

}  // namespace

TEST_CASE("tf_eval basics") {
    CHECK(std::abs(tf_eval_siso(StateSpaceModel::gain(5.0), {0.3, 0.7}) - 5.0) < 1e-15);
    const StateSpaceModel s(Mat::Constant(1, 1, 0.5), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Zero(1, 1), 0.02);
    CHECK(std::abs(tf_eval_siso(s, 1.0) - 2.0) < 1e-14);
    CHECK_THROWS_AS((void)tf_eval_siso(s, 0.5), NearPoleError);
}

TEST_CASE("tf_eval near the cartpole's unstable pole") {
    const auto plant = linearize(PhysicalParams{});
    const Complex zeta = unstable_pole() + 1e-9;
    const Complex g = tf_eval_siso(plant, zeta);
    // Oracle: explicit inverse.
    const CMat m = zeta * CMat::Identity(4, 4) - plant.A.cast<Complex>();
    const Complex direct = (plant.C.cast<Complex>() * m.inverse() * plant.B.cast<Complex>())(0, 0);
    CHECK(std::abs(g) > 1e6);
    CHECK(std::abs(g - direct) / std::abs(direct) < 1e-6);
}

TEST_CASE("tf_eval agrees with explicit inversion at offset points") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const StateSpaceModel m(random_mat(5, 5, rng, 0.4), random_mat(5, 1, rng), random_mat(1, 5, rng),
                                random_mat(1, 1, rng), 0.02);
        for (const auto& p : poles(m)) {
            const Complex zeta = p + Complex(0.05, 0.03);
            const CMat inv = (zeta * CMat::Identity(5, 5) - m.A.cast<Complex>()).inverse();
            const Complex direct = (m.C.cast<Complex>() * inv * m.B.cast<Complex>())(0, 0) + m.D(0, 0);
            CHECK(std::abs(tf_eval_siso(m, zeta) - direct) <= 1e-10 * std::abs(direct));
        }
    }
}

TEST_CASE("poles") {
    const StateSpaceModel id(Mat::Identity(2, 2), Mat::Ones(2, 1), Mat::Ones(1, 2), Mat::Zero(1, 1), 0.02);
    CHECK(same_multiset(poles(id), {1.0, 1.0}, 1e-12));
    Mat d = Mat::Zero(2, 2);
    d.diagonal() << 0.5, 2.0;
    const StateSpaceModel dg(d, Mat::Ones(2, 1), Mat::Ones(1, 2), Mat::Zero(1, 1), 0.02);
    CHECK(same_multiset(poles(dg), {0.5, 2.0}, 1e-12));

    const double p = unstable_pole();
    CHECK(same_multiset(poles(linearize(PhysicalParams{})), {1.0, 1.0, p, 2.0 - p}, 1e-7));
}

TEST_CASE("poles are similarity invariant") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat a = random_mat(4, 4, rng);
        Mat t = random_mat(4, 4, rng) + 4.0 * Mat::Identity(4, 4);
        const StateSpaceModel m1(a, Mat::Ones(4, 1), Mat::Ones(1, 4), Mat::Zero(1, 1), 0.02);
        const StateSpaceModel m2(t * a * t.inverse(), Mat::Ones(4, 1), Mat::Ones(1, 4), Mat::Zero(1, 1), 0.02);
        CHECK(same_multiset(poles(m1), poles(m2), 1e-8));
    }
}

TEST_CASE("transmission zeros of the cartpole") {
    CHECK(transmission_zeros(linearize(PhysicalParams::with_fixation(1.0))).empty());
    for (const double l0 : {0.99, 0.9, 0.8, 0.7, 0.5}) {
        const auto z = transmission_zeros(linearize(PhysicalParams::with_fixation(l0)));
        const double q = zero_offset(l0);
        CAPTURE(l0);
        CHECK(same_multiset(z, {1.0 + q, 1.0 - q}, 1e-6));
    }
    const auto z9 = transmission_zeros(linearize(PhysicalParams::with_fixation(0.9)));
    CHECK(same_multiset(z9, {1.19809, 0.80191}, 1e-5));
}

TEST_CASE("transmission zeros on constructed systems") {
    // (z - 0.5) / ((z - 0.2)(z - 0.9)) in controllable form.
    Mat a(2, 2);
    a << 1.1, -0.18, 1.0, 0.0;
    Mat b(2, 1);
    b << 1.0, 0.0;
    Mat c(1, 2);
    c << 1.0, -0.5;
    const StateSpaceModel m(a, b, c, Mat::Zero(1, 1), 0.02);
    CHECK(same_multiset(transmission_zeros(m), {0.5}, 1e-12));

    const StateSpaceModel mimo(Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Zero(2, 2), 0.02);
    CHECK_THROWS_AS((void)transmission_zeros(mimo), UnsupportedShape);
}

TEST_CASE("least squares") {
    std::mt19937_64 rng(5);
    const Mat y = random_mat(3, 2, rng);
    CHECK((least_squares(Mat::Identity(3, 3), y) - y).norm() < 1e-14);

    const Mat phi = random_mat(50, 3, rng);
    const Mat g = random_mat(3, 1, rng);
    CHECK((least_squares(phi, phi * g) - g).norm() < 1e-10);

    const Mat target = random_mat(50, 1, rng);
    const Mat sol = least_squares(phi, target);
    const Mat residual = target - phi * sol;
    CHECK((phi.transpose() * residual).cwiseAbs().maxCoeff() < 1e-8 * target.norm() * phi.norm());

    // Rank deficient: duplicated column gets the split minimum-norm solution.
    Mat dup(4, 2);
    dup << 1, 1, 2, 2, 3, 3, 4, 4;
    Vec rhs(4);
    rhs << 2, 4, 6, 8;
    const Mat mn = least_squares(dup, rhs);
    CHECK(mn(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mn(1, 0) == doctest::Approx(1.0).epsilon(1e-12));

    Mat bad = Mat::Ones(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS((void)least_squares(bad, Mat::Ones(2, 1)), InputError);
}

TEST_CASE("DARE scalar cases") {
    const Mat p = solve_dare(Mat::Constant(1, 1, 2.0), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1));
    // P^2 - 4P - 1 = 0, stabilizing root.
    CHECK(std::abs(p(0, 0) - (2.0 + std::sqrt(5.0))) < 1e-10);
    const Mat p0 = solve_dare(Mat::Zero(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1));
    CHECK(std::abs(p0(0, 0) - 1.0) < 1e-14);
}

TEST_CASE("DARE random stabilizable systems") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 6;
        const int m = 1 + trial % 2;
        const Mat a = random_mat(n, n, rng, 0.8);
        const Mat b = random_mat(n, m, rng);
        const Mat qf = random_mat(n, n, rng);
        const Mat q = qf * qf.transpose() + 1e-3 * Mat::Identity(n, n);
        const Mat rf = random_mat(m, m, rng);
        const Mat r = rf * rf.transpose() + 0.1 * Mat::Identity(m, m);
        const Mat x = solve_dare(a, b, q, r);
        CAPTURE(trial);
        CHECK(dare_residual(a, b, q, r, x) < 1e-8 * (1.0 + x.norm()));
        CHECK((x - x.transpose()).norm() < 1e-10 * (1.0 + x.norm()));
    }
}

TEST_CASE("DARE rejects bad inputs") {
    // Unstable mode that B cannot reach.
    Mat a = Mat::Zero(2, 2);
    a.diagonal() << 2.0, 0.5;
    Mat b(2, 1);
    b << 0.0, 1.0;
    CHECK_THROWS_AS((void)solve_dare(a, b, Mat::Identity(2, 2), Mat::Ones(1, 1)), SynthesisInfeasible);
    CHECK_THROWS_AS((void)solve_dare(Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1), -Mat::Ones(1, 1)),
                    InputError);
}

TEST_CASE("Stein equation") {
    std::mt19937_64 rng(2);
    const Mat a = 0.3 * random_mat(4, 4, rng);
    const Mat q = Mat::Identity(4, 4);
    const Mat x = solve_stein(a, q);
    CHECK((a.transpose() * x * a + q - x).norm() < 1e-12);
}

TEST_CASE("pole-zero classification") {
    const auto pz = pole_zero_set(linearize(PhysicalParams::with_fixation(0.8)));
    CHECK(pz.poles.size() == 4);
    CHECK(pz.poles_in(PoleZeroSet::Region::unstable).size() == 1);
    CHECK(pz.poles_in(PoleZeroSet::Region::marginal).size() == 2);
    CHECK(pz.poles_in(PoleZeroSet::Region::stable).size() == 1);
    CHECK(pz.zeros_in(PoleZeroSet::Region::unstable).size() == 1);
}

TEST_CASE("model validation") {
    CHECK_THROWS_AS(StateSpaceModel(Mat::Ones(2, 2), Mat::Ones(3, 1), Mat::Ones(1, 2), Mat::Zero(1, 1), 0.02),
                    InputError);
    Mat a = Mat::Ones(1, 1);
    a(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(StateSpaceModel(a, Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Zero(1, 1), 0.02), InputError);
}
