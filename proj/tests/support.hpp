#pragma once

// Generators shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "occball/linalg.hpp"
#include "occball/sysid.hpp"

namespace occball::testing {

inline Mat gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = n(rng);
        }
    }
    return m;
}

/// A stable observer (At, B, L, C). The Hankel layout drops C At^k for k >= p,
/// so the default radius 0.1 keeps that tail near 1e-10 at p = 10.
struct Observer {
    Mat At, B, L, C;

    [[nodiscard]] StateSpaceModel plant(double dt = 0.02) const {
        return {At + L * C, B, C, Mat::Zero(1, 1), dt};
    }

    /// Exact ARX coefficients: output lag k+1 carries C At^k L, input lag k+1 carries C At^k B.
    [[nodiscard]] ArxModel arx(int p) const {
        ArxModel m;
        m.order = p;
        m.coefficients.resize(2 * p);
        Mat power = Mat::Identity(At.rows(), At.cols());
        for (int k = 0; k < p; ++k) {
            m.coefficients(2 * k) = (C * power * L)(0, 0);
            m.coefficients(2 * k + 1) = (C * power * B)(0, 0);
            power = power * At;
        }
        return m;
    }
};

inline Observer random_observer(int n, std::mt19937_64& rng, double radius = 0.1) {
    Observer o;
    o.At = gaussian(n, n, rng);
    o.At *= radius / spectral_radius(o.At);
    o.B = gaussian(n, 1, rng);
    o.L = gaussian(n, 1, rng);
    o.C = gaussian(1, n, rng);
    return o;
}

/// Max |G1 - G2| over `points` frequencies spread over [0, pi].
inline double max_response_error(const StateSpaceModel& g1, const StateSpaceModel& g2, int points = 512) {
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
        const Complex z = std::polar(1.0, std::numbers::pi * k / (points - 1));
        worst = std::max(worst, std::abs(tf_eval_siso(g1, z) - tf_eval_siso(g2, z)));
    }
    return worst;
}

}  // namespace occball::testing
