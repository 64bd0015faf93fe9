#include "occball/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/SVD>

namespace occball {

namespace {

double gain_at(const StateSpaceModel& model, double omega) {
    const CMat g = tf_eval(model, std::polar(1.0, omega));
    if (g.rows() == 1 && g.cols() == 1) {
        return std::abs(g(0, 0));
    }
    Eigen::JacobiSVD<CMat> svd(g);
    return svd.singularValues()(0);
}

}  // namespace

HinfNorm hinf_norm(const StateSpaceModel& model, int grid_size) {
    model.validate();
    if (grid_size < 2) {
        throw InputError("hinf_norm: grid_size must be at least 2");
    }
    const double rho = spectral_radius(model.A);
    if (!(rho < 1.0)) {
        throw UnstableModel("hinf_norm: model has poles on or outside the unit circle");
    }
    HinfNorm out;
    out.grid_size = grid_size;
    const double step = std::numbers::pi / (grid_size - 1);
    int best = 0;
    double best_value = -1.0;
    for (int k = 0; k < grid_size; ++k) {
        const double v = gain_at(model, k * step);
        if (v > best_value) {
            best_value = v;
            best = k;
        }
    }
    out.value = best_value;
    out.peak_frequency = best * step;

    // Golden-section refinement on the bracket around the grid maximum.
    double lo = std::max(0.0, (best - 1) * step);
    double hi = std::min(std::numbers::pi, (best + 1) * step);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = gain_at(model, x1);
    double f2 = gain_at(model, x2);
    for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = gain_at(model, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = gain_at(model, x2);
        }
    }
    for (const auto& [w, f] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
        if (f > out.value) {
            out.value = f;
            out.peak_frequency = w;
        }
    }
    return out;
}

LimitBound pole_zero_bound(const std::vector<Complex>& poles, const std::vector<Complex>& zeros,
                          double unit_circle_tol) {
    auto unstable = [&](Complex v) { return std::abs(v) > 1.0 + unit_circle_tol; };
    LimitBound out;
    bool any_pole = false;
    double best = 0.0;
    for (const auto p : poles) {
        if (!unstable(p)) {
            continue;
        }
        any_pole = true;
        double product = 1.0;
        for (const auto q : zeros) {
            if (!unstable(q)) {
                continue;
            }
            if (std::abs(p - q) < 1e-12) {
                out.infinite = true;
                out.value = std::numeric_limits<double>::infinity();
                return out;
            }
            product *= std::abs((1.0 - 1.0 / (p * q)) / (1.0 / p - 1.0 / q));
        }
        best = std::max(best, product);
    }
    if (!any_pole) {
        out.vacuous = true;
        out.value = 1.0;
        return out;
    }
    out.value = best;
    return out;
}

LimitBound pole_zero_bound(const StateSpaceModel& plant, double unit_circle_tol) {
    const auto set = pole_zero_set(plant, unit_circle_tol);
    return pole_zero_bound(set.poles, set.zeros, unit_circle_tol);
}

ClosedLoop closed_loop(const StateSpaceModel& plant, const StateSpaceModel& controller) {
    plant.validate();
    controller.validate();
    if (!plant.is_siso() || !controller.is_siso()) {
        throw UnsupportedShape("closed_loop: plant and controller must be SISO");
    }
    const double dp = plant.D(0, 0);
    const double dc = controller.D(0, 0);
    const double denom = 1.0 + dp * dc;
    if (std::abs(denom) < 1e-12) {
        throw InputError("closed_loop: feedback loop is ill-posed (1 + Dp Dc = 0)");
    }
    // Loop L = P C with controller states first.
    const auto nc = controller.states();
    const auto np = plant.states();
    const auto n = nc + np;
    Mat al = Mat::Zero(n, n);
    Mat bl(n, 1);
    Mat cl(1, n);
    al.topLeftCorner(nc, nc) = controller.A;
    al.bottomLeftCorner(np, nc) = plant.B * controller.C;
    al.bottomRightCorner(np, np) = plant.A;
    bl.topRows(nc) = controller.B;
    bl.bottomRows(np) = plant.B * dc;
    cl.leftCols(nc) = dp * controller.C;
    cl.rightCols(np) = plant.C;
    const double dl = dp * dc;

    // T = L (1 + L)^-1 and S = 1 - T.
    const Mat at = al - bl * cl / denom;
    const Mat bt = bl / denom;
    const Mat ct = cl / denom;
    ClosedLoop out;
    out.plant = plant;
    out.controller = controller;
    out.T = StateSpaceModel(at, bt, ct, Mat::Constant(1, 1, dl / denom), plant.dt);
    out.S = StateSpaceModel(at, bt, -ct, Mat::Constant(1, 1, 1.0 - dl / denom), plant.dt);
    out.spectral_radius = n > 0 ? spectral_radius(at) : 0.0;
    out.internally_stable = out.spectral_radius < 1.0 - 1e-9;
    return out;
}

}  // namespace occball
