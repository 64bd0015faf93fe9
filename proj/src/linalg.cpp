#include "occball/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace occball {

namespace {

void sort_complex(std::vector<Complex>& values) {
    std::sort(values.begin(), values.end(), [](Complex a, Complex b) {
        if (a.real() != b.real()) {
            return a.real() > b.real();
        }
        return a.imag() > b.imag();
    });
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

bool all_finite(const Mat& m) { return m.allFinite(); }

StateSpaceModel::StateSpaceModel(Mat a, Mat b, Mat c, Mat d, double dt_seconds)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)), dt(dt_seconds) {
    validate();
}

void StateSpaceModel::validate() const {
    const auto n = A.rows();
    if (A.cols() != n) {
        throw InputError("state-space: A must be square");
    }
    if (B.rows() != n || C.cols() != n) {
        throw InputError("state-space: B rows and C columns must equal the state dimension");
    }
    if (D.rows() != C.rows() || D.cols() != B.cols()) {
        throw InputError("state-space: D must be outputs x inputs");
    }
    if (B.cols() < 1 || C.rows() < 1) {
        throw InputError("state-space: at least one input and one output required");
    }
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite()) {
        throw InputError("state-space: non-finite entries");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InputError("state-space: dt must be positive");
    }
}

StateSpaceModel StateSpaceModel::gain(double d, double dt_seconds) {
    return StateSpaceModel(Mat(0, 0), Mat(0, 1), Mat(1, 0), Mat::Constant(1, 1, d), dt_seconds);
}

StateSpaceModel scale_output(const StateSpaceModel& model, double factor) {
    StateSpaceModel out = model;
    out.C *= factor;
    out.D *= factor;
    return out;
}

PoleZeroSet::Region PoleZeroSet::classify(Complex value) const {
    const double r = std::abs(value);
    if (r < 1.0 - unit_circle_tol) {
        return Region::stable;
    }
    if (r > 1.0 + unit_circle_tol) {
        return Region::unstable;
    }
    return Region::marginal;
}

std::vector<Complex> PoleZeroSet::poles_in(Region region) const {
    std::vector<Complex> out;
    std::copy_if(poles.begin(), poles.end(), std::back_inserter(out),
                 [&](Complex p) { return classify(p) == region; });
    return out;
}

std::vector<Complex> PoleZeroSet::zeros_in(Region region) const {
    std::vector<Complex> out;
    std::copy_if(zeros.begin(), zeros.end(), std::back_inserter(out),
                 [&](Complex q) { return classify(q) == region; });
    return out;
}

PoleZeroSet pole_zero_set(const StateSpaceModel& model, double unit_circle_tol) {
    PoleZeroSet set;
    set.poles = poles(model);
    set.zeros = transmission_zeros(model);
    set.unit_circle_tol = unit_circle_tol;
    return set;
}

CMat tf_eval(const StateSpaceModel& model, Complex zeta) {
    const auto n = model.states();
    CMat out = model.D.cast<Complex>();
    if (n == 0) {
        return out;
    }
    CMat pencil = zeta * CMat::Identity(n, n) - model.A.cast<Complex>();
    Eigen::PartialPivLU<CMat> lu(pencil);
    // rcond of a 1-norm estimate; anything this small is a pole for practical purposes.
    if (!(lu.rcond() > 1e-15)) {
        std::ostringstream msg;
        msg << "tf_eval: zeta = " << zeta << " is (numerically) a pole of the model";
        throw NearPoleError(msg.str(), zeta.real(), zeta.imag());
    }
    out += model.C.cast<Complex>() * lu.solve(model.B.cast<Complex>());
    return out;
}

Complex tf_eval_siso(const StateSpaceModel& model, Complex zeta) {
    if (!model.is_siso()) {
        throw UnsupportedShape("tf_eval_siso: model is not SISO");
    }
    return tf_eval(model, zeta)(0, 0);
}

std::vector<Complex> eigenvalues(const Mat& a) {
    std::vector<Complex> out;
    if (a.rows() == 0) {
        return out;
    }
    Eigen::EigenSolver<Mat> solver(a, false);
    if (solver.info() != Eigen::Success) {
        throw Error("eigenvalues: QR iteration failed to converge");
    }
    const auto& ev = solver.eigenvalues();
    out.assign(ev.data(), ev.data() + ev.size());
    sort_complex(out);
    return out;
}

double spectral_radius(const Mat& a) {
    double r = 0.0;
    for (const auto& v : eigenvalues(a)) {
        r = std::max(r, std::abs(v));
    }
    return r;
}

std::vector<Complex> poles(const StateSpaceModel& model) { return eigenvalues(model.A); }

std::vector<Complex> transmission_zeros(const StateSpaceModel& model) {
    if (!model.is_siso()) {
        throw UnsupportedShape("transmission_zeros: only SISO models are supported");
    }
    Mat a = model.A;
    Vec b = model.B.col(0);
    Eigen::RowVectorXd c = model.C.row(0);
    double d = model.D(0, 0);

    while (true) {
        const auto n = a.rows();
        const double row_scale = std::sqrt(c.squaredNorm() + d * d);
        if (row_scale == 0.0) {
            return {};  // identically zero transfer function
        }
        if (std::abs(d) > 1e-10 * row_scale) {
            if (n == 0) {
                return {};
            }
            return eigenvalues(a - b * c / d);
        }
        if (n == 0) {
            return {};
        }
        const double beta = b.norm();
        if (beta == 0.0) {
            return {};
        }
        // Householder reflector sending b to beta * e_last.
        Vec v = b;
        v(n - 1) -= beta;
        Mat q = Mat::Identity(n, n);
        if (v.norm() > 0.0) {
            q -= 2.0 * v * v.transpose() / v.squaredNorm();
        }
        const Mat at = q.transpose() * a * q;
        const Eigen::RowVectorXd ct = c * q;
        const auto m = n - 1;
        Mat a_next = at.topLeftCorner(m, m);
        Vec b_next = at.topRightCorner(m, 1);
        Eigen::RowVectorXd c_next = ct.head(m);
        d = ct(n - 1);
        a = std::move(a_next);
        b = std::move(b_next);
        c = std::move(c_next);
    }
}

Mat least_squares(const Mat& phi, const Mat& y) {
    if (phi.rows() < 1 || phi.cols() < 1) {
        throw InputError("least_squares: empty regressor matrix");
    }
    if (y.rows() != phi.rows()) {
        throw InputError("least_squares: row mismatch between regressors and targets");
    }
    if (!phi.allFinite() || !y.allFinite()) {
        throw InputError("least_squares: non-finite entries");
    }
    Eigen::BDCSVD<Mat> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    return svd.solve(y);
}

Mat solve_stein(const Mat& a, const Mat& q) {
    const auto n = a.rows();
    if (n == 0) {
        return Mat(0, 0);
    }
    const auto n2 = n * n;
    Mat kron(n2, n2);
    const Mat at = a.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            kron.block(i * n, j * n, n, n) = at(i, j) * at;
        }
    }
    const Mat lhs = Mat::Identity(n2, n2) - kron;
    const Vec rhs = Eigen::Map<const Vec>(q.data(), n2);
    const Vec sol = lhs.fullPivLu().solve(rhs);
    return Eigen::Map<const Mat>(sol.data(), n, n);
}

double dare_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const Mat& x) {
    const Mat btx = b.transpose() * x;
    const Mat gain = (r + btx * b).lu().solve(btx * a);
    const Mat rhs = a.transpose() * x * a - a.transpose() * x * b * gain + q;
    return (rhs - x).norm();
}

namespace {

struct NewtonState {
    Mat gain;
    Mat closed_loop;
    bool ok = false;
};

NewtonState newton_gain(const Mat& a, const Mat& b, const Mat& r, const Mat& x) {
    NewtonState st;
    const Mat btx = b.transpose() * x;
    const Mat m = r + btx * b;
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().cwiseAbs().minCoeff() <= std::numeric_limits<double>::min()) {
        return st;
    }
    st.gain = m.partialPivLu().solve(btx * a);
    st.closed_loop = a - b * st.gain;
    st.ok = st.gain.allFinite();
    return st;
}

}  // namespace

DareSolution solve_dare_general(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                                const DareOptions& options) {
    DareSolution out;
    const auto n = a.rows();
    if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != b.cols() ||
        r.cols() != b.cols()) {
        out.failure = "dimension mismatch";
        return out;
    }
    if (!a.allFinite() || !b.allFinite() || !q.allFinite() || !r.allFinite()) {
        out.failure = "non-finite input";
        return out;
    }
    if (n == 0) {
        out.X = Mat(0, 0);
        out.ok = true;
        return out;
    }
    // R may mix tiny and huge weights (cheap control against a large gamma), so
    // invertibility is judged per eigenvalue rather than relative to the largest.
    Eigen::SelfAdjointEigenSolver<Mat> r_eig(symmetrize(r), Eigen::EigenvaluesOnly);
    if (r_eig.eigenvalues().cwiseAbs().minCoeff() <= std::numeric_limits<double>::min()) {
        out.failure = "R is singular";
        return out;
    }
    Eigen::PartialPivLU<Mat> r_lu(r);

    // Doubling: X = A' X (I + G X)^-1 A + Q with G = B R^-1 B'.
    Mat ak = a;
    Mat gk = symmetrize(b * r_lu.solve(b.transpose()));
    Mat hk = symmetrize(q);
    const Mat eye = Mat::Identity(n, n);
    bool doubled = false;
    for (int it = 0; it < options.max_doubling_iterations; ++it) {
        Eigen::PartialPivLU<Mat> w(eye + gk * hk);
        const Mat w_a = w.solve(ak);
        const Mat w_g = w.solve(gk);
        Mat h_next = symmetrize(hk + ak.transpose() * hk * w_a);
        Mat g_next = symmetrize(gk + ak * w_g * ak.transpose());
        Mat a_next = ak * w_a;
        if (!h_next.allFinite() || !g_next.allFinite() || !a_next.allFinite()) {
            break;
        }
        const double change = (h_next - hk).norm();
        hk = std::move(h_next);
        gk = std::move(g_next);
        ak = std::move(a_next);
        if (change <= options.tolerance * (1.0 + hk.norm())) {
            doubled = true;
            break;
        }
    }
    if (!hk.allFinite()) {
        out.failure = "doubling iteration diverged";
        return out;
    }

    // Newton polish; each step solves a Stein equation on the current closed loop.
    Mat x = hk;
    double best_residual = dare_residual(a, b, q, r, x);
    for (int it = 0; it < options.max_newton_iterations; ++it) {
        if (best_residual <= 1e-13 * (1.0 + x.norm())) {
            break;
        }
        const auto st = newton_gain(a, b, r, x);
        if (!st.ok || spectral_radius(st.closed_loop) >= 1.0) {
            break;
        }
        Mat x_next = symmetrize(solve_stein(st.closed_loop, q + st.gain.transpose() * r * st.gain));
        if (!x_next.allFinite()) {
            break;
        }
        const double res = dare_residual(a, b, q, r, x_next);
        if (!(res < best_residual)) {
            break;
        }
        best_residual = res;
        x = std::move(x_next);
    }

    const auto st = newton_gain(a, b, r, x);
    if (!st.ok) {
        out.failure = "R + B'XB is singular at the solution";
        return out;
    }
    out.X = x;
    out.residual = best_residual;
    out.closed_loop_radius = spectral_radius(st.closed_loop);
    if (!(best_residual < 1e-8 * (1.0 + x.norm()))) {
        out.failure = doubled ? "residual too large after refinement" : "doubling did not converge";
        return out;
    }
    if (!(out.closed_loop_radius < 1.0)) {
        out.failure = "solution is not stabilizing";
        return out;
    }
    out.ok = true;
    return out;
}

Mat solve_dare(const Mat& a, const Mat& b, const Mat& q, const Mat& r) {
    if ((q - q.transpose()).norm() > 1e-10 * (1.0 + q.norm())) {
        throw InputError("solve_dare: Q must be symmetric");
    }
    Eigen::LLT<Mat> r_chol(symmetrize(r));
    if (r_chol.info() != Eigen::Success || (r - r.transpose()).norm() > 1e-10 * (1.0 + r.norm())) {
        throw InputError("solve_dare: R must be symmetric positive definite");
    }
    auto sol = solve_dare_general(a, b, q, r);
    if (!sol.ok) {
        throw SynthesisInfeasible("solve_dare: no stabilizing solution (" + sol.failure + ")");
    }
    return sol.X;
}

}  // namespace occball
