#pragma once

// Linear-systems kernel: discrete state-space models, frequency response,
// poles and transmission zeros, least squares and Riccati solvers.

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "occball/errors.hpp"

namespace occball {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using Complex = std::complex<double>;

/// Discrete LTI model x+ = A x + B u, z = C x + D u sampled every `dt` seconds.
struct StateSpaceModel {
    Mat A;
    Mat B;
    Mat C;
    Mat D;
    double dt = 0.02;

    StateSpaceModel() = default;
    /// Validates dimensions and finiteness; throws InputError.
    StateSpaceModel(Mat a, Mat b, Mat c, Mat d, double dt_seconds);

    [[nodiscard]] Eigen::Index states() const { return A.rows(); }
    [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
    [[nodiscard]] Eigen::Index outputs() const { return C.rows(); }
    [[nodiscard]] bool is_siso() const { return inputs() == 1 && outputs() == 1; }

    void validate() const;

    /// Pure feedthrough with no states.
    static StateSpaceModel gain(double d, double dt_seconds = 0.02);
};

[[nodiscard]] StateSpaceModel scale_output(const StateSpaceModel& model, double factor);

/// Poles and finite zeros with a unit-circle classification.
struct PoleZeroSet {
    enum class Region { stable, marginal, unstable };

    std::vector<Complex> poles;
    std::vector<Complex> zeros;
    double unit_circle_tol = 1e-7;

    [[nodiscard]] Region classify(Complex value) const;
    [[nodiscard]] std::vector<Complex> poles_in(Region region) const;
    [[nodiscard]] std::vector<Complex> zeros_in(Region region) const;
};

[[nodiscard]] PoleZeroSet pole_zero_set(const StateSpaceModel& model, double unit_circle_tol = 1e-7);

/// C (zeta I - A)^-1 B + D. Throws NearPoleError when zeta I - A is numerically singular.
[[nodiscard]] CMat tf_eval(const StateSpaceModel& model, Complex zeta);
/// Scalar convenience wrapper for SISO models.
[[nodiscard]] Complex tf_eval_siso(const StateSpaceModel& model, Complex zeta);

/// Eigenvalues of A, sorted by descending real part then descending imaginary part.
[[nodiscard]] std::vector<Complex> poles(const StateSpaceModel& model);
[[nodiscard]] std::vector<Complex> eigenvalues(const Mat& a);
[[nodiscard]] double spectral_radius(const Mat& a);

/// Finite transmission zeros of a SISO model.
///
/// The system pencil [[A - zI, B], [C, D]] is deflated one infinite zero at a
/// time: while the feedthrough vanishes, an orthogonal change of state basis
/// aligns B with the last coordinate, which factors the pencil determinant into
/// b * det of a pencil of a smaller system with feedthrough C B / |B|. Once the
/// feedthrough d is nonzero the finite zeros are eig(A - B d^-1 C).
[[nodiscard]] std::vector<Complex> transmission_zeros(const StateSpaceModel& model);

/// Minimum-norm minimizer of |Phi G - Y|_F. Singular values below
/// 1e-12 * sigma_max are treated as zero.
[[nodiscard]] Mat least_squares(const Mat& phi, const Mat& y);

/// Stabilizing solution of P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q for
/// symmetric positive definite R. Throws SynthesisInfeasible.
[[nodiscard]] Mat solve_dare(const Mat& a, const Mat& b, const Mat& q, const Mat& r);

struct DareOptions {
    int max_doubling_iterations = 80;
    int max_newton_iterations = 40;
    double tolerance = 1e-14;
};

struct DareSolution {
    Mat X;
    bool ok = false;
    double residual = 0.0;
    /// Spectral radius of A - B (R + B'XB)^-1 B'XA.
    double closed_loop_radius = 0.0;
    std::string failure;
};

/// Same equation but R only needs to be symmetric and invertible (indefinite
/// weights arise in H-infinity games). Never throws; inspect `ok`/`failure`.
///
/// A structure-preserving doubling iteration produces the starting point and
/// Newton steps (each a Stein solve) polish it to working precision.
[[nodiscard]] DareSolution solve_dare_general(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                                              const DareOptions& options = {});

[[nodiscard]] double dare_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const Mat& x);

/// X = A' X A + Q via the Kronecker form (fine for the small state dimensions used here).
[[nodiscard]] Mat solve_stein(const Mat& a, const Mat& q);

[[nodiscard]] bool all_finite(const Mat& m);

}  // namespace occball
