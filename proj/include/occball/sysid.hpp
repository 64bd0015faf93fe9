#pragma once

// System identification from cartpole data: random-excitation data
// collection, ARX least squares, Ho-Kalman realization of the ARX predictor,
// and a full-state least-squares baseline.

#include <cstdint>
#include <vector>

#include "occball/linalg.hpp"
#include "occball/plant.hpp"

namespace occball {

struct CollectionConfig {
    double input_amplitude = 10.0;   // u ~ U[-a, a]
    double init_halfwidth = 0.05;
    double h_excursion = 0.6;        // |h - h(0)| limit, m
    double theta_limit_deg = 15.0;
    int max_length = 100000;         // guard; open-loop escape happens long before
};

/// `n_trajectories` open-loop runs under i.i.d. uniform forcing. Trajectory i
/// draws from substreams indexed by i, so datasets with fewer trajectories are
/// prefixes of larger ones.
[[nodiscard]] std::vector<Trajectory> collect_sysid_data(const PhysicalParams& params, const SensorSpec& sensor,
                                                         int n_trajectories, std::uint64_t seed,
                                                         const CollectionConfig& config = {});

/// Collects trajectories until the total sample count reaches `budget`,
/// truncating the last trajectory so that the sum is exactly `budget`.
[[nodiscard]] std::vector<Trajectory> collect_sysid_budget(const PhysicalParams& params, const SensorSpec& sensor,
                                                           long budget, std::uint64_t seed,
                                                           const CollectionConfig& config = {});

[[nodiscard]] long total_samples(const std::vector<Trajectory>& data);

/// z(t) ~ [z(t-1) u(t-1) ... z(t-p) u(t-p)] G.
struct ArxModel {
    Vec coefficients;  // 2p entries
    int order = 0;

    /// Coefficient on z(t - lag), lag in 1..p.
    [[nodiscard]] double output_coefficient(int lag) const { return coefficients(2 * (lag - 1)); }
    /// Coefficient on u(t - lag).
    [[nodiscard]] double input_coefficient(int lag) const { return coefficients(2 * (lag - 1) + 1); }
    [[nodiscard]] double predict(const std::vector<double>& z, const std::vector<double>& u, std::size_t t) const;
};

[[nodiscard]] ArxModel fit_arx(const std::vector<Trajectory>& data, int order);

/// Observer-form realization (A - L C, [B L], C) recovered from the ARX predictor.
struct HoKalmanResult {
    Mat A_hat;
    Mat B_hat;
    Mat C_hat;
    Mat L_hat;
    Vec singular_values;
    int order = 0;
    bool rank_deficient = false;
    double observer_radius = 0.0;   // spectral radius of A_hat - L_hat C_hat
    bool observer_unstable = false;

    /// (A_hat, B_hat, C_hat, 0).
    [[nodiscard]] StateSpaceModel model(double dt) const;
};

/// Hankel layout (p rows, 2p columns; MATLAB 1-based G(k) -> zero-based g[k-1]):
///
///   row i, column pair j (0-based) holds the observer Markov pair
///   [C At^k B, C At^k L] with k = p - 1 - j + i, or zeros when k >= p
///   (stability truncation C At^p B ~ 0).
///
/// The pair for power k is read from the ARX lag k + 1:
///   C At^k B = g[2k + 1]  (input coefficient)
///   C At^k L = g[2k]      (output coefficient)
///
/// H = (U S^1/2)(:, 1:n) (S^1/2 V')(1:n, :) = Ot Ct; C_hat = Ot(1, :),
/// B_hat = Ct(:, 2p-1), L_hat = Ct(:, 2p), At solves Ot(1:p-1, :) At = Ot(2:p, :),
/// and A_hat = At + L_hat C_hat.
[[nodiscard]] HoKalmanResult ho_kalman(const ArxModel& arx, int n);

/// Builds the Hankel matrix described above.
[[nodiscard]] Mat ho_kalman_hankel(const ArxModel& arx);

namespace detail {
/// Realization step given an SVD of the Hankel matrix; exposed so tests can
/// feed sign-flipped factors.
[[nodiscard]] HoKalmanResult realize_from_svd(const Mat& u, const Vec& sigma, const Mat& v, int p, int n);
}  // namespace detail

/// Regression x(t+1) ~ A x(t) + B u(t) with C = [1 0 l0 0], D = 0.
[[nodiscard]] StateSpaceModel fit_full_state(const std::vector<Trajectory>& data, double fixation, double dt);

/// ARX then Ho-Kalman.
[[nodiscard]] StateSpaceModel identify_arxhk(const std::vector<Trajectory>& data, int p, int n, double dt,
                                             HoKalmanResult* details = nullptr);

}  // namespace occball
