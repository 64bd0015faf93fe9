#include "occball/sysid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SVD>

namespace occball {

namespace {

Trajectory collect_one(const PhysicalParams& params, const SensorSpec& sensor, std::uint64_t seed, int index,
                       const CollectionConfig& config) {
    auto init_rng = make_rng(seed, "sysid/init", static_cast<std::uint64_t>(index));
    auto input_rng = make_rng(seed, "sysid/input", static_cast<std::uint64_t>(index));
    auto noise_rng = make_rng(seed, sensor.rng_stream, static_cast<std::uint64_t>(index));
    std::uniform_real_distribution<double> init(-config.init_halfwidth, config.init_halfwidth);
    std::uniform_real_distribution<double> force(-config.input_amplitude, config.input_amplitude);
    const double theta_limit = config.theta_limit_deg * std::numbers::pi / 180.0;

    SimState s{init(init_rng), init(init_rng), init(init_rng), init(init_rng)};
    const double h0 = s.h;
    Trajectory traj;
    for (int t = 0; t < config.max_length; ++t) {
        const double y = observe(params, s, sensor, noise_rng);
        const double u = force(input_rng);
        traj.states.push_back(s);
        traj.y.push_back(y);
        traj.u.push_back(u);
        s = step(params, s, u);
        if (std::abs(s.h - h0) > config.h_excursion || std::abs(s.theta) > theta_limit) {
            break;
        }
    }
    return traj;
}

}  // namespace

std::vector<Trajectory> collect_sysid_data(const PhysicalParams& params, const SensorSpec& sensor,
                                           int n_trajectories, std::uint64_t seed, const CollectionConfig& config) {
    params.validate();
    if (n_trajectories < 1) {
        throw InputError("collect_sysid_data: need at least one trajectory");
    }
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(n_trajectories));
    for (int i = 0; i < n_trajectories; ++i) {
        out.push_back(collect_one(params, sensor, seed, i, config));
    }
    return out;
}

std::vector<Trajectory> collect_sysid_budget(const PhysicalParams& params, const SensorSpec& sensor, long budget,
                                             std::uint64_t seed, const CollectionConfig& config) {
    params.validate();
    if (budget < 1) {
        throw InputError("collect_sysid_budget: budget must be positive");
    }
    std::vector<Trajectory> out;
    long total = 0;
    for (int i = 0; total < budget; ++i) {
        auto traj = collect_one(params, sensor, seed, i, config);
        const long remaining = budget - total;
        if (static_cast<long>(traj.size()) > remaining) {
            const auto keep = static_cast<std::size_t>(remaining);
            traj.y.resize(keep);
            traj.u.resize(keep);
            traj.states.resize(keep);
        }
        total += static_cast<long>(traj.size());
        out.push_back(std::move(traj));
    }
    return out;
}

long total_samples(const std::vector<Trajectory>& data) {
    long n = 0;
    for (const auto& t : data) {
        n += static_cast<long>(t.size());
    }
    return n;
}

double ArxModel::predict(const std::vector<double>& z, const std::vector<double>& u, std::size_t t) const {
    double out = 0.0;
    for (int lag = 1; lag <= order; ++lag) {
        const std::size_t k = t - static_cast<std::size_t>(lag);
        out += output_coefficient(lag) * z[k] + input_coefficient(lag) * u[k];
    }
    return out;
}

ArxModel fit_arx(const std::vector<Trajectory>& data, int order) {
    if (order < 1) {
        throw InputError("fit_arx: order p must be at least 1");
    }
    const auto p = static_cast<std::size_t>(order);
    long rows = 0;
    for (const auto& traj : data) {
        traj.validate();
        if (traj.size() > p) {
            rows += static_cast<long>(traj.size() - p);
        }
    }
    const long required = 2L * order;
    if (rows < required) {
        throw InsufficientData("fit_arx: need at least " + std::to_string(required) + " regression rows, have " +
                                   std::to_string(rows),
                               required, rows);
    }
    Mat phi(rows, 2 * order);
    Mat target(rows, 1);
    Eigen::Index r = 0;
    for (const auto& traj : data) {
        for (std::size_t t = p; t < traj.size(); ++t, ++r) {
            for (std::size_t lag = 1; lag <= p; ++lag) {
                phi(r, static_cast<Eigen::Index>(2 * (lag - 1))) = traj.y[t - lag];
                phi(r, static_cast<Eigen::Index>(2 * (lag - 1) + 1)) = traj.u[t - lag];
            }
            target(r, 0) = traj.y[t];
        }
    }
    ArxModel model;
    model.order = order;
    model.coefficients = least_squares(phi, target).col(0);
    return model;
}

Mat ho_kalman_hankel(const ArxModel& arx) {
    const int p = arx.order;
    if (p < 1 || arx.coefficients.size() != 2 * p) {
        throw InputError("ho_kalman: ARX model must have 2p coefficients");
    }
    Mat h = Mat::Zero(p, 2 * p);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            const int power = p - 1 - j + i;
            if (power > p - 1) {
                continue;
            }
            h(i, 2 * j) = arx.input_coefficient(power + 1);       // C At^power B
            h(i, 2 * j + 1) = arx.output_coefficient(power + 1);  // C At^power L
        }
    }
    return h;
}

namespace detail {

HoKalmanResult realize_from_svd(const Mat& u, const Vec& sigma, const Mat& v, int p, int n) {
    HoKalmanResult out;
    out.order = n;
    out.singular_values = sigma;
    const double s0 = sigma.size() > 0 ? sigma(0) : 0.0;
    int significant = 0;
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
        if (s0 > 0.0 && sigma(k) > 1e-10 * s0) {
            ++significant;
        }
    }
    out.rank_deficient = significant < n;

    const Vec root = sigma.head(n).cwiseSqrt();
    const Mat obs = u.leftCols(n) * root.asDiagonal();                  // p x n
    const Mat ctrb = root.asDiagonal() * v.leftCols(n).transpose();     // n x 2p
    out.C_hat = obs.topRows(1);
    out.B_hat = ctrb.col(2 * p - 2);
    out.L_hat = ctrb.col(2 * p - 1);
    Mat a_tilde = Mat::Zero(n, n);
    if (s0 > 0.0) {
        a_tilde = least_squares(obs.topRows(p - 1), obs.bottomRows(p - 1));
    }
    out.A_hat = a_tilde + out.L_hat * out.C_hat;
    out.observer_radius = spectral_radius(a_tilde);
    out.observer_unstable = out.observer_radius >= 1.0;
    return out;
}

}  // namespace detail

HoKalmanResult ho_kalman(const ArxModel& arx, int n) {
    const int p = arx.order;
    if (n < 1 || n > p) {
        throw InputError("ho_kalman: need 1 <= n <= p");
    }
    if (p < 2) {
        throw InputError("ho_kalman: the shift equation needs p >= 2");
    }
    const Mat h = ho_kalman_hankel(arx);
    Eigen::JacobiSVD<Mat> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return detail::realize_from_svd(svd.matrixU(), svd.singularValues(), svd.matrixV(), p, n);
}

StateSpaceModel HoKalmanResult::model(double dt) const {
    return StateSpaceModel(A_hat, B_hat, C_hat, Mat::Zero(1, 1), dt);
}

StateSpaceModel fit_full_state(const std::vector<Trajectory>& data, double fixation, double dt) {
    long rows = 0;
    for (const auto& traj : data) {
        traj.validate();
        if (!traj.has_states()) {
            throw InputError("fit_full_state: trajectories must carry full-state records");
        }
        rows += static_cast<long>(traj.size()) - 1;
    }
    constexpr long required = 5;
    if (rows < required) {
        throw InsufficientData("fit_full_state: need at least 5 transitions, have " + std::to_string(rows), required,
                               rows);
    }
    Mat phi(rows, 5);
    Mat target(rows, 4);
    Eigen::Index r = 0;
    for (const auto& traj : data) {
        for (std::size_t t = 0; t + 1 < traj.size(); ++t, ++r) {
            phi.row(r).head(4) = traj.states[t].to_vec().transpose();
            phi(r, 4) = traj.u[t];
            target.row(r) = traj.states[t + 1].to_vec().transpose();
        }
    }
    const Mat g = least_squares(phi, target).transpose();  // 4 x 5
    Mat c(1, 4);
    c << 1.0, 0.0, fixation, 0.0;
    return StateSpaceModel(g.leftCols(4), g.rightCols(1), c, Mat::Zero(1, 1), dt);
}

StateSpaceModel identify_arxhk(const std::vector<Trajectory>& data, int p, int n, double dt,
                               HoKalmanResult* details) {
    const auto arx = fit_arx(data, p);
    auto hk = ho_kalman(arx, n);
    auto model = hk.model(dt);
    if (details != nullptr) {
        *details = std::move(hk);
    }
    return model;
}

}  // namespace occball
