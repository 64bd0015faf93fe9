#pragma once

// Soft actor-critic over a window of past measurements. Networks are small
// dense stacks with tanh hidden units; gradients are written out by hand for
// this fixed architecture.

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "occball/controller.hpp"
#include "occball/linalg.hpp"
#include "occball/plant.hpp"
#include "occball/rng.hpp"

namespace occball {

struct SacConfig {
    int history_len = 200;
    double alpha = 0.2;
    double tau_target = 0.005;
    double gamma_discount = 0.99;
    double learning_rate = 3e-4;
    std::vector<int> hidden_widths{256, 256};
    int batch_size = 256;
    std::size_t buffer_capacity = 1'000'000;
    double action_limit = 10.0;  // N
    int updates_per_step = 1;
    int random_steps = 10'000;   // uniform actions before the policy takes over
    int update_after = 1'000;    // transitions stored before the first update
    std::uint64_t seed = 0;

    void validate() const;
    /// Entropy temperature 0.2, or 0.01 for the rgb-like tier.
    [[nodiscard]] static SacConfig for_tier(SensorTier tier);
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Dense stack: tanh on hidden layers, identity on the output layer.
/// Batches are column-major, one sample per column.
class Mlp {
public:
    Mlp() = default;
    Mlp(int inputs, const std::vector<int>& hidden, int outputs);

    struct Cache {
        std::vector<Mat> activations;  // layer inputs, then the final output
    };

    [[nodiscard]] Mat forward(const Mat& x, Cache* cache = nullptr) const;
    /// Accumulates parameter gradients into `grads` (same shape as *this) and
    /// returns dL/dx.
    Mat backward(const Cache& cache, const Mat& d_out, Mlp& grads) const;

    void randomize(Rng& rng);
    void set_zero();
    [[nodiscard]] Mlp zeros_like() const;

    [[nodiscard]] int inputs() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
    [[nodiscard]] int outputs() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
    [[nodiscard]] std::vector<int> widths() const;

    [[nodiscard]] Eigen::Index parameter_count() const;
    [[nodiscard]] Vec flatten() const;
    void unflatten(const Vec& flat);
    [[nodiscard]] bool finite() const;

    std::vector<Mat> weights;  // out x in
    std::vector<Vec> biases;
};

struct PolicyParams {
    Mlp actor;           // H -> (mean, raw log-std)
    Mlp critic1, critic2;  // (H, a / action_limit) -> Q
    Mlp target1, target2;

    [[nodiscard]] static PolicyParams make(const SacConfig& config, Rng& rng);
    [[nodiscard]] bool finite() const;
};

/// Raw actor output -> log-std in [kLogStdMin, kLogStdMax] via a scaled tanh.
[[nodiscard]] double soft_clamp_log_std(double raw);

struct ActionSample {
    double action = 0.0;
    double log_prob = 0.0;  // density of the squashed, scaled action
    double pre_squash = 0.0;
};

/// a = limit tanh(mean + std xi). With deterministic set, xi = 0.
[[nodiscard]] ActionSample policy_act(const PolicyParams& params, const Vec& state, double action_limit,
                                      bool deterministic, Rng* rng = nullptr);

/// Squashed-Gaussian log density at an action strictly inside the limits.
[[nodiscard]] double policy_log_density(const PolicyParams& params, const Vec& state, double action,
                                        double action_limit);

/// Last H entries of `observations` oldest first; missing leading entries
/// repeat the first observation.
[[nodiscard]] Vec make_history_state(const std::vector<double>& observations, int history_len);

struct Transition {
    Vec state;
    double action = 0.0;
    double reward = 0.0;
    Vec next_state;
    bool done = false;
};

struct Batch {
    Mat states;       // H x B
    Vec actions;      // B
    Vec rewards;      // B
    Mat next_states;  // H x B
    Vec done;         // B, 1 for terminal

    [[nodiscard]] Eigen::Index size() const { return actions.size(); }
};

/// Ring buffer of transitions. Histories are rebuilt from a per-episode
/// measurement log, so a stored transition costs a few words instead of 2H.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int history_len);

    void begin_episode(double first_observation);
    /// Records (current history, a, r, history after appending next_observation, done).
    void add(double action, double reward, double next_observation, bool done);

    [[nodiscard]] std::size_t size() const { return records_.size(); }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] Transition at(std::size_t index) const;
    [[nodiscard]] Batch sample(int batch_size, Rng& rng) const;
    /// Index draw used by `sample`, exposed for uniformity checks.
    [[nodiscard]] std::size_t sample_index(Rng& rng) const;

private:
    struct Record {
        std::size_t episode_start;  // index of the episode's first observation in log_
        std::size_t newest;         // index of the state's newest observation
        double action;
        double reward;
        bool done;
    };
    [[nodiscard]] Vec history(std::size_t episode_start, std::size_t newest) const;
    void compact();

    std::size_t capacity_;
    int history_len_;
    std::vector<double> log_;
    std::size_t log_offset_ = 0;  // absolute index of log_[0]
    std::vector<Record> records_;
    std::size_t cursor_ = 0;
    std::size_t episode_start_ = 0;
    bool open_ = false;
};

/// Standard normal draws used by one update: xi for a'(s') in the critic target
/// and for the reparameterized a(s) in the actor loss.
struct UpdateNoise {
    Vec next;
    Vec current;
    [[nodiscard]] static UpdateNoise draw(Eigen::Index batch, Rng& rng);
};

struct LossValue {
    double loss = 0.0;
    Mlp grad1, grad2;  // critic losses: grads of critic1 and critic2; actor loss: grad1 only
};

/// 0.5 mean((Q1 - y)^2) + 0.5 mean((Q2 - y)^2) with
/// y = r + gamma (1 - d) (min target Q(s', a') - alpha log pi(a'|s')).
[[nodiscard]] LossValue critic_loss(const PolicyParams& params, const Batch& batch, const Vec& noise_next,
                                    const SacConfig& config, bool with_gradient = true);
/// The critic regression targets y.
[[nodiscard]] Vec critic_targets(const PolicyParams& params, const Batch& batch, const Vec& noise_next,
                                 const SacConfig& config);
/// mean(alpha log pi(a|s) - min(Q1, Q2)(s, a)) with a reparameterized by `noise`.
[[nodiscard]] LossValue actor_loss(const PolicyParams& params, const Batch& batch, const Vec& noise,
                                   const SacConfig& config, bool with_gradient = true);

class Adam {
public:
    Adam() = default;
    explicit Adam(const Mlp& like, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Mlp& params, const Mlp& grads);

private:
    Vec m_, v_;
    double lr_ = 0.0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

struct Optimizers {
    Adam actor, critic1, critic2;
    [[nodiscard]] static Optimizers make(const PolicyParams& params, double lr);
};

struct UpdateDiagnostics {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double mean_log_prob = 0.0;
};

/// target <- (1 - tau) target + tau online.
void soft_update(Mlp& target, const Mlp& online, double tau);

/// One critic step, one actor step, then target smoothing. Throws
/// NumericalError when a loss or updated parameter is non-finite; `params`
/// is left unchanged in that case.
UpdateDiagnostics sac_update(PolicyParams& params, Optimizers& optimizers, const Batch& batch,
                             const UpdateNoise& noise, const SacConfig& config);

struct CurvePoint {
    int episode = 0;
    double reward = 0.0;
    double running_reward = 0.0;  // mean of the last min(100, episode + 1) rewards
    long steps_cumulative = 0;
};

struct TrainOptions {
    int max_episodes = 2000;
    int running_window = 100;
    int plateau_episodes = 500;
    double plateau_min_gain = 1.0;
    EpisodeConfig episode;
};

struct TrainResult {
    PolicyParams params;
    std::vector<CurvePoint> curve;
    std::string stop_reason;  // "ceiling", "plateau" or "max_episodes"
    long total_steps = 0;
};

[[nodiscard]] TrainResult train(const PhysicalParams& plant, const SensorSpec& sensor, const SacConfig& config,
                                const TrainOptions& options = {});

/// Deterministic policy run as a controller.
class PolicyController final : public Controller {
public:
    PolicyController(PolicyParams params, int history_len, double action_limit);
    void reset() override;
    double act(double y) override;

private:
    PolicyParams params_;
    int history_len_;
    double action_limit_;
    std::vector<double> seen_;
};

}  // namespace occball
