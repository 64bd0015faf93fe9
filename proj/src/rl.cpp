#include "occball/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "occball/errors.hpp"

namespace occball {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// log(1 - tanh(u)^2) without cancellation for large |u|.
double log_one_minus_tanh2(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

double log_std_slope(double raw) {
    const double t = std::tanh(raw);
    return 0.5 * (kLogStdMax - kLogStdMin) * (1.0 - t * t);
}

Mat critic_input(const Mat& states, const Vec& actions, double action_limit) {
    Mat in(states.rows() + 1, states.cols());
    in.topRows(states.rows()) = states;
    in.row(states.rows()) = actions.transpose() / action_limit;
    return in;
}

/// Reparameterized squashed-Gaussian samples for a batch of actor outputs.
struct SquashedBatch {
    Vec mean, log_std, std, noise, pre, action, log_prob;
};

SquashedBatch squash(const Mat& actor_out, const Vec& noise, double limit) {
    SquashedBatch s;
    const auto b = actor_out.cols();
    s.mean = actor_out.row(0).transpose();
    s.log_std.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        s.log_std(i) = soft_clamp_log_std(actor_out(1, i));
    }
    s.std = s.log_std.array().exp();
    s.noise = noise;
    s.pre = s.mean.array() + s.std.array() * noise.array();
    s.action.resize(b);
    s.log_prob.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        s.action(i) = limit * std::tanh(s.pre(i));
        s.log_prob(i) = -0.5 * noise(i) * noise(i) - s.log_std(i) - kHalfLog2Pi - std::log(limit) -
                        log_one_minus_tanh2(s.pre(i));
    }
    return s;
}

}  // namespace

void SacConfig::validate() const {
    if (history_len < 1) {
        throw InputError("SacConfig: history_len must be at least 1");
    }
    if (!(tau_target > 0.0 && tau_target <= 1.0)) {
        throw InputError("SacConfig: tau_target must lie in (0, 1]");
    }
    if (!(gamma_discount > 0.0 && gamma_discount < 1.0)) {
        throw InputError("SacConfig: gamma_discount must lie in (0, 1)");
    }
    if (!(alpha > 0.0) || !(learning_rate > 0.0) || !(action_limit > 0.0)) {
        throw InputError("SacConfig: alpha, learning_rate and action_limit must be positive");
    }
    if (batch_size < 1 || buffer_capacity < 1 || updates_per_step < 0 || random_steps < 0 || update_after < 0) {
        throw InputError("SacConfig: bad buffer or schedule settings");
    }
    for (const int w : hidden_widths) {
        if (w < 1) {
            throw InputError("SacConfig: hidden widths must be positive");
        }
    }
}

SacConfig SacConfig::for_tier(SensorTier tier) {
    SacConfig c;
    c.alpha = tier == SensorTier::rgb_like ? 0.01 : 0.2;
    return c;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(int inputs, const std::vector<int>& hidden, int outputs) {
    int prev = inputs;
    for (const int w : hidden) {
        weights.push_back(Mat::Zero(w, prev));
        biases.push_back(Vec::Zero(w));
        prev = w;
    }
    weights.push_back(Mat::Zero(outputs, prev));
    biases.push_back(Vec::Zero(outputs));
}

Mat Mlp::forward(const Mat& x, Cache* cache) const {
    Mat a = x;
    if (cache != nullptr) {
        cache->activations.clear();
        cache->activations.push_back(a);
    }
    const auto layers = weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Mat z = weights[l] * a;
        z.colwise() += biases[l];
        a = l + 1 < layers ? Mat(z.array().tanh()) : z;
        if (cache != nullptr) {
            cache->activations.push_back(a);
        }
    }
    return a;
}

Mat Mlp::backward(const Cache& cache, const Mat& d_out, Mlp& grads) const {
    Mat delta = d_out;
    for (std::size_t l = weights.size(); l-- > 0;) {
        const Mat& input = cache.activations[l];
        grads.weights[l].noalias() += delta * input.transpose();
        grads.biases[l] += delta.rowwise().sum();
        Mat prev = weights[l].transpose() * delta;
        if (l > 0) {
            prev.array() *= 1.0 - input.array().square();
        }
        delta = std::move(prev);
    }
    return delta;
}

void Mlp::randomize(Rng& rng) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(weights[l].cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index j = 0; j < weights[l].cols(); ++j) {
            for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
                weights[l](i, j) = dist(rng);
            }
        }
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) {
            biases[l](i) = dist(rng);
        }
    }
}

void Mlp::set_zero() {
    for (auto& w : weights) {
        w.setZero();
    }
    for (auto& b : biases) {
        b.setZero();
    }
}

Mlp Mlp::zeros_like() const {
    Mlp out = *this;
    out.set_zero();
    return out;
}

std::vector<int> Mlp::widths() const {
    std::vector<int> out;
    if (weights.empty()) {
        return out;
    }
    out.push_back(inputs());
    for (const auto& w : weights) {
        out.push_back(static_cast<int>(w.rows()));
    }
    return out;
}

Eigen::Index Mlp::parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += weights[l].size() + biases[l].size();
    }
    return n;
}

Vec Mlp::flatten() const {
    Vec out(parameter_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        // Row-major weights, then biases, layer by layer.
        for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < weights[l].cols(); ++j) {
                out(k++) = weights[l](i, j);
            }
        }
        out.segment(k, biases[l].size()) = biases[l];
        k += biases[l].size();
    }
    return out;
}

void Mlp::unflatten(const Vec& flat) {
    if (flat.size() != parameter_count()) {
        throw InputError("Mlp::unflatten: parameter count mismatch");
    }
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < weights[l].cols(); ++j) {
                weights[l](i, j) = flat(k++);
            }
        }
        biases[l] = flat.segment(k, biases[l].size());
        k += biases[l].size();
    }
}

bool Mlp::finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) {
            return false;
        }
    }
    return true;
}

PolicyParams PolicyParams::make(const SacConfig& config, Rng& rng) {
    config.validate();
    PolicyParams p;
    p.actor = Mlp(config.history_len, config.hidden_widths, 2);
    p.critic1 = Mlp(config.history_len + 1, config.hidden_widths, 1);
    p.critic2 = p.critic1;
    p.actor.randomize(rng);
    p.critic1.randomize(rng);
    p.critic2.randomize(rng);
    p.target1 = p.critic1;
    p.target2 = p.critic2;
    return p;
}

bool PolicyParams::finite() const {
    return actor.finite() && critic1.finite() && critic2.finite() && target1.finite() && target2.finite();
}

// ---------------------------------------------------------------------------
// Policy

double soft_clamp_log_std(double raw) {
    return kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(raw) + 1.0);
}

ActionSample policy_act(const PolicyParams& params, const Vec& state, double action_limit, bool deterministic,
                        Rng* rng) {
    Vec noise = Vec::Zero(1);
    if (!deterministic) {
        if (rng == nullptr) {
            throw InputError("policy_act: stochastic mode needs an Rng");
        }
        std::normal_distribution<double> normal(0.0, 1.0);
        noise(0) = normal(*rng);
    }
    const auto s = squash(params.actor.forward(state), noise, action_limit);
    return {s.action(0), s.log_prob(0), s.pre(0)};
}

double policy_log_density(const PolicyParams& params, const Vec& state, double action, double action_limit) {
    if (!(std::abs(action) < action_limit)) {
        throw InputError("policy_log_density: action outside the open interval (-limit, limit)");
    }
    const Mat out = params.actor.forward(state);
    const double log_std = soft_clamp_log_std(out(1, 0));
    const double pre = std::atanh(action / action_limit);
    const double xi = (pre - out(0, 0)) * std::exp(-log_std);
    return -0.5 * xi * xi - log_std - kHalfLog2Pi - std::log(action_limit) - log_one_minus_tanh2(pre);
}

Vec make_history_state(const std::vector<double>& observations, int history_len) {
    if (observations.empty()) {
        throw InputError("make_history_state: no observation yet");
    }
    if (history_len < 1) {
        throw InputError("make_history_state: history_len must be at least 1");
    }
    Vec out(history_len);
    const auto n = static_cast<long>(observations.size());
    for (int k = 0; k < history_len; ++k) {
        const long idx = n - history_len + k;
        out(k) = observations[static_cast<std::size_t>(std::max(idx, 0L))];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity, int history_len) : capacity_(capacity), history_len_(history_len) {
    if (capacity < 1 || history_len < 1) {
        throw InputError("ReplayBuffer: capacity and history_len must be positive");
    }
}

void ReplayBuffer::begin_episode(double first_observation) {
    episode_start_ = log_offset_ + log_.size();
    log_.push_back(first_observation);
    open_ = true;
}

void ReplayBuffer::add(double action, double reward, double next_observation, bool done) {
    if (!open_) {
        throw InputError("ReplayBuffer::add: begin_episode first");
    }
    const std::size_t newest = log_offset_ + log_.size() - 1;
    log_.push_back(next_observation);
    const Record rec{episode_start_, newest, action, reward, done};
    if (records_.size() < capacity_) {
        records_.push_back(rec);
    } else {
        records_[cursor_] = rec;
        cursor_ = (cursor_ + 1) % capacity_;
        if (log_.size() > 4 * capacity_ + 1024) {
            compact();
        }
    }
}

void ReplayBuffer::compact() {
    std::size_t oldest = episode_start_;
    for (const auto& r : records_) {
        oldest = std::min(oldest, r.episode_start);
    }
    const std::size_t drop = oldest - log_offset_;
    log_.erase(log_.begin(), log_.begin() + static_cast<std::ptrdiff_t>(drop));
    log_offset_ = oldest;
}

Vec ReplayBuffer::history(std::size_t episode_start, std::size_t newest) const {
    Vec out(history_len_);
    for (int k = 0; k < history_len_; ++k) {
        const auto back = static_cast<std::size_t>(history_len_ - 1 - k);
        const std::size_t idx = newest >= episode_start + back ? newest - back : episode_start;
        out(k) = log_[idx - log_offset_];
    }
    return out;
}

Transition ReplayBuffer::at(std::size_t index) const {
    if (index >= records_.size()) {
        throw InputError("ReplayBuffer::at: index out of range");
    }
    const auto& r = records_[index];
    return {history(r.episode_start, r.newest), r.action, r.reward, history(r.episode_start, r.newest + 1), r.done};
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
    if (records_.empty()) {
        throw InputError("ReplayBuffer::sample: buffer is empty");
    }
    std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
    return pick(rng);
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
    if (batch_size < 1) {
        throw InputError("ReplayBuffer::sample: batch_size must be positive");
    }
    Batch b;
    b.states.resize(history_len_, batch_size);
    b.next_states.resize(history_len_, batch_size);
    b.actions.resize(batch_size);
    b.rewards.resize(batch_size);
    b.done.resize(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        const auto& r = records_[sample_index(rng)];
        b.states.col(i) = history(r.episode_start, r.newest);
        b.next_states.col(i) = history(r.episode_start, r.newest + 1);
        b.actions(i) = r.action;
        b.rewards(i) = r.reward;
        b.done(i) = r.done ? 1.0 : 0.0;
    }
    return b;
}

// ---------------------------------------------------------------------------
// Losses

UpdateNoise UpdateNoise::draw(Eigen::Index batch, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    UpdateNoise n;
    n.next.resize(batch);
    n.current.resize(batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
        n.next(i) = normal(rng);
    }
    for (Eigen::Index i = 0; i < batch; ++i) {
        n.current(i) = normal(rng);
    }
    return n;
}

Vec critic_targets(const PolicyParams& params, const Batch& batch, const Vec& noise_next, const SacConfig& config) {
    const auto next = squash(params.actor.forward(batch.next_states), noise_next, config.action_limit);
    const Mat in = critic_input(batch.next_states, next.action, config.action_limit);
    const Vec q1 = params.target1.forward(in).row(0).transpose();
    const Vec q2 = params.target2.forward(in).row(0).transpose();
    const Vec soft = q1.cwiseMin(q2) - config.alpha * next.log_prob;
    return batch.rewards.array() + config.gamma_discount * (1.0 - batch.done.array()) * soft.array();
}

LossValue critic_loss(const PolicyParams& params, const Batch& batch, const Vec& noise_next, const SacConfig& config,
                      bool with_gradient) {
    const Vec y = critic_targets(params, batch, noise_next, config);
    const Mat in = critic_input(batch.states, batch.actions, config.action_limit);
    const auto b = static_cast<double>(batch.size());
    LossValue out;
    Mlp::Cache c1, c2;
    const Vec e1 = params.critic1.forward(in, &c1).row(0).transpose() - y;
    const Vec e2 = params.critic2.forward(in, &c2).row(0).transpose() - y;
    out.loss = 0.5 * (e1.squaredNorm() + e2.squaredNorm()) / b;
    if (with_gradient) {
        out.grad1 = params.critic1.zeros_like();
        out.grad2 = params.critic2.zeros_like();
        params.critic1.backward(c1, e1.transpose() / b, out.grad1);
        params.critic2.backward(c2, e2.transpose() / b, out.grad2);
    }
    return out;
}

LossValue actor_loss(const PolicyParams& params, const Batch& batch, const Vec& noise, const SacConfig& config,
                     bool with_gradient) {
    Mlp::Cache ca;
    const Mat actor_out = params.actor.forward(batch.states, &ca);
    const auto s = squash(actor_out, noise, config.action_limit);
    const Mat in = critic_input(batch.states, s.action, config.action_limit);
    Mlp::Cache c1, c2;
    const Vec q1 = params.critic1.forward(in, &c1).row(0).transpose();
    const Vec q2 = params.critic2.forward(in, &c2).row(0).transpose();
    const auto n = batch.size();
    const auto b = static_cast<double>(n);
    LossValue out;
    out.loss = (config.alpha * s.log_prob - q1.cwiseMin(q2)).sum() / b;
    if (!with_gradient) {
        return out;
    }
    // dQ/da through whichever critic is the minimum for each sample.
    Mlp scratch1 = params.critic1.zeros_like();
    Mlp scratch2 = params.critic2.zeros_like();
    const Mat ones = Mat::Ones(1, n);
    const Mat dq1 = params.critic1.backward(c1, ones, scratch1);
    const Mat dq2 = params.critic2.backward(c2, ones, scratch2);
    const auto h = batch.states.rows();
    Mat d_out(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dq_da = (q1(i) <= q2(i) ? dq1(h, i) : dq2(h, i)) / config.action_limit;
        const double t = std::tanh(s.pre(i));
        const double g_pre = (config.alpha * 2.0 * t - dq_da * config.action_limit * (1.0 - t * t)) / b;
        const double g_log_std = g_pre * s.std(i) * s.noise(i) - config.alpha / b;
        d_out(0, i) = g_pre;
        d_out(1, i) = g_log_std * log_std_slope(actor_out(1, i));
    }
    out.grad1 = params.actor.zeros_like();
    params.actor.backward(ca, d_out, out.grad1);
    return out;
}

// ---------------------------------------------------------------------------
// Optimization

Adam::Adam(const Mlp& like, double lr, double beta1, double beta2, double eps)
    : m_(Vec::Zero(like.parameter_count())),
      v_(Vec::Zero(like.parameter_count())),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Mlp& params, const Mlp& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    Eigen::Index k = 0;
    auto apply = [&](double* p, const double* g, Eigen::Index count) {
        for (Eigen::Index i = 0; i < count; ++i, ++k) {
            m_(k) = beta1_ * m_(k) + (1.0 - beta1_) * g[i];
            v_(k) = beta2_ * v_(k) + (1.0 - beta2_) * g[i] * g[i];
            p[i] -= lr_ * (m_(k) / c1) / (std::sqrt(v_(k) / c2) + eps_);
        }
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        apply(params.weights[l].data(), grads.weights[l].data(), params.weights[l].size());
        apply(params.biases[l].data(), grads.biases[l].data(), params.biases[l].size());
    }
}

Optimizers Optimizers::make(const PolicyParams& params, double lr) {
    return {Adam(params.actor, lr), Adam(params.critic1, lr), Adam(params.critic2, lr)};
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        if (tau == 1.0) {
            target.weights[l] = online.weights[l];
            target.biases[l] = online.biases[l];
        } else {
            target.weights[l] = (1.0 - tau) * target.weights[l] + tau * online.weights[l];
            target.biases[l] = (1.0 - tau) * target.biases[l] + tau * online.biases[l];
        }
    }
}

UpdateDiagnostics sac_update(PolicyParams& params, Optimizers& optimizers, const Batch& batch,
                             const UpdateNoise& noise, const SacConfig& config) {
    if (batch.size() < 1) {
        throw InputError("sac_update: empty batch");
    }
    PolicyParams next = params;
    Optimizers opt = optimizers;
    UpdateDiagnostics diag;

    const auto cl = critic_loss(next, batch, noise.next, config);
    if (!std::isfinite(cl.loss)) {
        throw NumericalError("sac_update: non-finite critic loss");
    }
    opt.critic1.step(next.critic1, cl.grad1);
    opt.critic2.step(next.critic2, cl.grad2);
    diag.critic_loss = cl.loss;

    const auto al = actor_loss(next, batch, noise.current, config);
    if (!std::isfinite(al.loss)) {
        throw NumericalError("sac_update: non-finite actor loss");
    }
    opt.actor.step(next.actor, al.grad1);
    diag.actor_loss = al.loss;

    soft_update(next.target1, next.critic1, config.tau_target);
    soft_update(next.target2, next.critic2, config.tau_target);
    if (!next.finite()) {
        throw NumericalError("sac_update: non-finite parameters after the step");
    }
    diag.mean_log_prob =
        squash(next.actor.forward(batch.states), noise.current, config.action_limit).log_prob.mean();
    params = std::move(next);
    optimizers = std::move(opt);
    return diag;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const PhysicalParams& plant, const SensorSpec& sensor, const SacConfig& config,
                  const TrainOptions& options) {
    config.validate();
    plant.validate();
    options.episode.validate();
    if (options.max_episodes < 1 || options.running_window < 1) {
        throw InputError("train: max_episodes and running_window must be positive");
    }
    TrainResult out;
    auto init_rng = make_rng(config.seed, "sac/init");
    out.params = PolicyParams::make(config, init_rng);
    auto optimizers = Optimizers::make(out.params, config.learning_rate);
    ReplayBuffer buffer(config.buffer_capacity, config.history_len);
    auto act_rng = make_rng(config.seed, "sac/act");
    auto update_rng = make_rng(config.seed, "sac/update");
    std::uniform_real_distribution<double> explore(-config.action_limit, config.action_limit);

    std::deque<double> window;
    double window_sum = 0.0;
    double best_running = -1.0;
    int best_episode = 0;
    out.stop_reason = "max_episodes";

    for (int ep = 0; ep < options.max_episodes; ++ep) {
        EpisodeConfig cfg = options.episode;
        cfg.seed = derive_seed(config.seed, "sac/episode", static_cast<std::uint64_t>(ep));
        auto init = make_rng(cfg.seed, "episode/init");
        auto noise = make_rng(cfg.seed, sensor.rng_stream);
        SimState state = sample_initial_state(cfg, init);
        std::vector<double> seen{observe(plant, state, sensor, noise)};
        buffer.begin_episode(seen.back());

        int steps = 0;
        for (int t = 0; t < cfg.max_steps; ++t) {
            const Vec s = make_history_state(seen, config.history_len);
            const double a = out.total_steps < config.random_steps
                                 ? explore(act_rng)
                                 : policy_act(out.params, s, config.action_limit, false, &act_rng).action;
            state = step(plant, state, a + cfg.reference);
            const bool done = !state.finite() || limit_violation(cfg, state).has_value();
            if (!done) {
                ++steps;
            }
            const double y = state.finite() ? observe(plant, state, sensor, noise) : seen.back();
            seen.push_back(y);
            buffer.add(a, done ? 0.0 : 1.0, y, done);
            ++out.total_steps;

            if (buffer.size() >= static_cast<std::size_t>(std::max(config.update_after, config.batch_size))) {
                for (int k = 0; k < config.updates_per_step; ++k) {
                    const auto batch = buffer.sample(config.batch_size, update_rng);
                    const auto n = UpdateNoise::draw(batch.size(), update_rng);
                    sac_update(out.params, optimizers, batch, n, config);
                }
            }
            if (done) {
                break;
            }
        }

        window.push_back(steps);
        window_sum += steps;
        if (static_cast<int>(window.size()) > options.running_window) {
            window_sum -= window.front();
            window.pop_front();
        }
        CurvePoint pt;
        pt.episode = ep;
        pt.reward = steps;
        pt.running_reward = window_sum / static_cast<double>(window.size());
        pt.steps_cumulative = out.total_steps;
        out.curve.push_back(pt);

        const bool full = static_cast<int>(window.size()) == options.running_window;
        if (full && pt.running_reward >= options.episode.max_steps) {
            out.stop_reason = "ceiling";
            break;
        }
        if (pt.running_reward > best_running + options.plateau_min_gain) {
            best_running = pt.running_reward;
            best_episode = ep;
        } else if (full && ep - best_episode >= options.plateau_episodes) {
            out.stop_reason = "plateau";
            break;
        }
    }
    return out;
}

PolicyController::PolicyController(PolicyParams params, int history_len, double action_limit)
    : params_(std::move(params)), history_len_(history_len), action_limit_(action_limit) {
    if (history_len < 1 || params_.actor.inputs() != history_len) {
        throw InputError("PolicyController: history length does not match the actor input");
    }
}

void PolicyController::reset() { seen_.clear(); }

double PolicyController::act(double y) {
    seen_.push_back(y);
    if (static_cast<int>(seen_.size()) > 4 * history_len_) {
        seen_.erase(seen_.begin(), seen_.end() - history_len_);
    }
    return policy_act(params_, make_history_state(seen_, history_len_), action_limit_, true).action;
}

}  // namespace occball
