#pragma once

// Central finite-difference checks for the hand-written SAC gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "occball/rl.hpp"

namespace occball::testing {

struct GradCheck {
    double worst_relative = 0.0;
    Eigen::Index checked = 0;
};

/// Relative error |g - fd| / max(|g|, |fd|, floor). The floor keeps entries
/// whose true gradient is zero from dividing rounding noise by itself.
inline GradCheck compare_gradient(Mlp net, const Mlp& analytic, const std::function<double(const Mlp&)>& loss,
                                  double step = 1e-6, double floor = 1e-5) {
    GradCheck out;
    const Vec theta = net.flatten();
    const Vec g = analytic.flatten();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Vec plus = theta;
        Vec minus = theta;
        plus(i) += step;
        minus(i) -= step;
        net.unflatten(plus);
        const double lp = loss(net);
        net.unflatten(minus);
        const double lm = loss(net);
        const double fd = (lp - lm) / (2 * step);
        const double scale = std::max({std::abs(fd), std::abs(g(i)), floor});
        out.worst_relative = std::max(out.worst_relative, std::abs(fd - g(i)) / scale);
        ++out.checked;
    }
    net.unflatten(theta);
    return out;
}

inline SacConfig tiny_config() {
    SacConfig c;
    c.history_len = 3;
    c.hidden_widths = {4, 4};
    c.batch_size = 8;
    c.action_limit = 10.0;
    return c;
}

inline Batch random_batch(const SacConfig& c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 0.3);
    std::uniform_real_distribution<double> a(-0.9 * c.action_limit, 0.9 * c.action_limit);
    std::bernoulli_distribution done(0.2);
    Batch b;
    b.states.resize(c.history_len, c.batch_size);
    b.next_states.resize(c.history_len, c.batch_size);
    b.actions.resize(c.batch_size);
    b.rewards.resize(c.batch_size);
    b.done.resize(c.batch_size);
    for (int j = 0; j < c.batch_size; ++j) {
        for (int i = 0; i < c.history_len; ++i) {
            b.states(i, j) = n(rng);
            b.next_states(i, j) = n(rng);
        }
        b.actions(j) = a(rng);
        b.rewards(j) = 1.0;
        b.done(j) = done(rng) ? 1.0 : 0.0;
    }
    return b;
}

/// Worst relative error over the critic and actor gradients for one batch.
inline double sac_gradient_error(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto config = tiny_config();
    Rng init(seed);
    const auto params = PolicyParams::make(config, init);
    const auto batch = random_batch(config, rng);
    const auto noise = UpdateNoise::draw(batch.size(), init);

    const auto critic = critic_loss(params, batch, noise.next, config);
    const auto c1 = compare_gradient(params.critic1, critic.grad1, [&](const Mlp& m) {
        auto p = params;
        p.critic1 = m;
        return critic_loss(p, batch, noise.next, config, false).loss;
    });
    const auto c2 = compare_gradient(params.critic2, critic.grad2, [&](const Mlp& m) {
        auto p = params;
        p.critic2 = m;
        return critic_loss(p, batch, noise.next, config, false).loss;
    });
    const auto actor = actor_loss(params, batch, noise.current, config);
    const auto ac = compare_gradient(params.actor, actor.grad1, [&](const Mlp& m) {
        auto p = params;
        p.actor = m;
        return actor_loss(p, batch, noise.current, config, false).loss;
    });
    return std::max({c1.worst_relative, c2.worst_relative, ac.worst_relative});
}

}  // namespace occball::testing
