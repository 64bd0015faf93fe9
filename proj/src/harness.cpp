#include "occball/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "occball/errors.hpp"
#include "occball/evaluation.hpp"
#include "occball/sysid.hpp"

namespace fs = std::filesystem;

namespace occball {

std::string to_string(Method method) {
    switch (method) {
        case Method::rl: return "rl";
        case Method::hinf_arxhk: return "hinf_arxhk";
        case Method::hinf_fullstate: return "hinf_fullstate";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "rl") {
        return Method::rl;
    }
    if (name == "hinf_arxhk" || name == "arxhk") {
        return Method::hinf_arxhk;
    }
    if (name == "hinf_fullstate" || name == "fullstate") {
        return Method::hinf_fullstate;
    }
    throw InputError("unknown method '" + name + "'");
}

double default_epsilon(SensorTier tier) {
    return tier == SensorTier::noise_free ? kEpsilonNoiseFree : kEpsilonPerception;
}

// ---------------------------------------------------------------------------
// Spec

void ExperimentSpec::validate() const {
    const PhysicalParams nominal;
    if (fixations.empty() || tiers.empty()) {
        throw InputError("spec: fixation and tier lists must be non-empty");
    }
    for (const double l0 : fixations) {
        if (!(l0 > 0.0 && l0 <= nominal.pole_length)) {
            throw InputError("spec: fixation must lie in (0, pole_length]");
        }
    }
    if (method != Method::rl) {
        if (budgets.empty()) {
            throw InputError("spec: budgets must be non-empty");
        }
        for (const long b : budgets) {
            if (b < 1) {
                throw InputError("spec: budgets must be positive");
            }
        }
    }
    if (n_eval_episodes < 1 || n_repeats < 1) {
        throw InputError("spec: n_eval_episodes and n_repeats must be positive");
    }
    if (order_p < 2 || order_n < 1 || order_n > order_p) {
        throw InputError("spec: need 1 <= order_n <= order_p and order_p >= 2");
    }
    if (epsilon && !(*epsilon > 0.0)) {
        throw InputError("spec: epsilon must be positive");
    }
    if (!(angle_tol_deg > 0.0) || rl_max_episodes < 1) {
        throw InputError("spec: angle_tol_deg and rl_max_episodes must be positive");
    }
}

ExperimentSpec ExperimentSpec::from_json(const Json& j) {
    ExperimentSpec s;
    if (j.contains("fixations")) {
        s.fixations = j.at("fixations").get<std::vector<double>>();
    }
    if (j.contains("tiers")) {
        s.tiers.clear();
        for (const auto& t : j.at("tiers")) {
            s.tiers.push_back(sensor_tier_from_string(t.get<std::string>()));
        }
    }
    if (j.contains("method")) {
        s.method = method_from_string(j.at("method").get<std::string>());
    }
    if (j.contains("budgets")) {
        s.budgets = j.at("budgets").get<std::vector<long>>();
    }
    s.n_eval_episodes = j.value("n_eval_episodes", s.n_eval_episodes);
    s.n_repeats = j.value("n_repeats", s.method == Method::rl ? 5 : s.n_repeats);
    s.seed = j.value("seed", s.seed);
    s.output_dir = j.value("output_dir", s.output_dir);
    s.order_p = j.value("order_p", s.order_p);
    s.order_n = j.value("order_n", s.order_n);
    if (j.contains("epsilon") && !j.at("epsilon").is_null()) {
        s.epsilon = j.at("epsilon").get<double>();
    }
    s.angle_tol_deg = j.value("angle_tol_deg", s.angle_tol_deg);
    s.rl_max_episodes = j.value("rl_max_episodes", s.rl_max_episodes);
    if (j.contains("rl_history_len")) {
        s.rl_history_len = j.at("rl_history_len").get<int>();
    }
    if (j.contains("rl_hidden_widths")) {
        s.rl_hidden_widths = j.at("rl_hidden_widths").get<std::vector<int>>();
    }
    if (j.contains("rl_batch_size")) {
        s.rl_batch_size = j.at("rl_batch_size").get<int>();
    }
    if (j.contains("rl_random_steps")) {
        s.rl_random_steps = j.at("rl_random_steps").get<int>();
    }
    if (j.contains("rl_update_after")) {
        s.rl_update_after = j.at("rl_update_after").get<int>();
    }
    s.save_checkpoints = j.value("save_checkpoints", s.save_checkpoints);
    s.validate();
    return s;
}

Json ExperimentSpec::to_json() const {
    Json tiers_json = Json::array();
    for (const auto t : tiers) {
        tiers_json.push_back(to_string(t));
    }
    Json j{{"fixations", fixations},
           {"tiers", tiers_json},
           {"method", to_string(method)},
           {"budgets", budgets},
           {"n_eval_episodes", n_eval_episodes},
           {"n_repeats", n_repeats},
           {"seed", seed},
           {"output_dir", output_dir},
           {"order_p", order_p},
           {"order_n", order_n},
           {"epsilon", epsilon ? Json(*epsilon) : Json(nullptr)},
           {"angle_tol_deg", angle_tol_deg},
           {"rl_max_episodes", rl_max_episodes},
           {"save_checkpoints", save_checkpoints}};
    if (rl_history_len) {
        j["rl_history_len"] = *rl_history_len;
    }
    if (rl_hidden_widths) {
        j["rl_hidden_widths"] = *rl_hidden_widths;
    }
    if (rl_batch_size) {
        j["rl_batch_size"] = *rl_batch_size;
    }
    if (rl_random_steps) {
        j["rl_random_steps"] = *rl_random_steps;
    }
    if (rl_update_after) {
        j["rl_update_after"] = *rl_update_after;
    }
    return j;
}

SacConfig ExperimentSpec::sac_config(SensorTier tier, std::uint64_t run_seed) const {
    SacConfig c = SacConfig::for_tier(tier);
    c.seed = run_seed;
    if (rl_history_len) {
        c.history_len = *rl_history_len;
    }
    if (rl_hidden_widths) {
        c.hidden_widths = *rl_hidden_widths;
    }
    if (rl_batch_size) {
        c.batch_size = *rl_batch_size;
    }
    if (rl_random_steps) {
        c.random_steps = *rl_random_steps;
    }
    if (rl_update_after) {
        c.update_after = *rl_update_after;
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Single runs

RunRecord run_control(const ExperimentSpec& spec, double fixation, SensorTier tier, long budget, int repeat) {
    RunRecord rec;
    rec.method = spec.method;
    rec.fixation = fixation;
    rec.tier = tier;
    rec.budget = budget;
    rec.repeat = repeat;
    rec.seed = derive_seed(spec.seed, "repeat", static_cast<std::uint64_t>(repeat));
    rec.hinf_T = std::numeric_limits<double>::quiet_NaN();

    const auto params = PhysicalParams::with_fixation(fixation);
    const auto sensor = SensorSpec::make(tier, fixation);
    rec.bound = pole_zero_bound(linearize(params)).value;
    try {
        const auto data = collect_sysid_budget(params, sensor, budget, rec.seed);
        rec.dataset_hash = dataset_hash(data);
        const auto model = spec.method == Method::hinf_fullstate
                               ? fit_full_state(data, fixation, params.tau)
                               : identify_arxhk(data, spec.order_p, spec.order_n, params.tau);
        const double eps = spec.epsilon ? *spec.epsilon : default_epsilon(tier);
        const auto synth = hinf_synthesize(build_generalized_plant(model, eps));
        if (!synth.feasible) {
            rec.note = synth.diagnostics;
            return rec;
        }
        rec.feasible = true;
        rec.gamma = synth.gamma_achieved;
        rec.controller_hash = content_hash(to_json(synth.controller).dump());

        const auto report = validate_controller(synth.controller, params, sensor, spec.angle_tol_deg,
                                                derive_seed(rec.seed, "max_angle"));
        rec.stable_on_true = report.stable_on_true_plant;
        rec.hinf_T = report.hinf_T;
        rec.max_angle = report.max_angle.degrees;
        rec.non_monotone = report.max_angle.non_monotone;

        LtiController runner(synth.controller);
        const auto summary = evaluate(runner, params, sensor, spec.n_eval_episodes, derive_seed(rec.seed, "eval"));
        rec.avg_reward = summary.avg_reward;
        rec.success_rate = summary.success_rate;
    } catch (const Error& e) {
        rec.note = e.what();
    }
    return rec;
}

RunRecord run_rl(const ExperimentSpec& spec, double fixation, SensorTier tier, int repeat) {
    RunRecord rec;
    rec.method = Method::rl;
    rec.fixation = fixation;
    rec.tier = tier;
    rec.repeat = repeat;
    rec.seed = derive_seed(spec.seed, "rl", static_cast<std::uint64_t>(repeat));
    rec.hinf_T = std::numeric_limits<double>::quiet_NaN();
    rec.max_angle = std::numeric_limits<double>::quiet_NaN();

    const auto params = PhysicalParams::with_fixation(fixation);
    const auto sensor = SensorSpec::make(tier, fixation);
    rec.bound = pole_zero_bound(linearize(params)).value;
    try {
        const auto config = spec.sac_config(tier, rec.seed);
        TrainOptions opts;
        opts.max_episodes = spec.rl_max_episodes;
        auto trained = train(params, sensor, config, opts);
        rec.feasible = true;
        rec.curve = trained.curve;
        rec.episodes_trained = static_cast<int>(trained.curve.size());
        rec.steps_trained = trained.total_steps;
        rec.note = trained.stop_reason;
        const Vec flat = trained.params.actor.flatten();
        rec.controller_hash =
            content_hash(std::string(reinterpret_cast<const char*>(flat.data()),
                                     static_cast<std::size_t>(flat.size()) * sizeof(double)));
        if (spec.save_checkpoints) {
            char name[96];
            std::snprintf(name, sizeof(name), "policy_l%.2f_%s_r%d", fixation, to_string(tier).c_str(), repeat);
            save_policy(fs::path(spec.output_dir) / "checkpoints" / name, trained.params, config);
        }
        PolicyController policy(std::move(trained.params), config.history_len, config.action_limit);
        const auto summary = evaluate(policy, params, sensor, spec.n_eval_episodes, derive_seed(rec.seed, "eval"));
        rec.avg_reward = summary.avg_reward;
        rec.success_rate = summary.success_rate;
    } catch (const Error& e) {
        rec.note = e.what();
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Sweep

Quartiles quartiles(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
                 values.end());
    Quartiles q;
    if (values.empty()) {
        q.q25 = q.median = q.q75 = std::numeric_limits<double>::quiet_NaN();
        return q;
    }
    std::sort(values.begin(), values.end());
    auto at = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    q.q25 = at(0.25);
    q.median = at(0.5);
    q.q75 = at(0.75);
    return q;
}

std::vector<CellSummary> summarize_cells(const std::vector<RunRecord>& runs) {
    using Key = std::tuple<int, std::size_t, int, long>;
    std::map<Key, std::vector<const RunRecord*>> groups;
    std::vector<double> fix_order;
    for (const auto& r : runs) {
        auto it = std::find(fix_order.begin(), fix_order.end(), r.fixation);
        if (it == fix_order.end()) {
            fix_order.push_back(r.fixation);
            it = fix_order.end() - 1;
        }
        groups[{static_cast<int>(r.method), static_cast<std::size_t>(it - fix_order.begin()),
                static_cast<int>(r.tier), r.budget}]
            .push_back(&r);
    }
    std::vector<CellSummary> out;
    for (const auto& [key, members] : groups) {
        CellSummary c;
        c.method = members.front()->method;
        c.fixation = members.front()->fixation;
        c.tier = members.front()->tier;
        c.budget = members.front()->budget;
        std::vector<double> reward, success, angle;
        for (const auto* r : members) {
            ++c.runs;
            c.feasible += r->feasible ? 1 : 0;
            c.stable += r->stable_on_true ? 1 : 0;
            reward.push_back(r->avg_reward);
            success.push_back(r->success_rate);
            angle.push_back(r->max_angle);
        }
        c.reward = quartiles(reward);
        c.success = quartiles(success);
        c.angle = quartiles(angle);
        out.push_back(c);
    }
    return out;
}

SweepResult run_sweep(const ExperimentSpec& spec, int jobs, bool write_outputs) {
    spec.validate();
    struct Task {
        double fixation;
        SensorTier tier;
        long budget;
        int repeat;
    };
    std::vector<Task> tasks;
    for (const double l0 : spec.fixations) {
        for (const auto tier : spec.tiers) {
            if (spec.method == Method::rl) {
                for (int r = 0; r < spec.n_repeats; ++r) {
                    tasks.push_back({l0, tier, 0, r});
                }
                continue;
            }
            for (const long b : spec.budgets) {
                for (int r = 0; r < spec.n_repeats; ++r) {
                    tasks.push_back({l0, tier, b, r});
                }
            }
        }
    }

    SweepResult result;
    result.runs.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& t = tasks[i];
            result.runs[i] = spec.method == Method::rl ? run_rl(spec, t.fixation, t.tier, t.repeat)
                                                       : run_control(spec, t.fixation, t.tier, t.budget, t.repeat);
        }
    };
    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    result.cells = summarize_cells(result.runs);
    if (write_outputs) {
        write_sweep(spec.output_dir, spec, result);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

std::string f(double v) { return format_double(v); }

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) {
        return text;
    }
    std::string out = "\"";
    for (const char ch : text) {
        out += ch == '"' ? std::string("\"\"") : std::string(1, ch == '\n' ? ' ' : ch);
    }
    return out + "\"";
}

std::string seed_text(std::uint64_t s) { return std::to_string(s); }

}  // namespace

void write_sweep(const fs::path& dir, const ExperimentSpec& spec, const SweepResult& result) {
    fs::create_directories(dir);

    std::string runs =
        "method,fixation,tier,budget,repeat,seed,feasible,stable_on_true,gamma,hinf_T,bound,avg_reward,"
        "success_rate,max_angle_deg,non_monotone,episodes_trained,steps_trained,dataset_hash,controller_hash,note\n";
    for (const auto& r : result.runs) {
        runs += to_string(r.method) + ',' + f(r.fixation) + ',' + to_string(r.tier) + ',' + std::to_string(r.budget) +
                ',' + std::to_string(r.repeat) + ',' + seed_text(r.seed) + ',' + (r.feasible ? "1" : "0") + ',' +
                (r.stable_on_true ? "1" : "0") + ',' + f(r.gamma) + ',' + f(r.hinf_T) + ',' + f(r.bound) + ',' +
                f(r.avg_reward) + ',' + f(r.success_rate) + ',' + f(r.max_angle) + ',' +
                (r.non_monotone ? "1" : "0") + ',' + std::to_string(r.episodes_trained) + ',' +
                std::to_string(r.steps_trained) + ',' + r.dataset_hash + ',' + r.controller_hash + ',' +
                csv_field(r.note) + '\n';
    }
    write_text(dir / "runs.csv", runs);

    std::string summary =
        "method,fixation,tier,budget,runs,feasible,stable,reward_q25,reward_median,reward_q75,success_q25,"
        "success_median,success_q75,angle_q25,angle_median,angle_q75\n";
    for (const auto& c : result.cells) {
        summary += to_string(c.method) + ',' + f(c.fixation) + ',' + to_string(c.tier) + ',' +
                   std::to_string(c.budget) + ',' + std::to_string(c.runs) + ',' + std::to_string(c.feasible) + ',' +
                   std::to_string(c.stable) + ',' + f(c.reward.q25) + ',' + f(c.reward.median) + ',' +
                   f(c.reward.q75) + ',' + f(c.success.q25) + ',' + f(c.success.median) + ',' + f(c.success.q75) +
                   ',' + f(c.angle.q25) + ',' + f(c.angle.median) + ',' + f(c.angle.q75) + '\n';
    }
    write_text(dir / "summary.csv", summary);

    // Reward and success per (fixation, tier) at the largest budget.
    const long top = spec.method == Method::rl ? 0 : *std::max_element(spec.budgets.begin(), spec.budgets.end());
    std::string by_fixation = "method,fixation,tier,reward_q25,reward_median,reward_q75\n";
    std::string reward_success = "method,fixation,tier,avg_reward_median,success_rate_median\n";
    std::string by_budget = "method,fixation,tier,budget,angle_q25,angle_median,angle_q75\n";
    for (const auto& c : result.cells) {
        if (c.budget == top) {
            const auto head = to_string(c.method) + ',' + f(c.fixation) + ',' + to_string(c.tier) + ',';
            by_fixation += head + f(c.reward.q25) + ',' + f(c.reward.median) + ',' + f(c.reward.q75) + '\n';
            reward_success += head + f(c.reward.median) + ',' + f(c.success.median) + '\n';
        }
        if (c.method != Method::rl) {
            by_budget += to_string(c.method) + ',' + f(c.fixation) + ',' + to_string(c.tier) + ',' +
                    std::to_string(c.budget) + ',' + f(c.angle.q25) + ',' + f(c.angle.median) + ',' +
                    f(c.angle.q75) + '\n';
        }
    }
    write_text(dir / "reward_by_fixation.csv", by_fixation);
    write_text(dir / "reward_success.csv", reward_success);
    if (spec.method != Method::rl) {
        write_text(dir / "max_angle_by_budget.csv", by_budget);
    } else {
        std::string curves = "fixation,tier,repeat,seed,episode,reward,running_reward,steps_cumulative\n";
        for (const auto& r : result.runs) {
            const auto head =
                f(r.fixation) + ',' + to_string(r.tier) + ',' + std::to_string(r.repeat) + ',' + seed_text(r.seed) + ',';
            for (const auto& p : r.curve) {
                curves += head + std::to_string(p.episode) + ',' + f(p.reward) + ',' + f(p.running_reward) + ',' +
                          std::to_string(p.steps_cumulative) + '\n';
            }
        }
        write_text(dir / "rl_curves.csv", curves);
    }

    Json prov{{"tool", "occball"}, {"version", "0.1.0"}, {"spec", spec.to_json()}, {"runs", Json::array()}};
    for (const auto& r : result.runs) {
        prov["runs"].push_back(Json{{"fixation", r.fixation},
                                    {"tier", to_string(r.tier)},
                                    {"budget", r.budget},
                                    {"repeat", r.repeat},
                                    {"seed", r.seed},
                                    {"dataset_hash", r.dataset_hash},
                                    {"controller_hash", r.controller_hash}});
    }
    write_text(dir / "provenance.json", prov.dump(2) + "\n");
}

}  // namespace occball
