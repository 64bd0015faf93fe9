// occball: command-line front end for the cartpole limits / identification /
// synthesis / SAC pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "occball/errors.hpp"
#include "occball/evaluation.hpp"
#include "occball/harness.hpp"
#include "occball/io.hpp"
#include "occball/limits.hpp"
#include "occball/plant.hpp"
#include "occball/rl.hpp"
#include "occball/synthesis.hpp"
#include "occball/sysid.hpp"

namespace fs = std::filesystem;
using namespace occball;

namespace {

Json complex_list(const std::vector<Complex>& values) {
    Json out = Json::array();
    for (const auto& v : values) {
        out.push_back(Json::array({v.real(), v.imag()}));
    }
    return out;
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

/// Controller files are either LTI JSON ({"controller": {A,B,C,D}}) or a
/// policy checkpoint stem (stem.json + stem.bin).
std::unique_ptr<Controller> load_controller(const std::string& path) {
    if (path == "zero") {
        return std::make_unique<ZeroController>();
    }
    fs::path p(path);
    if (p.extension() == ".json") {
        const auto j = Json::parse(read_text(p));
        if (j.contains("format") && j.at("format") == "occball-sac-v1") {
            p.replace_extension();
        } else {
            const auto& m = j.contains("controller") ? j.at("controller") : j;
            return std::make_unique<LtiController>(model_from_json(m));
        }
    }
    SacConfig cfg;
    auto params = load_policy(p, &cfg);
    return std::make_unique<PolicyController>(std::move(params), cfg.history_len, cfg.action_limit);
}

struct Common {
    std::uint64_t seed = 0;
    std::string out_dir = "occball_out";
    int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Base seed");
    cmd->add_option("--out-dir", c.out_dir, "Output directory");
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fundamental-limits cartpole toolkit"};
    app.require_subcommand(1);
    Common common;

    // limits ---------------------------------------------------------------
    std::vector<double> lim_fix{1.0, 0.9, 0.8, 0.7};
    auto* limits_cmd = app.add_subcommand("limits", "Poles, zeros and the lower bound on ||T||inf per fixation");
    limits_cmd->add_option("--fixation", lim_fix, "Fixation heights")->expected(1, -1);
    add_common(limits_cmd, common);

    // simulate -------------------------------------------------------------
    double sim_fix = 1.0;
    std::string sim_sensor = "true_z";
    std::string sim_controller = "zero";
    std::optional<double> sim_theta0;
    auto* sim_cmd = app.add_subcommand("simulate", "Run one episode and write the trajectory");
    sim_cmd->add_option("--fixation", sim_fix);
    sim_cmd->add_option("--sensor", sim_sensor, "true_z | depth | rgb");
    sim_cmd->add_option("--controller", sim_controller, "zero, controller JSON or policy checkpoint");
    sim_cmd->add_option("--theta0-deg", sim_theta0, "Start from this tilt with all other states zero");
    add_common(sim_cmd, common);

    // sysid ----------------------------------------------------------------
    double id_fix = 1.0;
    std::string id_sensor = "true_z";
    long id_budget = 20000;
    int id_p = 10;
    int id_n = 4;
    std::string id_method = "arxhk";
    std::string id_out;
    auto* sysid_cmd = app.add_subcommand("sysid", "Collect excitation data and identify a model");
    sysid_cmd->add_option("--fixation", id_fix);
    sysid_cmd->add_option("--sensor", id_sensor, "true_z | depth | rgb");
    sysid_cmd->add_option("--budget", id_budget, "Total samples")->check(CLI::PositiveNumber);
    sysid_cmd->add_option("--order-p", id_p, "ARX order");
    sysid_cmd->add_option("--order-n", id_n, "State dimension");
    sysid_cmd->add_option("--method", id_method)->check(CLI::IsMember({"arxhk", "fullstate"}));
    sysid_cmd->add_option("--out", id_out, "Model JSON path (default <out-dir>/model.json)");
    add_common(sysid_cmd, common);

    // synth ----------------------------------------------------------------
    std::string syn_model;
    std::optional<double> syn_eps;
    std::string syn_sensor = "true_z";
    std::string syn_out;
    double syn_gmin = 1e-2, syn_gmax = 1e6, syn_tol = 1e-3;
    auto* synth_cmd = app.add_subcommand("synth", "H-infinity synthesis on an identified model");
    synth_cmd->add_option("--model-in,--model", syn_model, "Model JSON from sysid")->required();
    synth_cmd->add_option("--epsilon", syn_eps, "Control-effort weight (default by --sensor)");
    synth_cmd->add_option("--sensor", syn_sensor, "Selects the default epsilon");
    synth_cmd->add_option("--gamma-min", syn_gmin);
    synth_cmd->add_option("--gamma-max", syn_gmax);
    synth_cmd->add_option("--gamma-tol", syn_tol);
    synth_cmd->add_option("--out", syn_out, "Controller JSON path (default <out-dir>/controller.json)");
    add_common(synth_cmd, common);

    // train-rl -------------------------------------------------------------
    double rl_fix = 1.0;
    std::string rl_sensor = "true_z";
    int rl_episodes = 2000;
    std::optional<int> rl_history;
    std::vector<int> rl_hidden;
    std::optional<int> rl_batch, rl_random, rl_after;
    auto* rl_cmd = app.add_subcommand("train-rl", "Train a SAC policy on measurement histories");
    rl_cmd->add_option("--fixation", rl_fix);
    rl_cmd->add_option("--sensor", rl_sensor);
    rl_cmd->add_option("--episodes", rl_episodes)->check(CLI::PositiveNumber);
    rl_cmd->add_option("--history", rl_history);
    rl_cmd->add_option("--hidden", rl_hidden)->expected(1, -1);
    rl_cmd->add_option("--batch", rl_batch);
    rl_cmd->add_option("--random-steps", rl_random);
    rl_cmd->add_option("--update-after", rl_after);
    add_common(rl_cmd, common);

    // eval -----------------------------------------------------------------
    std::string ev_controller;
    double ev_fix = 1.0;
    std::string ev_sensor = "true_z";
    int ev_episodes = 100;
    double ev_tol = 0.01;
    auto* eval_cmd = app.add_subcommand("eval", "Average reward, success rate and max stabilized angle");
    eval_cmd->add_option("--controller", ev_controller, "zero, controller JSON or policy checkpoint")->required();
    eval_cmd->add_option("--fixation", ev_fix);
    eval_cmd->add_option("--sensor", ev_sensor);
    eval_cmd->add_option("--episodes", ev_episodes)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--angle-tol", ev_tol);
    add_common(eval_cmd, common);

    // sweep ----------------------------------------------------------------
    std::string sw_spec;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment grid from a JSON spec");
    sweep_cmd->add_option("spec", sw_spec, "Experiment spec JSON")->required();
    add_common(sweep_cmd, common);

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path out_dir(common.out_dir);
        if (limits_cmd->parsed()) {
            Json all = Json::array();
            std::string csv = "fixation,unstable_pole,unstable_zero,bound\n";
            for (const double l0 : lim_fix) {
                const auto params = PhysicalParams::with_fixation(l0);
                const auto plant = linearize(params);
                const auto bound = pole_zero_bound(plant);
                const auto pz = pole_zero_set(plant);
                const auto up = pz.poles_in(PoleZeroSet::Region::unstable);
                const auto uz = pz.zeros_in(PoleZeroSet::Region::unstable);
                const std::string bound_text = bound.infinite ? "inf" : format_double(bound.value);
                csv += format_double(l0) + ',' + (up.empty() ? "" : format_double(up.front().real())) + ',' +
                       (uz.empty() ? "" : format_double(uz.front().real())) + ',' + bound_text + '\n';
                all.push_back(Json{{"fixation", l0},
                                   {"poles", complex_list(poles(plant))},
                                   {"zeros", complex_list(transmission_zeros(plant))},
                                   {"bound", bound.infinite ? Json("inf") : Json(bound.value)},
                                   {"vacuous", bound.vacuous}});
            }
            write_text(out_dir / "limits.csv", csv);
            write_text(out_dir / "limits.json", all.dump(2) + "\n");
            std::cout << csv;
        } else if (sim_cmd->parsed()) {
            const auto params = PhysicalParams::with_fixation(sim_fix);
            const auto sensor = SensorSpec::make(sensor_tier_from_string(sim_sensor), sim_fix);
            auto ctrl = load_controller(sim_controller);
            EpisodeConfig cfg;
            cfg.seed = common.seed;
            Episode ep;
            if (sim_theta0) {
                SimState init;
                init.theta = *sim_theta0 * 3.14159265358979323846 / 180.0;
                ep = run_episode_from(params, cfg, init, *ctrl, sensor);
            } else {
                ep = run_episode(params, cfg, *ctrl, sensor);
            }
            write_text(out_dir / "trajectory.csv", trajectory_csv(ep.trajectory));
            const Json summary{{"steps", ep.result.steps},
                               {"success", ep.result.success},
                               {"cause", to_string(ep.result.cause)},
                               {"seed", common.seed},
                               {"params", to_json(params)},
                               {"sensor", to_json(sensor)}};
            write_text(out_dir / "trajectory.json", summary.dump(2) + "\n");
            print_json(summary);
        } else if (sysid_cmd->parsed()) {
            const auto params = PhysicalParams::with_fixation(id_fix);
            const auto sensor = SensorSpec::make(sensor_tier_from_string(id_sensor), id_fix);
            const auto data = collect_sysid_budget(params, sensor, id_budget, common.seed);
            const auto manifest = write_dataset(out_dir / "dataset", data, common.seed, params, sensor, id_budget);
            Json j{{"method", id_method}, {"dataset_hash", manifest.hash}, {"fixation", id_fix},
                   {"sensor", to_string(sensor.tier)}, {"budget", id_budget}, {"seed", common.seed}};
            StateSpaceModel model;
            if (id_method == "fullstate") {
                model = fit_full_state(data, id_fix, params.tau);
            } else {
                HoKalmanResult hk;
                model = identify_arxhk(data, id_p, id_n, params.tau, &hk);
                j["order_p"] = id_p;
                j["order_n"] = id_n;
                j["singular_values"] = std::vector<double>(hk.singular_values.data(),
                                                           hk.singular_values.data() + hk.singular_values.size());
                j["observer_radius"] = hk.observer_radius;
                j["observer_unstable"] = hk.observer_unstable;
                j["rank_deficient"] = hk.rank_deficient;
                j["L_hat"] = to_json(hk.L_hat);
            }
            j["model"] = to_json(model);
            j["model_poles"] = complex_list(poles(model));
            const fs::path out = id_out.empty() ? out_dir / "model.json" : fs::path(id_out);
            write_text(out, j.dump(2) + "\n");
            std::cout << "wrote " << out.string() << " (" << data.size() << " trajectories, " << total_samples(data)
                      << " samples)\n";
        } else if (synth_cmd->parsed()) {
            const auto j = Json::parse(read_text(syn_model));
            const auto model = model_from_json(j.contains("model") ? j.at("model") : j);
            const double eps = syn_eps ? *syn_eps : default_epsilon(sensor_tier_from_string(syn_sensor));
            SynthesisOptions opts;
            opts.gamma_min = syn_gmin;
            opts.gamma_max = syn_gmax;
            opts.bisection_tol = syn_tol;
            const auto sc = hinf_synthesize(build_generalized_plant(model, eps), opts);
            if (!sc.feasible) {
                throw SynthesisInfeasible("synthesis failed: " + sc.diagnostics);
            }
            Json out{{"epsilon", eps},
                     {"gamma", sc.gamma_achieved},
                     {"closed_loop_norm", sc.closed_loop_norm},
                     {"closed_loop_radius", sc.closed_loop_radius},
                     {"bisection_steps", sc.bisection_steps},
                     {"convention", "u = K y"},
                     {"model_hash", content_hash(to_json(model).dump())},
                     {"dataset_hash", j.value("dataset_hash", std::string("-"))},
                     {"controller", to_json(sc.controller)}};
            const fs::path path = syn_out.empty() ? out_dir / "controller.json" : fs::path(syn_out);
            write_text(path, out.dump(2) + "\n");
            std::cout << "gamma " << format_double(sc.gamma_achieved) << ", wrote " << path.string() << "\n";
        } else if (rl_cmd->parsed()) {
            const auto params = PhysicalParams::with_fixation(rl_fix);
            const auto tier = sensor_tier_from_string(rl_sensor);
            const auto sensor = SensorSpec::make(tier, rl_fix);
            auto cfg = SacConfig::for_tier(tier);
            cfg.seed = common.seed;
            if (rl_history) cfg.history_len = *rl_history;
            if (!rl_hidden.empty()) cfg.hidden_widths = rl_hidden;
            if (rl_batch) cfg.batch_size = *rl_batch;
            if (rl_random) cfg.random_steps = *rl_random;
            if (rl_after) cfg.update_after = *rl_after;
            TrainOptions opts;
            opts.max_episodes = rl_episodes;
            const auto result = train(params, sensor, cfg, opts);
            write_text(out_dir / "learning_curve.csv", learning_curve_csv(result.curve));
            save_policy(out_dir / "policy", result.params, cfg);
            std::cout << "episodes " << result.curve.size() << ", stop " << result.stop_reason << ", final running "
                      << format_double(result.curve.back().running_reward) << "\n";
        } else if (eval_cmd->parsed()) {
            const auto params = PhysicalParams::with_fixation(ev_fix);
            const auto sensor = SensorSpec::make(sensor_tier_from_string(ev_sensor), ev_fix);
            auto ctrl = load_controller(ev_controller);
            const auto summary = evaluate(*ctrl, params, sensor, ev_episodes, common.seed);
            const auto angle = max_stabilized_angle(*ctrl, params, sensor, ev_tol, common.seed);
            std::string episodes = "episode,seed,steps,success,cause\n";
            for (std::size_t i = 0; i < summary.episodes.size(); ++i) {
                const auto& e = summary.episodes[i];
                episodes += std::to_string(i) + ',' + std::to_string(e.seed) + ',' + std::to_string(e.steps) + ',' +
                            (e.success ? "1" : "0") + ',' + to_string(e.cause) + '\n';
            }
            write_text(out_dir / "episodes.csv", episodes);
            Json j{{"avg_reward", summary.avg_reward},
                   {"success_rate", summary.success_rate},
                   {"max_angle_deg", angle.degrees},
                   {"non_monotone", angle.non_monotone},
                   {"episodes", ev_episodes},
                   {"seed", common.seed}};
            write_text(out_dir / "eval.json", j.dump(2) + "\n");
            print_json(j);
        } else if (sweep_cmd->parsed()) {
            auto spec = ExperimentSpec::from_json(Json::parse(read_text(sw_spec)));
            if (sweep_cmd->count("--out-dir") > 0) {
                spec.output_dir = common.out_dir;
            }
            if (sweep_cmd->count("--seed") > 0) {
                spec.seed = common.seed;
            }
            const auto result = run_sweep(spec, common.jobs);
            int failed = 0;
            for (const auto& r : result.runs) {
                failed += r.feasible ? 0 : 1;
            }
            std::cout << result.runs.size() << " runs, " << failed << " without a controller; tables in "
                      << spec.output_dir << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
