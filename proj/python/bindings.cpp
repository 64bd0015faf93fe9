// Python bindings for the core operations. Matrices cross as numpy arrays,
// structured results as small classes or dicts.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "occball/errors.hpp"
#include "occball/evaluation.hpp"
#include "occball/harness.hpp"
#include "occball/io.hpp"
#include "occball/limits.hpp"
#include "occball/plant.hpp"
#include "occball/rl.hpp"
#include "occball/synthesis.hpp"
#include "occball/sysid.hpp"

namespace py = pybind11;
using namespace occball;

namespace {

py::dict to_dict(const RunRecord& r) {
    py::dict d;
    d["method"] = to_string(r.method);
    d["fixation"] = r.fixation;
    d["tier"] = to_string(r.tier);
    d["budget"] = r.budget;
    d["repeat"] = r.repeat;
    d["feasible"] = r.feasible;
    d["stable_on_true"] = r.stable_on_true;
    d["gamma"] = r.gamma;
    d["hinf_T"] = r.hinf_T;
    d["bound"] = r.bound;
    d["avg_reward"] = r.avg_reward;
    d["success_rate"] = r.success_rate;
    d["max_angle"] = r.max_angle;
    d["note"] = r.note;
    return d;
}

std::unique_ptr<Controller> controller_for(const std::optional<StateSpaceModel>& model) {
    if (model) {
        return std::make_unique<LtiController>(*model);
    }
    return std::make_unique<ZeroController>();
}

}  // namespace

PYBIND11_MODULE(_occball, m) {
    m.doc() = "Fixation-point cartpole toolkit";
    m.attr("__version__") = "0.1.0";

    // Translators run newest first, so the base class goes in first.
    const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<SynthesisInfeasible>(m, "SynthesisInfeasible", base);
    py::register_exception<UnstableModel>(m, "UnstableModel", base);

    py::class_<StateSpaceModel>(m, "StateSpaceModel")
        .def(py::init<Mat, Mat, Mat, Mat, double>(), py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"),
             py::arg("dt"))
        .def_readonly("A", &StateSpaceModel::A)
        .def_readonly("B", &StateSpaceModel::B)
        .def_readonly("C", &StateSpaceModel::C)
        .def_readonly("D", &StateSpaceModel::D)
        .def_readonly("dt", &StateSpaceModel::dt)
        .def("__call__", [](const StateSpaceModel& s, Complex z) { return tf_eval(s, z); });

    py::class_<PhysicalParams>(m, "PhysicalParams")
        .def(py::init([](double fixation) { return PhysicalParams::with_fixation(fixation); }),
             py::arg("fixation") = 1.0)
        .def_readwrite("cart_mass", &PhysicalParams::cart_mass)
        .def_readwrite("pole_mass", &PhysicalParams::pole_mass)
        .def_readwrite("pole_length", &PhysicalParams::pole_length)
        .def_readwrite("gravity", &PhysicalParams::gravity)
        .def_readwrite("tau", &PhysicalParams::tau)
        .def_readwrite("fixation", &PhysicalParams::fixation);

    py::enum_<SensorTier>(m, "SensorTier")
        .value("noise_free", SensorTier::noise_free)
        .value("depth_like", SensorTier::depth_like)
        .value("rgb_like", SensorTier::rgb_like);

    py::class_<SensorSpec>(m, "SensorSpec")
        .def(py::init([](SensorTier tier, double fixation) { return SensorSpec::make(tier, fixation); }),
             py::arg("tier") = SensorTier::noise_free, py::arg("fixation") = 1.0)
        .def_readonly("noise_frac", &SensorSpec::noise_frac)
        .def_readonly("z_range", &SensorSpec::z_range)
        .def_property_readonly("sigma", &SensorSpec::sigma);

    // Plant.
    m.def("linearize", &linearize, py::arg("params"));
    m.def(
        "step",
        [](const PhysicalParams& p, const Vec& x, double u) { return step(p, SimState::from_vec(x), u).to_vec(); },
        py::arg("params"), py::arg("state"), py::arg("u"));
    m.def(
        "accelerations",
        [](const PhysicalParams& p, const Vec& x, double u) {
            const auto a = accelerations(p, SimState::from_vec(x), u);
            return py::make_tuple(a.h_ddot, a.theta_ddot);
        },
        py::arg("params"), py::arg("state"), py::arg("u"));
    m.def(
        "simulate",
        [](const PhysicalParams& p, const SensorSpec& sensor, const Vec& x0, std::optional<StateSpaceModel> controller,
           std::uint64_t seed) {
            EpisodeConfig cfg;
            cfg.seed = seed;
            auto c = controller_for(controller);
            const auto ep = run_episode_from(p, cfg, SimState::from_vec(x0), *c, sensor);
            Mat states(static_cast<Eigen::Index>(ep.trajectory.states.size()), 4);
            for (std::size_t i = 0; i < ep.trajectory.states.size(); ++i) {
                states.row(static_cast<Eigen::Index>(i)) = ep.trajectory.states[i].to_vec().transpose();
            }
            py::dict d;
            d["steps"] = ep.result.steps;
            d["success"] = ep.result.success;
            d["cause"] = to_string(ep.result.cause);
            d["y"] = ep.trajectory.y;
            d["u"] = ep.trajectory.u;
            d["states"] = states;
            return d;
        },
        py::arg("params"), py::arg("sensor"), py::arg("x0"), py::arg("controller") = py::none(),
        py::arg("seed") = 0);

    // Linear algebra and limits.
    m.def("poles", &poles, py::arg("model"));
    m.def("transmission_zeros", &transmission_zeros, py::arg("model"));
    m.def("solve_dare", &solve_dare, py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"));
    m.def("dare_residual", &dare_residual, py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"), py::arg("X"));
    m.def(
        "hinf_norm", [](const StateSpaceModel& s, int grid) { return hinf_norm(s, grid).value; }, py::arg("model"),
        py::arg("grid_size") = 4096);
    m.def(
        "limit_bound", [](const StateSpaceModel& plant) { return pole_zero_bound(plant).value; }, py::arg("plant"),
        "Lower bound on the peak complementary sensitivity from unstable poles and zeros.");
    m.def(
        "closed_loop",
        [](const StateSpaceModel& plant, const StateSpaceModel& controller) {
            const auto cl = closed_loop(plant, controller);
            return py::make_tuple(cl.S, cl.T, cl.internally_stable);
        },
        py::arg("plant"), py::arg("controller"), "Negative feedback loop; returns (S, T, internally_stable).");

    // Identification.
    m.def(
        "collect",
        [](const PhysicalParams& p, const SensorSpec& sensor, long budget, std::uint64_t seed) {
            py::list out;
            for (const auto& t : collect_sysid_budget(p, sensor, budget, seed)) {
                out.append(py::make_tuple(t.y, t.u));
            }
            return out;
        },
        py::arg("params"), py::arg("sensor"), py::arg("budget"), py::arg("seed") = 0,
        "Excitation data as a list of (y, u) pairs.");
    m.def(
        "identify",
        [](const PhysicalParams& p, const SensorSpec& sensor, long budget, std::uint64_t seed,
           const std::string& method, int order_p, int order_n) {
            const auto data = collect_sysid_budget(p, sensor, budget, seed);
            if (method == "fullstate") {
                return fit_full_state(data, p.fixation, p.tau);
            }
            if (method != "arxhk") {
                throw InputError("identify: method must be arxhk or fullstate");
            }
            return identify_arxhk(data, order_p, order_n, p.tau);
        },
        py::arg("params"), py::arg("sensor"), py::arg("budget"), py::arg("seed") = 0, py::arg("method") = "arxhk",
        py::arg("order_p") = 10, py::arg("order_n") = 4);

    // Synthesis and evaluation.
    m.def(
        "synthesize",
        [](const StateSpaceModel& model, double epsilon) {
            const auto s = hinf_synthesize(build_generalized_plant(model, epsilon));
            py::dict d;
            d["feasible"] = s.feasible;
            d["gamma"] = s.gamma_achieved;
            d["closed_loop_norm"] = s.closed_loop_norm;
            d["diagnostics"] = s.diagnostics;
            d["controller"] = s.feasible ? py::cast(s.controller) : py::none();
            return d;
        },
        py::arg("model"), py::arg("epsilon") = kEpsilonNoiseFree,
        "H-infinity synthesis; the controller maps y to u directly.");
    m.def(
        "evaluate",
        [](const StateSpaceModel& controller, const PhysicalParams& p, const SensorSpec& sensor, int episodes,
           std::uint64_t seed) {
            LtiController c(controller);
            const auto s = evaluate(c, p, sensor, episodes, seed);
            return py::make_tuple(s.avg_reward, s.success_rate);
        },
        py::arg("controller"), py::arg("params"), py::arg("sensor"), py::arg("episodes") = 100, py::arg("seed") = 0,
        "Returns (average reward, success rate).");
    m.def(
        "max_stabilized_angle",
        [](std::optional<StateSpaceModel> controller, const PhysicalParams& p, const SensorSpec& sensor,
           double tol) {
            auto c = controller_for(controller);
            return max_stabilized_angle(*c, p, sensor, tol).degrees;
        },
        py::arg("controller"), py::arg("params"), py::arg("sensor"), py::arg("tol_deg") = 0.01);

    // SAC.
    m.def("make_history_state", &make_history_state, py::arg("observations"), py::arg("history_len"));
    m.def(
        "train_sac",
        [](const PhysicalParams& p, const SensorSpec& sensor, int episodes, int history_len,
           std::vector<int> hidden, int batch, int random_steps, std::uint64_t seed) {
            auto cfg = SacConfig::for_tier(sensor.tier);
            cfg.history_len = history_len;
            cfg.hidden_widths = std::move(hidden);
            cfg.batch_size = batch;
            cfg.random_steps = random_steps;
            cfg.update_after = std::min(cfg.update_after, random_steps);
            cfg.seed = seed;
            TrainOptions opts;
            opts.max_episodes = episodes;
            py::gil_scoped_release release;
            const auto r = train(p, sensor, cfg, opts);
            py::gil_scoped_acquire acquire;
            std::vector<double> rewards;
            for (const auto& c : r.curve) {
                rewards.push_back(c.reward);
            }
            return py::make_tuple(rewards, r.stop_reason);
        },
        py::arg("params"), py::arg("sensor"), py::arg("episodes"), py::arg("history_len") = 200,
        py::arg("hidden") = std::vector<int>{256, 256}, py::arg("batch") = 256, py::arg("random_steps") = 10000,
        py::arg("seed") = 0, "Returns (episode rewards, stop reason).");

    // Harness.
    m.def(
        "run_sweep",
        [](const std::string& spec_json, int jobs, bool write_outputs) {
            const auto spec = ExperimentSpec::from_json(Json::parse(spec_json));
            SweepResult result;
            {
                py::gil_scoped_release release;
                result = run_sweep(spec, jobs, write_outputs);
            }
            py::list runs;
            for (const auto& r : result.runs) {
                runs.append(to_dict(r));
            }
            return runs;
        },
        py::arg("spec_json"), py::arg("jobs") = 1, py::arg("write_outputs") = false,
        "Runs an experiment grid from a JSON spec string; returns one dict per run.");
}
