#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "occball/errors.hpp"
#include "occball/harness.hpp"
#include "occball/io.hpp"
#include "occball/sysid.hpp"

using namespace occball;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("occball_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentSpec small_spec(const fs::path& out) {
    ExperimentSpec s;
    s.fixations = {1.0, 0.8};
    s.tiers = {SensorTier::noise_free};
    s.method = Method::hinf_fullstate;
    s.budgets = {1000};
    s.n_eval_episodes = 3;
    s.n_repeats = 2;
    s.seed = 12;
    s.angle_tol_deg = 0.5;
    s.output_dir = out.string();
    return s;
}

}  // namespace

TEST_CASE("quartiles") {
    const auto q = quartiles({4.0, 1.0, 3.0, 2.0});
    CHECK(q.q25 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q75 == doctest::Approx(3.25));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(quartiles({nan, 5.0, nan}).median == 5.0);
    CHECK(std::isnan(quartiles({}).median));
    CHECK(quartiles({1, 2, 3, 4, 5, 6, 7}).median == 4.0);
}

TEST_CASE("hashing and number formatting") {
    CHECK(content_hash("") == "cbf29ce484222325");
    CHECK(content_hash("a") == "af63dc4c8601ec8c");
    for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("spec json round trip") {
    auto s = small_spec("x");
    s.epsilon = 1e-4;
    s.rl_hidden_widths = std::vector<int>{32, 32};
    const auto back = ExperimentSpec::from_json(s.to_json());
    CHECK(back.to_json().dump() == s.to_json().dump());
    CHECK(back.method == Method::hinf_fullstate);
    CHECK(*back.epsilon == 1e-4);

    const auto rl = ExperimentSpec::from_json(Json{{"method", "rl"}});
    CHECK(rl.n_repeats == 5);
    CHECK(method_from_string("hinf_arxhk") == Method::hinf_arxhk);
    CHECK_THROWS_AS((void)method_from_string("pid"), InputError);
    CHECK_THROWS_AS((void)ExperimentSpec::from_json(Json{{"fixations", {1.5}}}), InputError);
    CHECK(default_epsilon(SensorTier::noise_free) == 5e-3);
    CHECK(default_epsilon(SensorTier::rgb_like) == 1e-6);
}

TEST_CASE("model and trajectory serialization") {
    const auto model = linearize(PhysicalParams::with_fixation(0.9));
    const auto back = model_from_json(to_json(model));
    CHECK(back.A == model.A);
    CHECK(back.B == model.B);
    CHECK(back.C == model.C);
    CHECK(back.dt == model.dt);
    CHECK(params_from_json(to_json(PhysicalParams::with_fixation(0.7))).fixation == 0.7);

    const auto sensor = SensorSpec::make(SensorTier::rgb_like, 0.9);
    const auto data = collect_sysid_data(PhysicalParams::with_fixation(0.9), sensor, 3, 2);
    const auto parsed = parse_trajectory_csv(trajectory_csv(data[0]));
    CHECK(parsed.y == data[0].y);
    CHECK(parsed.u == data[0].u);
    REQUIRE(parsed.states.size() == data[0].states.size());
    CHECK(parsed.states.back() == data[0].states.back());

    const auto dir = scratch("dataset");
    const auto manifest = write_dataset(dir, data, 2, PhysicalParams::with_fixation(0.9), sensor, 0);
    CHECK(manifest.files.size() == 3);
    DatasetManifest read_back;
    const auto loaded = read_dataset(dir, &read_back);
    CHECK(read_back.hash == dataset_hash(data));
    CHECK(loaded[2].y == data[2].y);
    {
        std::ofstream(dir / manifest.files[1], std::ios::app) << "0,0,0,0,0,0,0\n";
    }
    CHECK_THROWS_AS((void)read_dataset(dir), InputError);
    fs::remove_all(dir);
}

TEST_CASE("policy checkpoint round trip") {
    SacConfig config;
    config.history_len = 5;
    config.hidden_widths = {6, 3};
    config.alpha = 0.01;
    Rng rng(9);
    const auto params = PolicyParams::make(config, rng);
    const auto dir = scratch("policy");
    save_policy(dir / "ckpt", params, config);
    SacConfig loaded_config;
    const auto loaded = load_policy(dir / "ckpt", &loaded_config);
    CHECK(loaded.actor.flatten() == params.actor.flatten());
    CHECK(loaded.target2.flatten() == params.target2.flatten());
    CHECK(loaded_config.history_len == 5);
    CHECK(loaded_config.alpha == 0.01);
    CHECK(loaded_config.hidden_widths == config.hidden_widths);
    fs::remove_all(dir);
}

TEST_CASE("sweep tables are reproducible") {
    const auto a = scratch("sweep_a");
    const auto b = scratch("sweep_b");
    const auto ra = run_sweep(small_spec(a), 1);
    const auto rb = run_sweep(small_spec(b), 2);
    REQUIRE(ra.runs.size() == 4);
    CHECK(ra.cells.size() == 2);
    for (const auto& r : ra.runs) {
        CHECK(r.feasible);
        CHECK(r.dataset_hash != "-");
    }
    for (const char* name : {"runs.csv", "summary.csv", "reward_by_fixation.csv", "reward_success.csv", "max_angle_by_budget.csv"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(a / name));
        CHECK(read_text(a / name) == read_text(b / name));
    }
    CHECK(fs::exists(a / "provenance.json"));
    fs::remove_all(a);
    fs::remove_all(b);

    auto single = small_spec(scratch("sweep_c"));
    single.fixations = {1.0};
    single.n_repeats = 1;
    const auto one = run_sweep(single, 1, false);
    CHECK(one.runs.size() == 1);
    CHECK(one.cells.size() == 1);
    CHECK(one.cells[0].runs == 1);
}
