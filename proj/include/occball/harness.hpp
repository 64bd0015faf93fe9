#pragma once

// Experiment grid: data-budget sweeps for the identified H-infinity
// controllers and seed sweeps for SAC, with per-cell medians and quartiles.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occball/io.hpp"
#include "occball/plant.hpp"
#include "occball/rl.hpp"

namespace occball {

enum class Method { rl, hinf_arxhk, hinf_fullstate };

[[nodiscard]] std::string to_string(Method method);
[[nodiscard]] Method method_from_string(const std::string& name);

/// Control-effort weight used for each tier unless the spec overrides it.
[[nodiscard]] double default_epsilon(SensorTier tier);

struct ExperimentSpec {
    std::vector<double> fixations{1.0, 0.9, 0.8, 0.7};
    std::vector<SensorTier> tiers{SensorTier::noise_free, SensorTier::depth_like, SensorTier::rgb_like};
    Method method = Method::hinf_arxhk;
    std::vector<long> budgets{100, 1000, 5000, 10000, 15000, 20000};
    int n_eval_episodes = 100;
    int n_repeats = 7;
    std::uint64_t seed = 0;
    std::string output_dir = "sweep_out";

    int order_p = 10;
    int order_n = 4;
    std::optional<double> epsilon;  // per-tier default when unset
    double angle_tol_deg = 0.01;

    // SAC desk-scale settings; unset fields keep SacConfig defaults.
    int rl_max_episodes = 2000;
    std::optional<int> rl_history_len;
    std::optional<std::vector<int>> rl_hidden_widths;
    std::optional<int> rl_batch_size;
    std::optional<int> rl_random_steps;
    std::optional<int> rl_update_after;
    bool save_checkpoints = false;

    void validate() const;
    [[nodiscard]] static ExperimentSpec from_json(const Json& j);
    [[nodiscard]] Json to_json() const;
    [[nodiscard]] SacConfig sac_config(SensorTier tier, std::uint64_t seed) const;
};

struct RunRecord {
    Method method = Method::hinf_arxhk;
    double fixation = 1.0;
    SensorTier tier = SensorTier::noise_free;
    long budget = 0;  // 0 for RL runs
    int repeat = 0;
    std::uint64_t seed = 0;

    bool feasible = false;          // synthesis succeeded / training finished
    bool stable_on_true = false;    // internal stability with the true linearization
    double gamma = 0.0;
    double hinf_T = 0.0;            // on the true linearization; NaN when unstable
    double bound = 0.0;
    double avg_reward = 0.0;
    double success_rate = 0.0;
    double max_angle = 0.0;
    bool non_monotone = false;
    int episodes_trained = 0;
    long steps_trained = 0;
    std::string dataset_hash = "-";
    std::string controller_hash = "-";
    std::string note;

    std::vector<CurvePoint> curve;  // RL only
};

struct Quartiles {
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
};

/// Linear-interpolation quantiles; NaN entries are dropped.
[[nodiscard]] Quartiles quartiles(std::vector<double> values);

struct CellSummary {
    Method method = Method::hinf_arxhk;
    double fixation = 1.0;
    SensorTier tier = SensorTier::noise_free;
    long budget = 0;
    int runs = 0;
    int feasible = 0;
    int stable = 0;
    Quartiles reward, success, angle;
};

struct SweepResult {
    std::vector<RunRecord> runs;
    std::vector<CellSummary> cells;
};

/// One identified-model run: collect, identify, synthesize, validate, evaluate.
[[nodiscard]] RunRecord run_control(const ExperimentSpec& spec, double fixation, SensorTier tier, long budget,
                                    int repeat);
/// One SAC training run followed by evaluation of the deterministic policy.
[[nodiscard]] RunRecord run_rl(const ExperimentSpec& spec, double fixation, SensorTier tier, int repeat);

/// Runs the grid on `jobs` workers. Failures are recorded per run in `note`.
/// With `write_outputs`, tables go to spec.output_dir.
[[nodiscard]] SweepResult run_sweep(const ExperimentSpec& spec, int jobs = 1, bool write_outputs = true);

[[nodiscard]] std::vector<CellSummary> summarize_cells(const std::vector<RunRecord>& runs);

/// Writes runs.csv, summary.csv, reward_by_fixation.csv, max_angle_by_budget.csv,
/// reward_success.csv, rl_curves.csv (RL only) and provenance.json.
void write_sweep(const std::filesystem::path& dir, const ExperimentSpec& spec, const SweepResult& result);

}  // namespace occball
