#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmips/datagen.hpp"
#include "nmips/engine.hpp"
#include "nmips/fitness.hpp"
#include "nmips/mfo.hpp"
#include "nmips/pdefam.hpp"

namespace nmips {

/// Bad configuration or command-line input (exit code 1).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    Family family = Family::Adv1D;
    std::vector<std::vector<double>> params; // empty: the family's default table
    std::size_t data_points = kDefaultDataPoints;
    std::size_t interior_points = kDefaultInterior;
    std::size_t ic_points = kDefaultIc;
    std::size_t bc_points = kDefaultBc;
    std::uint64_t data_seed = 2024;
    std::vector<std::uint64_t> seeds; // empty: NMIPS_SEED, else {1}
    std::vector<double> noise_levels = {0.0, 0.05, 0.10, 0.15};
    int head_len = 10;
    int num_adfs = 1;
    int num_adf_args = 2;
    int heldout_per_axis = 101;
    std::string output_dir = "nmips_out";
    SolverConfig solver;
    FitnessConfig fitness;

    [[nodiscard]] std::vector<std::vector<double>> task_params() const;
    /// Seeds after the NMIPS_SEED / default fallbacks.
    [[nodiscard]] std::vector<std::uint64_t> resolved_seeds() const;
    void validate() const;
};

/// Parses the JSON text; unknown keys and wrong types raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// Tasks with ICs drawn from the data seed.
std::vector<TaskSpec> build_tasks(const ExperimentConfig& cfg);
std::vector<Dataset> build_datasets(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks);
std::vector<ConditionSet> build_conditions(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks);

/// Exact structural key of a decoded expression (constant slots and ADFs
/// included), used to memoise evaluations.
std::string structure_key(const ExprTree& tree);

/// The PDE family as a multitask Problem: decode with the task's library,
/// tune constants, score. Results are memoised by expression structure.
class PdeProblem : public Problem {
public:
    PdeProblem(std::vector<TaskSpec> tasks, std::vector<Dataset> datasets, std::vector<ConditionSet> conditions,
               FitnessConfig fitness, int head_len, int num_adfs, int num_adf_args);

    [[nodiscard]] const EncodingSpec& encoding() const override { return spec_; }
    [[nodiscard]] int task_count() const override { return static_cast<int>(tasks_.size()); }
    [[nodiscard]] Evaluation evaluate(const Chromosome& chromosome, int task) const override;

    [[nodiscard]] const std::vector<TaskSpec>& tasks() const { return tasks_; }
    [[nodiscard]] std::size_t cache_hits() const;

private:
    std::vector<TaskSpec> tasks_;
    std::vector<Dataset> datasets_;
    std::vector<ConditionSet> conditions_;
    FitnessConfig fitness_;
    EncodingSpec spec_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<int, std::string>, Evaluation> cache_;
    mutable std::size_t hits_ = 0;
};

struct ResultRow {
    std::string family;
    int task_id = 0;
    std::vector<double> params;
    std::uint64_t seed = 0;
    double mse = 0.0;
    double best_cost = 0.0;
    long evals = 0;
    int generations = 0;
    double wall_s = 0.0;
    bool transfer = false;
    std::string expression;
};

std::string results_header();
std::string to_csv(const ResultRow& row);
std::vector<ResultRow> read_results(const std::filesystem::path& path);
void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path);

/// One solve per seed over all tasks; no file output.
std::vector<ResultRow> solve_runs(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks,
                                  const std::vector<Dataset>& datasets, const std::vector<SolutionGrid>& grids,
                                  bool transfer, std::ostream* log = nullptr);

std::vector<SolutionGrid> build_grids(const ExperimentConfig& cfg, const std::vector<TaskSpec>& tasks);

/// Dataset CSV per task plus manifest.json in cfg.output_dir.
std::vector<std::filesystem::path> cmd_generate(const ExperimentConfig& cfg);

/// Loads the generated datasets (checking the manifest), runs every seed,
/// writes results.csv and best-expression files.
std::vector<ResultRow> cmd_solve(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Test MSE of a fixed expression on one task (or all when task < 0).
std::vector<ResultRow> cmd_eval(const ExperimentConfig& cfg, const std::string& expression, int task = -1);

struct AblationRow {
    int task_id = 0;
    std::uint64_t seed = 0;
    double mse_with = 0.0;
    double mse_without = 0.0;
    [[nodiscard]] double delta() const { return mse_without - mse_with; }
};

struct AblationSummary {
    std::vector<AblationRow> rows;
    std::vector<double> mean_with;    // per task
    std::vector<double> mean_without; // per task
    double avg_with = 0.0;
    double avg_without = 0.0;
};

/// Matched-seed runs with and without transfer; writes ablation.csv and
/// ablation_summary.csv.
AblationSummary cmd_ablate(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct NoiseRow {
    double level = 0.0;
    double sigma = 0.0; // absolute noise standard deviation used
    ResultRow result;
};

/// cmd_solve at every noise level with shared seeds; writes noise_sweep.csv
/// and the noisy datasets.
std::vector<NoiseRow> cmd_noise_sweep(const ExperimentConfig& cfg, std::ostream* log = nullptr);

} // namespace nmips
