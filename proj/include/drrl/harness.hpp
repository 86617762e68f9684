#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "drrl/environments.hpp"
#include "drrl/learners.hpp"

namespace drrl {

enum class EnvironmentKind { five_state, hard_instance, support_shift };

/// How the swept rho enters the five-state environment.
enum class RhoMode {
    /// Only the stage-0 factor 3 gets rho; every other level stays 0.
    heterogeneous,
    /// Every (stage, factor) level equals rho.
    homogeneous,
};

/// Defaults are the desk-scale preset for the five-state experiments.
struct LearnerOverrides {
    double c = 0.04;
    double delta = 0.01;
    std::optional<double> lambda;
    std::optional<double> beta;
    std::optional<double> beta_bar;
    std::optional<double> beta_tilde;
    double weight_scale = 0.001;
    int refactor_every = 64;
};

struct ExperimentConfig {
    EnvironmentKind environment = EnvironmentKind::five_state;
    RhoMode rho_mode = RhoMode::heterogeneous;

    // five-state: p, delta_env; support shift: p, horizon; hard instance: hard_d, horizon, sign_seed
    double p = 0.3;
    double delta_env = 0.3;
    int hard_d = 2;
    int horizon = 6;
    std::uint64_t sign_seed = 7;

    std::vector<Variant> variants;
    int episodes = 0;
    int replications = 10;
    std::uint64_t base_seed = 1;
    std::vector<double> rho{0.5};
    std::vector<double> xi_l1{0.3};
    std::vector<double> q{0.5};
    /// Episodes at which cumulative metrics are logged; empty means 25, 50, 100, ... up to K, plus K.
    std::vector<int> checkpoints;
    /// Monte Carlo episodes on each target in addition to the exact return.
    int target_episodes = 0;
    int threads = 1;
    std::filesystem::path output_dir = "results";
    LearnerOverrides learner;
};

ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// seed for replication r
std::uint64_t replication_seed(std::uint64_t base_seed, int replication);

std::vector<int> checkpoint_grid(const ExperimentConfig& config);

/// Source spec for one (xi, rho) cell, with the targets indexed like config.q.
struct CellEnvironment {
    LinearDrmdpSpec source;
    std::vector<LinearDrmdpSpec> targets;
    std::vector<double> target_labels;
};

CellEnvironment build_cell_environment(const ExperimentConfig& config, double xi_l1, double rho);

LearnerConfig learner_config_for(const ExperimentConfig& config, Variant variant, const LinearDrmdpSpec& spec);

struct ReplicationResult {
    int replication = 0;
    std::uint64_t seed = 0;
    RunRecord record;
    std::vector<TargetEvaluation> targets;
};

/// One learner run plus target evaluation for a single replication.
ReplicationResult run_replication(const ExperimentConfig& config, Variant variant, const CellEnvironment& env,
                                  const RobustSolution& truth, int replication);

/// One row of the aggregate table: a (variant, xi, rho, q) combination summarised across replications.
struct AggregateRow {
    std::string variant;
    double xi_l1 = 0.0;
    double rho = 0.0;
    std::optional<double> q;
    int replications = 0;
    double ave_subopt_mean = 0.0, ave_subopt_stderr = 0.0;
    double switches_mean = 0.0, switches_stderr = 0.0;
    double update_episodes_mean = 0.0, update_episodes_stderr = 0.0;
    double oracle_calls_mean = 0.0, oracle_calls_stderr = 0.0;
    double target_return_mean = 0.0, target_return_stderr = 0.0;
};

struct CheckpointRow {
    std::string variant;
    double xi_l1 = 0.0;
    double rho = 0.0;
    int k = 0;
    double ave_subopt_mean = 0.0, ave_subopt_stderr = 0.0;
    double switches_mean = 0.0, switches_stderr = 0.0;
    double oracle_calls_mean = 0.0, oracle_calls_stderr = 0.0;
};

struct CellResult {
    std::vector<AggregateRow> aggregate;
    std::vector<CheckpointRow> checkpoints;
};

/// Runs every variant and replication of one cell and writes per-run files below run_dir.
CellResult run_cell(const ExperimentConfig& config, double xi_l1, double rho, const std::filesystem::path& run_dir);

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);
void write_checkpoint_csv(const std::vector<CheckpointRow>& rows, const std::filesystem::path& path);

/// Loops over config.rho with xi = xi_l1[0]; writes aggregate.csv, checkpoints.csv and runs/.
CellResult run_experiment(const ExperimentConfig& config);

/// Loops over every (xi, rho) cell; writes cells/<cell>/{aggregate,checkpoints}.csv plus the combined
/// long-format aggregate.csv and checkpoints.csv at the top of the output directory.
CellResult sweep(const ExperimentConfig& config);

/// Reads aggregate.csv and checkpoints.csv from dir and writes plots/*.csv with columns (x, mean, stderr, series).
/// Returns the written paths.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& dir);

/// mean and standard error (sample standard deviation over sqrt(n); 0 for n < 2)
std::pair<double, double> mean_stderr(const std::vector<double>& xs);

} // namespace drrl
