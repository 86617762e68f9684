#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drrl/model.hpp"
#include "drrl/rng.hpp"
#include "drrl/robust_eval.hpp"
#include "drrl/tv_dual.hpp"

namespace drrl {

enum class Variant {
    /// Variance-weighted, rarely switching robust LSVI with optimistic and pessimistic tracks.
    we_drive_u,
    /// Unweighted robust LSVI-UCB, recomputed every episode.
    dr_lsvi_ucb,
    /// Non-robust optimistic LSVI, recomputed every episode.
    lsvi_ucb,
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct BonusWidths {
    double beta = 0.0;
    double beta_bar = 0.0;
    double beta_tilde = 0.0;
};

/**
 * Confidence widths with the logarithmic factor sqrt(log(2dKH/delta)) and a
 * shared multiplier c:
 *   beta       = c (H sqrt(d lambda) + sqrt(d))        sqrt(log(2dKH/delta))
 *   beta_bar   = c (H sqrt(d lambda) + sqrt(d^3 H^3))  sqrt(log(2dKH/delta))
 *   beta_tilde = c (H^2 sqrt(d lambda) + sqrt(d^3 H^6)) sqrt(log(2dKH/delta))
 */
BonusWidths default_betas(int d, int horizon, int episodes, double lambda, double delta, double c = 0.1);

struct LearnerConfig {
    Variant variant = Variant::we_drive_u;
    double lambda = 0.0;
    double beta = 0.0;
    double beta_bar = 0.0;
    double beta_tilde = 0.0;
    double delta = 0.01;
    /// Multiplies the d^3 H and sqrt(2 d^3 H^2) constants of the regression weights; 1 is the literal form.
    double weight_scale = 1.0;
    /// Dense refactorisation cadence for the maintained inverses and log-determinants.
    int refactor_every = 64;
};

/// lambda = 1/H^2 and widths from default_betas(c).
LearnerConfig make_default_config(Variant variant, const LinearDrmdpSpec& spec, int episodes, double c = 0.1,
                                  double delta = 0.01);

/// One observed transition at a fixed stage.
struct Sample {
    int state;
    int action;
    int next_state;
    double sigma_bar;
};

/// Regularised Gram matrix with rank-one updates, a maintained inverse and log-determinant.
class GramMatrix {
public:
    GramMatrix() = default;
    GramMatrix(int dim, double lambda, int refactor_every);

    void add(const Eigen::VectorXd& x, double weight);
    void refactor();

    [[nodiscard]] const Eigen::MatrixXd& matrix() const { return mat_; }
    [[nodiscard]] const Eigen::MatrixXd& inverse() const { return inv_; }
    [[nodiscard]] double log_det() const { return log_det_; }
    /// sqrt(x^T M^{-1} x)
    [[nodiscard]] double inv_norm(const Eigen::VectorXd& x) const;

private:
    Eigen::MatrixXd mat_;
    Eigen::MatrixXd inv_;
    double log_det_ = 0.0;
    int refactor_every_ = 64;
    int since_refactor_ = 0;
};

struct StageState {
    GramMatrix sigma;   ///< variance-weighted covariance
    GramMatrix lambda;  ///< unweighted covariance
    std::vector<Sample> dataset;
    /// Column s' accumulates phi_t / sigma_bar_t^2 over samples landing in s'.
    Eigen::MatrixXd weighted_next;
    /// Column s' accumulates phi_t over samples landing in s'.
    Eigen::MatrixXd plain_next;

    Eigen::MatrixXd q_hat;    ///< n_states x n_actions
    Eigen::MatrixXd q_check;  ///< n_states x n_actions
    Eigen::VectorXd nu_hat;
    Eigen::VectorXd nu_check;
    Eigen::VectorXd z_hat1;
    Eigen::VectorXd z_check1;
    Eigen::VectorXd z_tilde2;

    double log_det_last = -std::numeric_limits<double>::infinity();
};

struct LearnerState {
    std::vector<StageState> stages;
    /// (horizon + 1) x n_states snapshots; the last row stays 0.
    Eigen::MatrixXd v_hat;
    Eigen::MatrixXd v_check;
    Policy policy;
    bool has_policy = false;

    int episode = 0;    ///< episodes started so far (the current k)
    int k_last = 0;
    std::size_t update_episodes = 0;
    std::size_t switches = 0;
    std::size_t policy_changes = 0;
    std::size_t policy_version = 0;
    OracleCounter oracle;
};

struct VarianceEstimate {
    double sigma = 0.0;
    double sigma_bar = 0.0;
};

struct EpisodeRecord {
    int episode = 0;  ///< 1-based
    bool switched = false;
    bool policy_changed = false;
    std::size_t policy_version = 0;
    std::size_t cumulative_switches = 0;
    std::size_t cumulative_oracle_calls = 0;
    double nominal_return = 0.0;
    std::vector<int> states;        ///< s_1..s_H
    std::vector<int> actions;
    std::vector<double> sigma_bar;
    std::vector<double> v_hat_visited;
    std::vector<double> v_check_visited;
};

/**
 * Episodic learner over a finite linear DRMDP.
 *
 * The learner reads the features, reward parameters, uncertainty levels and
 * fail state of the spec; the factor measures are touched only through
 * sample_transition when acting in the environment.
 */
class Learner {
public:
    Learner(const LinearDrmdpSpec& spec, LearnerConfig config);

    /// True iff some stage's weighted covariance determinant has doubled since the last recompute
    /// (always true before the first policy exists).
    [[nodiscard]] bool should_switch() const;

    /// Backward induction producing new optimistic/pessimistic Q tables and the greedy policy.
    void recompute_policy();

    /// Unweighted ridge regressions of V_hat, V_hat^2 and V_check targets at stage h.
    void refresh_plain_regressions(int h);

    [[nodiscard]] VarianceEstimate estimate_variance(int h, int s, int a) const;

    EpisodeRecord run_episode(Rng& rng);

    [[nodiscard]] const LearnerState& state() const { return state_; }
    [[nodiscard]] const LearnerConfig& config() const { return config_; }
    [[nodiscard]] const LinearDrmdpSpec& spec() const { return *spec_; }

    /// Adds an observed transition to stage h with the given regression weight sigma_bar.
    void observe(int h, int s, int a, int next_state, double sigma_bar);

private:
    [[nodiscard]] Eigen::VectorXd phi(int s, int a) const { return spec_->phi(s, a).transpose(); }
    [[nodiscard]] const GramMatrix& regression_gram(int h) const;
    [[nodiscard]] const Eigen::MatrixXd& regression_next(int h) const;
    Eigen::VectorXd estimate_nu(int h, const Eigen::VectorXd& v_next);

    const LinearDrmdpSpec* spec_;
    LearnerConfig config_;
    LearnerState state_;
};

struct RunRecord {
    Variant variant = Variant::we_drive_u;
    std::vector<EpisodeRecord> episodes;
    /// Distinct executed policies; episodes[k].policy_version indexes this list.
    std::vector<Policy> policies;
    /// Exact robust suboptimality per episode (filled when a solution is supplied).
    std::vector<double> subopt;
    std::size_t total_switches = 0;
    std::size_t total_policy_changes = 0;
    std::size_t total_update_episodes = 0;
    std::size_t total_oracle_calls = 0;

    [[nodiscard]] double ave_subopt() const;
    /// AveSubopt over the first k episodes.
    [[nodiscard]] double ave_subopt_at(std::size_t k) const;
    [[nodiscard]] const Policy& final_policy() const { return policies.at(episodes.back().policy_version); }
};

RunRecord run(const LearnerConfig& config, const LinearDrmdpSpec& spec, int episodes, Rng& rng,
              const RobustSolution* truth = nullptr);

} // namespace drrl
