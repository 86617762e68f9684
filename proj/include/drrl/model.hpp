#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drrl/rng.hpp"

namespace drrl {

/// Tolerances used when checking the simplex structure of a model.
inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kNegativeTol = 1e-12;

/**
 * A finite d-rectangular linear DRMDP.
 *
 * Stages are 0-based throughout the library: stage h in [0, horizon) has
 * horizon - h steps remaining (including itself). The nominal kernel at stage
 * h is P_h(.|s,a) = sum_i phi_i(s,a) * factors[h].row(i) and the reward is
 * <phi(s,a), reward_params[h]>.
 *
 * The struct is a plain value; call validate_spec() (or require_valid()) before
 * handing it to any algorithm.
 */
struct LinearDrmdpSpec {
    int n_states = 0;
    int n_actions = 0;
    int horizon = 0;
    int dim = 0;

    /// Row s * n_actions + a holds phi(s, a).
    Eigen::MatrixXd features;
    /// One dim x n_states matrix per stage; row i is the factor measure mu_{h,i}.
    std::vector<Eigen::MatrixXd> factors;
    /// One dim-vector per stage.
    std::vector<Eigen::VectorXd> reward_params;
    /// horizon x dim table of uncertainty levels rho_{h,i}.
    Eigen::MatrixXd rho;
    std::optional<int> fail_state;
    int initial_state = 0;

    [[nodiscard]] auto phi(int s, int a) const { return features.row(s * n_actions + a); }
    [[nodiscard]] int sa_index(int s, int a) const { return s * n_actions + a; }
};

/// Allocates a zero-filled spec with consistent table shapes.
LinearDrmdpSpec make_empty_spec(int n_states, int n_actions, int horizon, int dim);

/// Returns a copy of the spec with every rho_{h,i} set to the given level.
LinearDrmdpSpec with_homogeneous_rho(LinearDrmdpSpec spec, double rho);

struct Violation {
    enum class Kind {
        shape,
        feature_negative,
        feature_simplex,
        factor_negative,
        factor_simplex,
        reward_norm,
        reward_range,
        rho_range,
        fail_state_reward,
        fail_state_absorbing,
        initial_state,
    };
    Kind kind;
    int stage = -1;
    int state = -1;
    int action = -1;
    int factor = -1;
    double residual = 0.0;
    std::string message;
};

std::string to_string(Violation::Kind kind);

/// Every structural violation of the spec; an empty list means the spec is valid.
std::vector<Violation> validate_spec(const LinearDrmdpSpec& spec);

/// Throws ValidationError describing the first violations when the spec is invalid.
void require_valid(const LinearDrmdpSpec& spec);

Eigen::VectorXd nominal_transition(const LinearDrmdpSpec& spec, int h, int s, int a);

double reward(const LinearDrmdpSpec& spec, int h, int s, int a);

/// Draws s' ~ P_h(.|s,a). Slightly negative mixture weights are clamped to 0.
int sample_transition(const LinearDrmdpSpec& spec, int h, int s, int a, Rng& rng);

/// Deterministic stagewise policy: actions[h][s].
using Policy = std::vector<std::vector<int>>;

struct Step {
    int stage;
    int state;
    int action;
    double reward;
    int next_state;
};

using Trajectory = std::vector<Step>;

Trajectory rollout(const LinearDrmdpSpec& spec, const Policy& policy, Rng& rng);

double trajectory_return(const Trajectory& trajectory);

} // namespace drrl
