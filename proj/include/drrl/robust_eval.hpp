#pragma once

#include <vector>

#include <Eigen/Dense>

#include "drrl/model.hpp"

namespace drrl {

/// Exact robust optimal values of a finite spec, stage-indexed from 0.
struct RobustSolution {
    /// q_star[h] is n_states x n_actions.
    std::vector<Eigen::MatrixXd> q_star;
    /// (horizon + 1) x n_states; the last row is the terminal value 0.
    Eigen::MatrixXd v_star;
    Policy pi_star;
};

/// Backward induction with the d-rectangular robust backup; argmax ties go to the smallest action.
RobustSolution solve_robust_optimal(const LinearDrmdpSpec& spec);

/// Robust value of a deterministic stagewise policy; (horizon + 1) x n_states, last row 0.
Eigen::MatrixXd evaluate_policy_robust(const LinearDrmdpSpec& spec, const Policy& policy);

/// Expected return of a policy under the nominal kernel; (horizon + 1) x n_states, last row 0.
Eigen::MatrixXd evaluate_policy_nominal(const LinearDrmdpSpec& spec, const Policy& policy);

/// Worst-case factor measures at stage h against V_next: row i is the minimiser for factor i.
Eigen::MatrixXd worst_case_kernel(const LinearDrmdpSpec& spec, int h, const Eigen::VectorXd& v_next);

/// Mean over episodes of V*_1(s_1) - V^{pi_k}_1(s_1), both exact.
double average_suboptimality(const LinearDrmdpSpec& spec, const std::vector<Policy>& executed_policies);
double average_suboptimality(const LinearDrmdpSpec& spec, const RobustSolution& solution,
                             const std::vector<Policy>& executed_policies);

/// Per-stage check of max_s V_h - min_s V_h <= (1 - (1 - rho)^{H-h}) / rho (0-based h).
std::vector<bool> check_range_shrinkage(const Eigen::MatrixXd& values, double rho, int horizon);

/// The range bound for 0-based stage h.
double range_shrinkage_bound(double rho, int horizon, int h);

} // namespace drrl
