#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "drrl/model.hpp"

namespace drrl {

/// Discrete distribution over real-valued support points (typically one point per state).
struct FiniteDistribution {
    std::vector<double> values;
    std::vector<double> probs;
};

/// sum_j p_j * min(v_j, alpha)
double truncated_mean(const FiniteDistribution& dist, double alpha);

struct PrimalSolution {
    double value = 0.0;
    FiniteDistribution worst;
};

/**
 * Worst-case expectation over the TV ball {mu : TV(mu, dist) <= rho}.
 *
 * Greedy transport: mass is taken from the highest-value support points (up to
 * rho in total) and placed on the lowest-value point (smallest index on ties).
 * This is the reference solver the dual forms are checked against.
 */
PrimalSolution tv_robust_expectation_primal(const FiniteDistribution& dist, double rho);

struct DualSolution {
    double value = 0.0;
    double alpha_star = 0.0;
};

enum class DualForm {
    /// max_alpha E[V]_alpha - rho * alpha; requires min value 0.
    fail_state,
    /// max_alpha E[V]_alpha - rho * (alpha - min_j min(v_j, alpha)).
    general,
};

/// Exact maximisation over alpha in [0, alpha_max] by scanning the breakpoints
/// of the piecewise-linear objective. Ties go to the smallest alpha.
DualSolution tv_robust_expectation_dual(const FiniteDistribution& dist, double rho, DualForm form,
                                        double alpha_max);

/// Samples defining g(alpha) = sum_t w_t * min(v_t, alpha) - rho * alpha.
struct DualSample {
    std::vector<double> values;
    std::vector<double> weights;
    double rho = 0.0;
    double alpha_max = 1.0;
};

/// Counts calls to the empirical dual maximisation oracle.
struct OracleCounter {
    std::size_t calls = 0;
};

/// Exact max of g over [0, alpha_max]; the empty sample yields (0, 0).
DualSolution dual_maximize_empirical(const DualSample& sample);
DualSolution dual_maximize_empirical(const DualSample& sample, OracleCounter& counter);

/**
 * inf over the d-rectangular uncertainty set of E[V_next] from (s, a) at stage h.
 *
 * Per factor i the TV-robust expectation of V_next under mu_{h,i} at level
 * rho_{h,i} is computed and mixed with weights phi_i(s, a). The fail-state dual
 * is used when the spec declares a fail state whose next value is 0, the
 * general dual otherwise.
 */
double robust_backup(const LinearDrmdpSpec& spec, int h, int s, int a, const Eigen::VectorXd& v_next);

/// Per-factor robust expectations at stage h (one entry per factor i).
Eigen::VectorXd robust_factor_values(const LinearDrmdpSpec& spec, int h, const Eigen::VectorXd& v_next);

} // namespace drrl
