#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drrl/model.hpp"
#include "drrl/rng.hpp"

namespace drrl {

/// Action index <-> sign vector in {-1, +1}^n: bit i of the index set means a_i = +1.
Eigen::VectorXd sign_action(int index, int n);
int sign_action_index(const Eigen::VectorXd& signs);

// --- five-state source/target pair ----------------------------------------

struct FiveStateParams {
    Eigen::Vector4d xi = Eigen::Vector4d::Constant(0.3 / 4.0);
    double p = 0.3;
    double delta_env = 0.3;
    double q = 0.5;
    double rho_14 = 0.5;
};

/// xi with equal coordinates and the given l1 norm.
Eigen::Vector4d uniform_xi(double l1_norm);

/**
 * Five states x1..x5 (indices 0..4), actions {-1,1}^4, H = 3, start x1, fail
 * state x4 (index 3), x5 absorbing with reward 1, every other reward 0.
 *
 * Feature coordinates (each factor is a point mass, identical across stages):
 *   0 -> x2, 1 -> x3, 2 -> x4, 3 -> x5 (entered from x1, x2, x3), 4 -> x5 (stay).
 * With o = <xi, a> and e = 1 - delta - o:
 *   phi(x1,a) = ((1-p) e, 0, p e, delta + o, 0)
 *   phi(x2,a) = (0, (1-p) e, p e, delta + o, 0)
 *   phi(x3,a) = (0, 0, e, delta + o, 0)
 *   phi(x4,a) = (0, 0, 1, 0, 0)
 *   phi(x5,a) = (0, 0, 0, 0, 1)
 * The only nonzero uncertainty level is rho at stage 0, factor 3 (the x5 entry
 * factor, whose worst case redirects mass to the fail state). The target
 * replaces phi(x1,a) by (e, 0, q (delta + o), (1-q)(delta + o), 0).
 */
std::pair<LinearDrmdpSpec, LinearDrmdpSpec> build_five_state_env(const FiveStateParams& params);

/// Throws ValidationError when some transition label leaves [0, 1].
void check_five_state_params(const FiveStateParams& params);

// --- lower-bound family ---------------------------------------------------

struct HardInstanceParams {
    int d = 2;
    int horizon = 6;
    int episodes = 100;
    double rho = 0.5;
    /// (horizon - 1) x d table of +-1 signs of xi_{h,i}.
    Eigen::MatrixXi xi_signs;
};

double hard_instance_delta(const HardInstanceParams& params);
double hard_instance_Delta(const HardInstanceParams& params);

/// Uniformly random sign table for the given shape.
Eigen::MatrixXi random_xi_signs(int horizon, int d, Rng& rng);

/**
 * States x_1..x_{H+1} (indices 0..H), actions {-1,1}^d, feature dimension
 * 2d + 2, start x_1, fail state x_H (index H-1), homogeneous rho.
 */
LinearDrmdpSpec build_hard_instance(const HardInstanceParams& params);

/// V_1^{*,rho}(x_1) from the backward-induction closed form of the family.
double hard_instance_optimal_value(const HardInstanceParams& params);

// --- support-shift pair ---------------------------------------------------

/// Two-state (good = 0, bad = 1), two-action instances M0 and M1 starting in the good state.
std::pair<LinearDrmdpSpec, LinearDrmdpSpec> build_support_shift_pair(double p, double q, double rho,
                                                                     int horizon = 3);

// --- target evaluation ----------------------------------------------------

struct TargetEvaluation {
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    /// Exact expected return by nominal dynamic programming; the primary metric.
    double exact = 0.0;
};

TargetEvaluation evaluate_on_target(const Policy& policy, const LinearDrmdpSpec& target, int n_episodes, Rng& rng);

} // namespace drrl
