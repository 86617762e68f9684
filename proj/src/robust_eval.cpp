#include "drrl/robust_eval.hpp"

#include <cmath>

#include "drrl/errors.hpp"
#include "drrl/tv_dual.hpp"

namespace drrl {

namespace {

void check_policy(const LinearDrmdpSpec& spec, const Policy& policy) {
    if (static_cast<int>(policy.size()) != spec.horizon) throw InputError("policy must have one entry per stage");
    for (const auto& stage : policy) {
        if (static_cast<int>(stage.size()) != spec.n_states) throw InputError("policy must cover every state");
        for (int a : stage)
            if (a < 0 || a >= spec.n_actions) throw InputError("policy action out of range");
    }
}

} // namespace

RobustSolution solve_robust_optimal(const LinearDrmdpSpec& spec) {
    const int H = spec.horizon;
    RobustSolution sol;
    sol.q_star.assign(H, Eigen::MatrixXd::Zero(spec.n_states, spec.n_actions));
    sol.v_star = Eigen::MatrixXd::Zero(H + 1, spec.n_states);
    sol.pi_star.assign(H, std::vector<int>(spec.n_states, 0));

    for (int h = H - 1; h >= 0; --h) {
        const Eigen::VectorXd v_next = sol.v_star.row(h + 1).transpose();
        const Eigen::VectorXd u = robust_factor_values(spec, h, v_next);
        for (int s = 0; s < spec.n_states; ++s) {
            int best_a = 0;
            for (int a = 0; a < spec.n_actions; ++a) {
                const auto phi = spec.phi(s, a);
                const double q = phi.dot(spec.reward_params[h]) + phi.dot(u);
                sol.q_star[h](s, a) = q;
                if (q > sol.q_star[h](s, best_a)) best_a = a;
            }
            sol.pi_star[h][s] = best_a;
            sol.v_star(h, s) = sol.q_star[h](s, best_a);
        }
    }
    return sol;
}

Eigen::MatrixXd evaluate_policy_robust(const LinearDrmdpSpec& spec, const Policy& policy) {
    check_policy(spec, policy);
    const int H = spec.horizon;
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(H + 1, spec.n_states);
    for (int h = H - 1; h >= 0; --h) {
        const Eigen::VectorXd u = robust_factor_values(spec, h, v.row(h + 1).transpose());
        for (int s = 0; s < spec.n_states; ++s) {
            const auto phi = spec.phi(s, policy[h][s]);
            v(h, s) = phi.dot(spec.reward_params[h]) + phi.dot(u);
        }
    }
    return v;
}

Eigen::MatrixXd evaluate_policy_nominal(const LinearDrmdpSpec& spec, const Policy& policy) {
    check_policy(spec, policy);
    const int H = spec.horizon;
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(H + 1, spec.n_states);
    for (int h = H - 1; h >= 0; --h) {
        const Eigen::VectorXd u = spec.factors[h] * v.row(h + 1).transpose();
        for (int s = 0; s < spec.n_states; ++s) {
            const auto phi = spec.phi(s, policy[h][s]);
            v(h, s) = phi.dot(spec.reward_params[h]) + phi.dot(u);
        }
    }
    return v;
}

Eigen::MatrixXd worst_case_kernel(const LinearDrmdpSpec& spec, int h, const Eigen::VectorXd& v_next) {
    if (h < 0 || h >= spec.horizon) throw InputError("stage out of range");
    if (v_next.size() != spec.n_states) throw InputError("value vector must have one entry per state");
    Eigen::MatrixXd worst(spec.dim, spec.n_states);
    FiniteDistribution dist;
    dist.values.assign(v_next.data(), v_next.data() + v_next.size());
    dist.probs.resize(spec.n_states);
    for (int i = 0; i < spec.dim; ++i) {
        for (int s = 0; s < spec.n_states; ++s) dist.probs[s] = spec.factors[h](i, s);
        const auto sol = tv_robust_expectation_primal(dist, spec.rho(h, i));
        for (int s = 0; s < spec.n_states; ++s) worst(i, s) = sol.worst.probs[s];
    }
    return worst;
}

double average_suboptimality(const LinearDrmdpSpec& spec, const RobustSolution& solution,
                             const std::vector<Policy>& executed_policies) {
    if (executed_policies.empty()) throw InputError("at least one episode required");
    const int s1 = spec.initial_state;
    double total = 0.0;
    for (const auto& pi : executed_policies)
        total += solution.v_star(0, s1) - evaluate_policy_robust(spec, pi)(0, s1);
    return total / static_cast<double>(executed_policies.size());
}

double average_suboptimality(const LinearDrmdpSpec& spec, const std::vector<Policy>& executed_policies) {
    return average_suboptimality(spec, solve_robust_optimal(spec), executed_policies);
}

double range_shrinkage_bound(double rho, int horizon, int h) {
    if (!(rho > 0.0 && rho <= 1.0)) throw InputError("range shrinkage needs rho in (0, 1]");
    return (1.0 - std::pow(1.0 - rho, horizon - h)) / rho;
}

std::vector<bool> check_range_shrinkage(const Eigen::MatrixXd& values, double rho, int horizon) {
    std::vector<bool> ok(horizon);
    for (int h = 0; h < horizon; ++h) {
        const double range = values.row(h).maxCoeff() - values.row(h).minCoeff();
        ok[h] = range <= range_shrinkage_bound(rho, horizon, h) + 1e-9;
    }
    return ok;
}

} // namespace drrl
