#include "drrl/environments.hpp"

#include <cmath>
#include <sstream>

#include "drrl/errors.hpp"
#include "drrl/robust_eval.hpp"

namespace drrl {

Eigen::VectorXd sign_action(int index, int n) {
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a(i) = ((index >> i) & 1) ? 1.0 : -1.0;
    return a;
}

int sign_action_index(const Eigen::VectorXd& signs) {
    int index = 0;
    for (int i = 0; i < signs.size(); ++i)
        if (signs(i) > 0) index |= 1 << i;
    return index;
}

// --- five-state ------------------------------------------------------------

Eigen::Vector4d uniform_xi(double l1_norm) { return Eigen::Vector4d::Constant(l1_norm / 4.0); }

void check_five_state_params(const FiveStateParams& params) {
    auto fail = [](const std::string& what) { throw ValidationError("five-state params: " + what); };
    if (!(params.p > 0.0 && params.p < 1.0)) fail("p must lie in (0, 1)");
    if (!(params.delta_env > 0.0 && params.delta_env < 1.0)) fail("delta_env must lie in (0, 1)");
    if (!(params.q >= 0.0 && params.q <= 1.0)) fail("q must lie in [0, 1]");
    if (!(params.rho_14 >= 0.0 && params.rho_14 <= 1.0)) fail("rho_14 must lie in [0, 1]");
    const double l1 = params.xi.cwiseAbs().sum();
    if (!(params.delta_env + l1 < 1.0)) fail("delta_env + ||xi||_1 must be below 1");
    for (int idx = 0; idx < 16; ++idx) {
        const double o = params.xi.dot(sign_action(idx, 4));
        const double up = params.delta_env + o;
        if (up < 0.0 || up > 1.0) {
            std::ostringstream msg;
            msg << "delta_env + <xi, a> = " << up << " leaves [0, 1] for action " << idx;
            fail(msg.str());
        }
    }
}

namespace {

LinearDrmdpSpec five_state_skeleton(const FiveStateParams& params) {
    constexpr int S = 5, A = 16, H = 3, d = 5;
    auto spec = make_empty_spec(S, A, H, d);
    spec.initial_state = 0;
    spec.fail_state = 3;
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(d, S);
    mu(0, 1) = 1.0;  // -> x2
    mu(1, 2) = 1.0;  // -> x3
    mu(2, 3) = 1.0;  // -> x4
    mu(3, 4) = 1.0;  // -> x5
    mu(4, 4) = 1.0;  // x5 stays
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    theta(4) = 1.0;
    for (int h = 0; h < H; ++h) {
        spec.factors[h] = mu;
        spec.reward_params[h] = theta;
    }
    spec.rho(0, 3) = params.rho_14;

    for (int idx = 0; idx < A; ++idx) {
        const double o = params.xi.dot(sign_action(idx, 4));
        const double up = params.delta_env + o;
        const double e = 1.0 - up;
        Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(d);
        f << (1 - params.p) * e, 0, params.p * e, up, 0;
        spec.features.row(spec.sa_index(0, idx)) = f;
        f << 0, (1 - params.p) * e, params.p * e, up, 0;
        spec.features.row(spec.sa_index(1, idx)) = f;
        f << 0, 0, e, up, 0;
        spec.features.row(spec.sa_index(2, idx)) = f;
        f << 0, 0, 1, 0, 0;
        spec.features.row(spec.sa_index(3, idx)) = f;
        f << 0, 0, 0, 0, 1;
        spec.features.row(spec.sa_index(4, idx)) = f;
    }
    return spec;
}

} // namespace

std::pair<LinearDrmdpSpec, LinearDrmdpSpec> build_five_state_env(const FiveStateParams& params) {
    check_five_state_params(params);
    LinearDrmdpSpec source = five_state_skeleton(params);
    LinearDrmdpSpec target = source;
    for (int idx = 0; idx < 16; ++idx) {
        const double up = params.delta_env + params.xi.dot(sign_action(idx, 4));
        Eigen::RowVectorXd f(5);
        f << 1.0 - up, 0, params.q * up, (1 - params.q) * up, 0;
        target.features.row(target.sa_index(0, idx)) = f;
    }
    require_valid(source);
    require_valid(target);
    return {std::move(source), std::move(target)};
}

// --- hard instance -----------------------------------------------------------

double hard_instance_delta(const HardInstanceParams& params) { return 1.0 / params.horizon; }

double hard_instance_Delta(const HardInstanceParams& params) {
    return std::sqrt(hard_instance_delta(params) / params.episodes) / (4.0 * std::sqrt(2.0));
}

Eigen::MatrixXi random_xi_signs(int horizon, int d, Rng& rng) {
    Eigen::MatrixXi signs(horizon - 1, d);
    for (int h = 0; h < horizon - 1; ++h)
        for (int i = 0; i < d; ++i) signs(h, i) = (rng.next_u64() >> 63) ? 1 : -1;
    return signs;
}

LinearDrmdpSpec build_hard_instance(const HardInstanceParams& params) {
    const int d = params.d;
    const int H = params.horizon;
    if (d < 1) throw ValidationError("hard instance: d must be positive");
    if (H < 6) throw ValidationError("hard instance: horizon must be at least 6");
    if (params.episodes < 9.0 * d * d * H / 32.0) throw ValidationError("hard instance: K must be at least 9 d^2 H / 32");
    if (!(params.rho > 0.0 && params.rho <= 0.75)) throw ValidationError("hard instance: rho must lie in (0, 3/4]");
    if (params.xi_signs.rows() != H - 1 || params.xi_signs.cols() != d)
        throw ValidationError("hard instance: xi_signs must be (H-1) x d");

    const double delta = hard_instance_delta(params);
    const double Delta = hard_instance_Delta(params);
    const int S = H + 1;
    const int A = 1 << d;
    const int D = 2 * d + 2;
    const int fail = H - 1;    // x_H
    const int reward_state = H; // x_{H+1}

    auto spec = make_empty_spec(S, A, H, D);
    spec.initial_state = 0;
    spec.fail_state = fail;
    spec.rho.setConstant(params.rho);

    Eigen::VectorXd theta = Eigen::VectorXd::Ones(D);
    theta(d) = -1.0;
    theta(D - 1) = 0.0;

    for (int h = 0; h < H; ++h) {
        Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(D, S);
        const int cont = std::min(h + 1, H - 1);
        for (int i = 0; i <= d; ++i) mu(i, cont) = 1.0;
        for (int i = d + 1; i <= 2 * d; ++i) mu(i, reward_state) = 1.0;
        mu(D - 1, fail) = 1.0;
        spec.factors[h] = mu;
        spec.reward_params[h] = theta;
    }

    for (int a = 0; a < A; ++a) {
        const Eigen::VectorXd signs = sign_action(a, d);
        for (int j = 0; j < H - 1; ++j) {
            Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(D);
            for (int i = 0; i < d; ++i) {
                const double xa = params.xi_signs(j, i) * Delta * signs(i);
                f(i) = 1.0 / (2.0 * d) - delta / d - xa;
                f(d + 1 + i) = delta / d + xa;
            }
            f(d) = 0.5;
            spec.features.row(spec.sa_index(j, a)) = f;
        }
        Eigen::RowVectorXd f_fail = Eigen::RowVectorXd::Zero(D);
        f_fail(D - 1) = 1.0;
        spec.features.row(spec.sa_index(fail, a)) = f_fail;
        Eigen::RowVectorXd f_reward = Eigen::RowVectorXd::Zero(D);
        for (int i = 0; i < d; ++i) f_reward(d + 1 + i) = 1.0 / d;
        spec.features.row(spec.sa_index(reward_state, a)) = f_reward;
    }
    require_valid(spec);
    return spec;
}

double hard_instance_optimal_value(const HardInstanceParams& params) {
    const int H = params.horizon;
    const double delta = hard_instance_delta(params);
    const double step = params.d * hard_instance_Delta(params) + delta;
    const double keep = 1.0 - params.rho;
    double total = 0.0;
    double survive = 1.0;  // prod_{j<h} (1 - d Delta - delta)
    for (int h = 1; h <= H - 1; ++h) {
        double discount = 0.0;
        for (int i = h; i <= H - 1; ++i) discount += std::pow(keep, i);
        total += discount * step * survive;
        survive *= 1.0 - step;
    }
    return total;
}

// --- support shift -------------------------------------------------------------

std::pair<LinearDrmdpSpec, LinearDrmdpSpec> build_support_shift_pair(double p, double q, double rho, int horizon) {
    if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0)) throw ValidationError("support shift: p, q must lie in [0, 1]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("support shift: rho must lie in [0, 1]");
    auto make = [&](double index) {
        auto spec = make_empty_spec(2, 2, horizon, 5);
        spec.initial_state = 0;
        spec.rho.setConstant(rho);
        Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(5, 2);
        mu(0, 0) = mu(1, 0) = mu(2, 0) = 1.0;
        mu(3, 1) = mu(4, 1) = 1.0;
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(5);
        theta(0) = 1.0;
        for (int h = 0; h < horizon; ++h) {
            spec.factors[h] = mu;
            spec.reward_params[h] = theta;
        }
        Eigen::RowVectorXd good = Eigen::RowVectorXd::Zero(5);
        good(0) = 1.0;
        spec.features.row(spec.sa_index(0, 0)) = good;
        spec.features.row(spec.sa_index(0, 1)) = good;
        Eigen::RowVectorXd bad0(5), bad1(5);
        bad0 << 0, p * (1 - index), q * index, (1 - p) * (1 - index), (1 - q) * index;
        bad1 << 0, p * index, q * (1 - index), (1 - p) * index, (1 - q) * (1 - index);
        spec.features.row(spec.sa_index(1, 0)) = bad0;
        spec.features.row(spec.sa_index(1, 1)) = bad1;
        require_valid(spec);
        return spec;
    };
    return {make(0.0), make(1.0)};
}

// --- target evaluation ---------------------------------------------------------

TargetEvaluation evaluate_on_target(const Policy& policy, const LinearDrmdpSpec& target, int n_episodes, Rng& rng) {
    TargetEvaluation out;
    out.exact = evaluate_policy_nominal(target, policy)(0, target.initial_state);
    if (n_episodes <= 0) return out;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int n = 0; n < n_episodes; ++n) {
        const double g = trajectory_return(rollout(target, policy, rng));
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / n_episodes;
    out.mc_mean = mean;
    if (n_episodes > 1) {
        const double var = std::max(0.0, (sum_sq - n_episodes * mean * mean) / (n_episodes - 1));
        out.mc_stderr = std::sqrt(var / n_episodes);
    }
    return out;
}

} // namespace drrl
