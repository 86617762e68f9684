#include "drrl/model.hpp"

#include <cmath>
#include <sstream>

#include "drrl/errors.hpp"

namespace drrl {

namespace {

void check_indices(const LinearDrmdpSpec& spec, int h, int s, int a) {
    if (h < 0 || h >= spec.horizon || s < 0 || s >= spec.n_states || a < 0 || a >= spec.n_actions) {
        std::ostringstream msg;
        msg << "index out of range: (h=" << h << ", s=" << s << ", a=" << a << ") for spec with H=" << spec.horizon
            << ", |S|=" << spec.n_states << ", |A|=" << spec.n_actions;
        throw InputError(msg.str());
    }
}

} // namespace

LinearDrmdpSpec make_empty_spec(int n_states, int n_actions, int horizon, int dim) {
    if (n_states <= 0 || n_actions <= 0 || horizon <= 0 || dim <= 0)
        throw InputError("spec dimensions must be positive");
    LinearDrmdpSpec spec;
    spec.n_states = n_states;
    spec.n_actions = n_actions;
    spec.horizon = horizon;
    spec.dim = dim;
    spec.features = Eigen::MatrixXd::Zero(n_states * n_actions, dim);
    spec.factors.assign(horizon, Eigen::MatrixXd::Zero(dim, n_states));
    spec.reward_params.assign(horizon, Eigen::VectorXd::Zero(dim));
    spec.rho = Eigen::MatrixXd::Zero(horizon, dim);
    return spec;
}

LinearDrmdpSpec with_homogeneous_rho(LinearDrmdpSpec spec, double rho) {
    spec.rho.setConstant(rho);
    return spec;
}

std::string to_string(Violation::Kind kind) {
    switch (kind) {
    case Violation::Kind::shape: return "shape";
    case Violation::Kind::feature_negative: return "feature_negative";
    case Violation::Kind::feature_simplex: return "feature_simplex";
    case Violation::Kind::factor_negative: return "factor_negative";
    case Violation::Kind::factor_simplex: return "factor_simplex";
    case Violation::Kind::reward_norm: return "reward_norm";
    case Violation::Kind::reward_range: return "reward_range";
    case Violation::Kind::rho_range: return "rho_range";
    case Violation::Kind::fail_state_reward: return "fail_state_reward";
    case Violation::Kind::fail_state_absorbing: return "fail_state_absorbing";
    case Violation::Kind::initial_state: return "initial_state";
    }
    return "unknown";
}

std::vector<Violation> validate_spec(const LinearDrmdpSpec& spec) {
    using K = Violation::Kind;
    std::vector<Violation> out;
    auto shape_error = [&](std::string msg) {
        out.push_back({K::shape, -1, -1, -1, -1, 0.0, std::move(msg)});
        return out;
    };

    if (spec.n_states <= 0 || spec.n_actions <= 0 || spec.horizon <= 0 || spec.dim <= 0)
        return shape_error("dimensions must be positive");
    if (spec.features.rows() != spec.n_states * spec.n_actions || spec.features.cols() != spec.dim)
        return shape_error("features must be (n_states*n_actions) x dim");
    if (static_cast<int>(spec.factors.size()) != spec.horizon)
        return shape_error("one factor matrix per stage required");
    for (const auto& m : spec.factors)
        if (m.rows() != spec.dim || m.cols() != spec.n_states)
            return shape_error("factor matrices must be dim x n_states");
    if (static_cast<int>(spec.reward_params.size()) != spec.horizon)
        return shape_error("one reward parameter per stage required");
    for (const auto& t : spec.reward_params)
        if (t.size() != spec.dim) return shape_error("reward parameters must have length dim");
    if (spec.rho.rows() != spec.horizon || spec.rho.cols() != spec.dim)
        return shape_error("rho must be horizon x dim");
    if (spec.fail_state && (*spec.fail_state < 0 || *spec.fail_state >= spec.n_states))
        return shape_error("fail_state out of range");

    if (spec.initial_state < 0 || spec.initial_state >= spec.n_states)
        out.push_back({K::initial_state, -1, spec.initial_state, -1, -1, 0.0, "initial state out of range"});

    for (int s = 0; s < spec.n_states; ++s) {
        for (int a = 0; a < spec.n_actions; ++a) {
            const auto phi = spec.phi(s, a);
            for (int i = 0; i < spec.dim; ++i)
                if (phi(i) < -kNegativeTol)
                    out.push_back({K::feature_negative, -1, s, a, i, -phi(i), "negative feature coordinate"});
            const double residual = std::abs(phi.sum() - 1.0);
            if (residual > kSimplexTol)
                out.push_back({K::feature_simplex, -1, s, a, -1, residual, "features do not sum to one"});
        }
    }

    const double norm_bound = std::sqrt(static_cast<double>(spec.dim)) + kSimplexTol;
    for (int h = 0; h < spec.horizon; ++h) {
        const auto& mu = spec.factors[h];
        for (int i = 0; i < spec.dim; ++i) {
            for (int s = 0; s < spec.n_states; ++s)
                if (mu(i, s) < -kNegativeTol)
                    out.push_back({K::factor_negative, h, s, -1, i, -mu(i, s), "negative factor probability"});
            const double residual = std::abs(mu.row(i).sum() - 1.0);
            if (residual > kSimplexTol)
                out.push_back({K::factor_simplex, h, -1, -1, i, residual, "factor row does not sum to one"});
            const double r = spec.rho(h, i);
            if (!(r >= 0.0 && r <= 1.0))
                out.push_back({K::rho_range, h, -1, -1, i, r, "rho outside [0, 1]"});
        }
        const double norm = spec.reward_params[h].norm();
        if (norm > norm_bound)
            out.push_back({K::reward_norm, h, -1, -1, -1, norm - norm_bound + kSimplexTol,
                           "reward parameter norm exceeds sqrt(d)"});
        for (int s = 0; s < spec.n_states; ++s) {
            for (int a = 0; a < spec.n_actions; ++a) {
                const double r = spec.phi(s, a).dot(spec.reward_params[h]);
                if (r < -kNegativeTol || r > 1.0 + kNegativeTol)
                    out.push_back({K::reward_range, h, s, a, -1, r < 0 ? -r : r - 1.0, "reward outside [0, 1]"});
            }
        }
    }

    if (spec.fail_state) {
        const int sf = *spec.fail_state;
        for (int h = 0; h < spec.horizon; ++h) {
            for (int a = 0; a < spec.n_actions; ++a) {
                const double r = spec.phi(sf, a).dot(spec.reward_params[h]);
                if (std::abs(r) > kNegativeTol)
                    out.push_back({K::fail_state_reward, h, sf, a, -1, std::abs(r), "fail state has nonzero reward"});
                const double stay = spec.phi(sf, a).dot(spec.factors[h].col(sf));
                if (std::abs(stay - 1.0) > kSimplexTol)
                    out.push_back({K::fail_state_absorbing, h, sf, a, -1, std::abs(stay - 1.0),
                                   "fail state is not absorbing"});
            }
        }
    }
    return out;
}

void require_valid(const LinearDrmdpSpec& spec) {
    const auto report = validate_spec(spec);
    if (report.empty()) return;
    std::ostringstream msg;
    msg << "invalid spec (" << report.size() << " violations)";
    for (std::size_t n = 0; n < report.size() && n < 5; ++n) {
        const auto& v = report[n];
        msg << "; " << to_string(v.kind) << " at (h=" << v.stage << ", s=" << v.state << ", a=" << v.action
            << ", i=" << v.factor << ") residual " << v.residual;
    }
    throw ValidationError(msg.str());
}

Eigen::VectorXd nominal_transition(const LinearDrmdpSpec& spec, int h, int s, int a) {
    check_indices(spec, h, s, a);
    return spec.factors[h].transpose() * spec.phi(s, a).transpose();
}

double reward(const LinearDrmdpSpec& spec, int h, int s, int a) {
    check_indices(spec, h, s, a);
    return spec.phi(s, a).dot(spec.reward_params[h]);
}

int sample_transition(const LinearDrmdpSpec& spec, int h, int s, int a, Rng& rng) {
    const Eigen::VectorXd p = nominal_transition(spec, h, s, a).cwiseMax(0.0);
    const double u = rng.uniform() * p.sum();
    double acc = 0.0;
    int last_positive = 0;
    for (int j = 0; j < spec.n_states; ++j) {
        if (p(j) <= 0.0) continue;
        acc += p(j);
        last_positive = j;
        if (u < acc) return j;
    }
    return last_positive;
}

Trajectory rollout(const LinearDrmdpSpec& spec, const Policy& policy, Rng& rng) {
    Trajectory traj;
    traj.reserve(spec.horizon);
    int s = spec.initial_state;
    for (int h = 0; h < spec.horizon; ++h) {
        const int a = policy.at(h).at(s);
        const double r = reward(spec, h, s, a);
        const int next = sample_transition(spec, h, s, a, rng);
        traj.push_back({h, s, a, r, next});
        s = next;
    }
    return traj;
}

double trajectory_return(const Trajectory& trajectory) {
    double total = 0.0;
    for (const auto& step : trajectory) total += step.reward;
    return total;
}

} // namespace drrl
