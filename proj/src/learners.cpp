#include "drrl/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drrl/errors.hpp"

namespace drrl {

std::string to_string(Variant v) {
    switch (v) {
    case Variant::we_drive_u: return "we-drive-u";
    case Variant::dr_lsvi_ucb: return "dr-lsvi-ucb";
    case Variant::lsvi_ucb: return "lsvi-ucb";
    }
    return "unknown";
}

Variant parse_variant(const std::string& name) {
    if (name == "we-drive-u") return Variant::we_drive_u;
    if (name == "dr-lsvi-ucb") return Variant::dr_lsvi_ucb;
    if (name == "lsvi-ucb") return Variant::lsvi_ucb;
    throw InputError("unknown learner variant '" + name + "'");
}

BonusWidths default_betas(int d, int horizon, int episodes, double lambda, double delta, double c) {
    if (d <= 0 || horizon <= 0 || episodes <= 0 || lambda <= 0.0 || delta <= 0.0 || c <= 0.0)
        throw InputError("default_betas: all arguments must be positive");
    const double dd = d;
    const double H = horizon;
    const double log_term = std::sqrt(std::log(2.0 * dd * episodes * H / delta));
    const double ridge = H * std::sqrt(dd * lambda);
    return {
        c * (ridge + std::sqrt(dd)) * log_term,
        c * (ridge + std::sqrt(dd * dd * dd * H * H * H)) * log_term,
        c * (H * ridge + std::sqrt(dd * dd * dd * std::pow(H, 6))) * log_term,
    };
}

LearnerConfig make_default_config(Variant variant, const LinearDrmdpSpec& spec, int episodes, double c,
                                  double delta) {
    LearnerConfig cfg;
    cfg.variant = variant;
    cfg.lambda = 1.0 / (static_cast<double>(spec.horizon) * spec.horizon);
    cfg.delta = delta;
    const auto widths = default_betas(spec.dim, spec.horizon, episodes, cfg.lambda, delta, c);
    cfg.beta = widths.beta;
    cfg.beta_bar = widths.beta_bar;
    cfg.beta_tilde = widths.beta_tilde;
    return cfg;
}

// --- GramMatrix ------------------------------------------------------------

GramMatrix::GramMatrix(int dim, double lambda, int refactor_every)
    : mat_(lambda * Eigen::MatrixXd::Identity(dim, dim)),
      inv_(Eigen::MatrixXd::Identity(dim, dim) / lambda),
      log_det_(dim * std::log(lambda)),
      refactor_every_(std::max(1, refactor_every)) {}

void GramMatrix::add(const Eigen::VectorXd& x, double weight) {
    mat_.noalias() += weight * x * x.transpose();
    const Eigen::VectorXd u = inv_ * x;
    const double gain = weight * x.dot(u);
    inv_.noalias() -= (weight / (1.0 + gain)) * u * u.transpose();
    log_det_ += std::log1p(gain);
    if (++since_refactor_ >= refactor_every_) refactor();
}

void GramMatrix::refactor() {
    const Eigen::LLT<Eigen::MatrixXd> llt(mat_);
    if (llt.info() != Eigen::Success) throw std::runtime_error("Gram matrix lost positive definiteness");
    const auto n = mat_.rows();
    inv_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
    inv_ = 0.5 * (inv_ + inv_.transpose()).eval();
    const Eigen::MatrixXd L = llt.matrixL();
    log_det_ = 2.0 * L.diagonal().array().log().sum();
    since_refactor_ = 0;
}

double GramMatrix::inv_norm(const Eigen::VectorXd& x) const {
    return std::sqrt(std::max(0.0, x.dot(inv_ * x)));
}

// --- Learner ---------------------------------------------------------------

Learner::Learner(const LinearDrmdpSpec& spec, LearnerConfig config) : spec_(&spec), config_(config) {
    require_valid(spec);
    if (!(config_.lambda > 0.0)) throw InputError("lambda must be positive");
    if (!(config_.beta > 0.0)) throw InputError("beta must be positive");
    if (config_.variant == Variant::we_drive_u && !(config_.beta_bar > 0.0 && config_.beta_tilde > 0.0))
        throw InputError("beta_bar and beta_tilde must be positive");

    const int d = spec.dim;
    const int S = spec.n_states;
    const int A = spec.n_actions;
    const int H = spec.horizon;
    state_.stages.resize(H);
    for (auto& st : state_.stages) {
        st.sigma = GramMatrix(d, config_.lambda, config_.refactor_every);
        st.lambda = GramMatrix(d, config_.lambda, config_.refactor_every);
        st.weighted_next = Eigen::MatrixXd::Zero(d, S);
        st.plain_next = Eigen::MatrixXd::Zero(d, S);
        st.q_hat = Eigen::MatrixXd::Constant(S, A, H);
        st.q_check = Eigen::MatrixXd::Zero(S, A);
        st.nu_hat = Eigen::VectorXd::Zero(d);
        st.nu_check = Eigen::VectorXd::Zero(d);
        st.z_hat1 = Eigen::VectorXd::Zero(d);
        st.z_check1 = Eigen::VectorXd::Zero(d);
        st.z_tilde2 = Eigen::VectorXd::Zero(d);
    }
    state_.v_hat = Eigen::MatrixXd::Zero(H + 1, S);
    state_.v_check = Eigen::MatrixXd::Zero(H + 1, S);
    state_.policy.assign(H, std::vector<int>(S, 0));
}

const GramMatrix& Learner::regression_gram(int h) const {
    const auto& st = state_.stages[h];
    return config_.variant == Variant::lsvi_ucb ? st.lambda : st.sigma;
}

const Eigen::MatrixXd& Learner::regression_next(int h) const {
    const auto& st = state_.stages[h];
    return config_.variant == Variant::lsvi_ucb ? st.plain_next : st.weighted_next;
}

bool Learner::should_switch() const {
    if (!state_.has_policy || config_.variant != Variant::we_drive_u) return true;
    const double log2 = std::log(2.0);
    return std::any_of(state_.stages.begin(), state_.stages.end(), [&](const StageState& st) {
        return st.sigma.log_det() >= st.log_det_last + log2 - 1e-12;
    });
}

Eigen::VectorXd Learner::estimate_nu(int h, const Eigen::VectorXd& v_next) {
    // Samples are aggregated by next state: column s' of weighted_next is
    // sum_t phi_t / sigma_bar_t^2 over t with s'_t = s', so the per-factor
    // weight of s' is 1_i^T Sigma^{-1} (that column).
    const auto& st = state_.stages[h];
    const Eigen::MatrixXd weights = st.sigma.inverse() * st.weighted_next;
    const double alpha_max = spec_->horizon;

    std::vector<int> observed;
    for (int s = 0; s < spec_->n_states; ++s)
        if (st.plain_next.col(s).any()) observed.push_back(s);

    Eigen::VectorXd nu(spec_->dim);
    DualSample sample;
    sample.alpha_max = alpha_max;
    for (int i = 0; i < spec_->dim; ++i) {
        sample.values.clear();
        sample.weights.clear();
        for (int s : observed) {
            sample.values.push_back(v_next(s));
            sample.weights.push_back(weights(i, s));
        }
        sample.rho = spec_->rho(h, i);
        nu(i) = dual_maximize_empirical(sample, state_.oracle).value;
    }
    return nu;
}

void Learner::recompute_policy() {
    const auto& spec = *spec_;
    const int H = spec.horizon;
    const int S = spec.n_states;
    const int A = spec.n_actions;
    const int d = spec.dim;
    const bool robust = config_.variant != Variant::lsvi_ucb;
    const bool pessimistic = config_.variant == Variant::we_drive_u;
    const Policy previous = state_.policy;

    for (int h = H - 1; h >= 0; --h) {
        auto& st = state_.stages[h];
        const double cap = H - h;
        const GramMatrix& gram = regression_gram(h);

        if (robust) {
            if (h == H - 1) {
                st.nu_hat.setZero();
                st.nu_check.setZero();
            } else {
                st.nu_hat = estimate_nu(h, state_.v_hat.row(h + 1).transpose());
                if (pessimistic) st.nu_check = estimate_nu(h, state_.v_check.row(h + 1).transpose());
            }
        } else {
            // Plain ridge regression of V_hat_{h+1}(s') on phi.
            st.nu_hat = gram.inverse() * (regression_next(h) * state_.v_hat.row(h + 1).transpose());
        }

        const Eigen::VectorXd coord_width = gram.inverse().diagonal().cwiseMax(0.0).cwiseSqrt();

        for (int s = 0; s < S; ++s) {
            const bool fail = robust && spec.fail_state && *spec.fail_state == s;
            for (int a = 0; a < A; ++a) {
                const Eigen::VectorXd f = phi(s, a);
                const double r = f.dot(spec.reward_params[h]);
                if (fail) {
                    st.q_hat(s, a) = 0.0;
                    st.q_check(s, a) = 0.0;
                    continue;
                }
                if (robust) {
                    double spread = 0.0;
                    for (int i = 0; i < d; ++i) spread += f(i) * coord_width(i);
                    const double optimistic = r + f.dot(st.nu_hat) + config_.beta * spread;
                    st.q_hat(s, a) = std::min({optimistic, st.q_hat(s, a), cap});
                    if (pessimistic) {
                        const double lower = r + f.dot(st.nu_check) - config_.beta_bar * spread;
                        st.q_check(s, a) = std::max({lower, st.q_check(s, a), 0.0});
                    }
                } else {
                    const double optimistic = r + f.dot(st.nu_hat) + config_.beta * gram.inv_norm(f);
                    st.q_hat(s, a) = std::min(optimistic, cap);
                }
            }
            Eigen::Index best = 0;
            state_.v_hat(h, s) = st.q_hat.row(s).maxCoeff(&best);
            state_.v_check(h, s) = st.q_check.row(s).maxCoeff();
            state_.policy[h][s] = static_cast<int>(best);
        }
    }

    state_.k_last = state_.episode;
    for (auto& st : state_.stages) st.log_det_last = st.sigma.log_det();
    ++state_.update_episodes;
    ++state_.switches;
    if (!state_.has_policy || state_.policy != previous) {
        if (state_.has_policy) ++state_.policy_version;
        ++state_.policy_changes;
    }
    state_.has_policy = true;
}

void Learner::refresh_plain_regressions(int h) {
    auto& st = state_.stages[h];
    const Eigen::VectorXd v_hat = state_.v_hat.row(h + 1).transpose();
    const Eigen::VectorXd v_check = state_.v_check.row(h + 1).transpose();
    const Eigen::MatrixXd& inv = st.lambda.inverse();
    st.z_hat1 = inv * (st.plain_next * v_hat);
    st.z_tilde2 = inv * (st.plain_next * v_hat.cwiseAbs2());
    st.z_check1 = inv * (st.plain_next * v_check);
}

VarianceEstimate Learner::estimate_variance(int h, int s, int a) const {
    const auto& st = state_.stages[h];
    const Eigen::VectorXd f = phi(s, a);
    const double d = spec_->dim;
    const double H = spec_->horizon;
    const double H2 = H * H;
    const double d3 = d * d * d;

    const double lam_norm = st.lambda.inv_norm(f);
    const double sig_norm = st.sigma.inv_norm(f);

    const double second = std::clamp(f.dot(st.z_tilde2), 0.0, H2);
    const double first = std::clamp(f.dot(st.z_hat1), 0.0, H);
    const double var_bar = std::max(0.0, second - first * first);

    const double err = std::min(config_.beta_tilde * lam_norm, H2) + std::min(2.0 * H * config_.beta_bar * lam_norm, H2);
    const double gap = std::clamp(4.0 * H * (f.dot(st.z_hat1) - f.dot(st.z_check1) + 2.0 * config_.beta_bar * lam_norm),
                                  0.0, H2);

    VarianceEstimate out;
    out.sigma = std::sqrt(var_bar + err + config_.weight_scale * d3 * H * gap + 0.5);
    out.sigma_bar = std::max({out.sigma, 1.0, config_.weight_scale * std::sqrt(2.0 * d3 * H2) * std::sqrt(sig_norm)});
    return out;
}

void Learner::observe(int h, int s, int a, int next_state, double sigma_bar) {
    auto& st = state_.stages[h];
    const Eigen::VectorXd f = phi(s, a);
    const double w = 1.0 / (sigma_bar * sigma_bar);
    st.sigma.add(f, w);
    st.lambda.add(f, 1.0);
    st.weighted_next.col(next_state) += w * f;
    st.plain_next.col(next_state) += f;
    st.dataset.push_back({s, a, next_state, sigma_bar});
}

EpisodeRecord Learner::run_episode(Rng& rng) {
    const auto& spec = *spec_;
    ++state_.episode;

    EpisodeRecord rec;
    rec.episode = state_.episode;
    rec.switched = should_switch();
    if (rec.switched) {
        const std::size_t changes = state_.policy_changes;
        recompute_policy();
        rec.policy_changed = state_.policy_changes != changes;
    }
    rec.policy_version = state_.policy_version;

    int s = spec.initial_state;
    for (int h = 0; h < spec.horizon; ++h) {
        const int a = state_.policy[h][s];
        rec.states.push_back(s);
        rec.actions.push_back(a);
        rec.v_hat_visited.push_back(state_.v_hat(h, s));
        rec.v_check_visited.push_back(state_.v_check(h, s));

        double sigma_bar = 1.0;
        if (config_.variant == Variant::we_drive_u) {
            refresh_plain_regressions(h);
            sigma_bar = estimate_variance(h, s, a).sigma_bar;
        }
        rec.sigma_bar.push_back(sigma_bar);
        rec.nominal_return += reward(spec, h, s, a);

        const int next = sample_transition(spec, h, s, a, rng);
        observe(h, s, a, next, sigma_bar);
        s = next;
    }
    rec.cumulative_switches = state_.switches;
    rec.cumulative_oracle_calls = state_.oracle.calls;
    return rec;
}

// --- runs ------------------------------------------------------------------

double RunRecord::ave_subopt() const { return ave_subopt_at(subopt.size()); }

double RunRecord::ave_subopt_at(std::size_t k) const {
    if (k == 0 || k > subopt.size()) throw InputError("checkpoint outside the recorded episodes");
    return std::accumulate(subopt.begin(), subopt.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
           static_cast<double>(k);
}

RunRecord run(const LearnerConfig& config, const LinearDrmdpSpec& spec, int episodes, Rng& rng,
              const RobustSolution* truth) {
    if (episodes < 1) throw InputError("at least one episode required");
    Learner learner(spec, config);
    RunRecord out;
    out.variant = config.variant;
    out.episodes.reserve(episodes);

    std::vector<double> version_subopt;
    for (int k = 0; k < episodes; ++k) {
        auto rec = learner.run_episode(rng);
        if (rec.policy_version == out.policies.size()) {
            out.policies.push_back(learner.state().policy);
            if (truth) {
                const int s1 = spec.initial_state;
                version_subopt.push_back(truth->v_star(0, s1) -
                                         evaluate_policy_robust(spec, out.policies.back())(0, s1));
            }
        }
        if (truth) out.subopt.push_back(version_subopt[rec.policy_version]);
        out.episodes.push_back(std::move(rec));
    }
    const auto& st = learner.state();
    out.total_switches = st.switches;
    out.total_policy_changes = st.policy_changes;
    out.total_update_episodes = st.update_episodes;
    out.total_oracle_calls = st.oracle.calls;
    return out;
}

} // namespace drrl
