#include "drrl/tv_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drrl/errors.hpp"

namespace drrl {

namespace {

std::vector<double> breakpoints(const std::vector<double>& values, double alpha_max) {
    std::vector<double> pts{0.0};
    for (double v : values)
        if (v > 0.0 && v < alpha_max) pts.push_back(v);
    pts.push_back(alpha_max);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

double min_truncated(const std::vector<double>& values, double alpha) {
    double m = alpha;
    for (double v : values) m = std::min(m, v);
    return m;
}

} // namespace

double truncated_mean(const FiniteDistribution& dist, double alpha) {
    double total = 0.0;
    for (std::size_t j = 0; j < dist.values.size(); ++j) total += dist.probs[j] * std::min(dist.values[j], alpha);
    return total;
}

PrimalSolution tv_robust_expectation_primal(const FiniteDistribution& dist, double rho) {
    const std::size_t n = dist.values.size();
    PrimalSolution out;
    out.worst = dist;
    if (n == 0) return out;

    const auto min_it = std::min_element(dist.values.begin(), dist.values.end());
    const std::size_t sink = static_cast<std::size_t>(min_it - dist.values.begin());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return dist.values[x] > dist.values[y]; });

    double budget = std::max(0.0, rho);
    for (std::size_t j : order) {
        if (budget <= 0.0) break;
        if (j == sink || dist.values[j] <= dist.values[sink]) continue;
        const double moved = std::min(budget, out.worst.probs[j]);
        out.worst.probs[j] -= moved;
        out.worst.probs[sink] += moved;
        budget -= moved;
    }
    double value = 0.0;
    for (std::size_t j = 0; j < n; ++j) value += out.worst.probs[j] * dist.values[j];
    out.value = value;
    return out;
}

DualSolution tv_robust_expectation_dual(const FiniteDistribution& dist, double rho, DualForm form,
                                        double alpha_max) {
    if (dist.values.empty()) return {};
    if (form == DualForm::fail_state) {
        const double vmin = *std::min_element(dist.values.begin(), dist.values.end());
        if (vmin > 1e-9)
            throw PreconditionError("fail-state dual requires a zero-valued support point");
    }
    DualSolution best{-std::numeric_limits<double>::infinity(), 0.0};
    for (double alpha : breakpoints(dist.values, alpha_max)) {
        double g = truncated_mean(dist, alpha) - rho * alpha;
        if (form == DualForm::general) g += rho * min_truncated(dist.values, alpha);
        if (g > best.value) best = {g, alpha};
    }
    return best;
}

DualSolution dual_maximize_empirical(const DualSample& sample) {
    const std::size_t n = sample.values.size();
    if (n == 0) return {0.0, 0.0};

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return sample.values[x] < sample.values[y]; });

    // g(alpha) = sum_{v_t <= alpha} w_t v_t + alpha * sum_{v_t > alpha} w_t - rho * alpha
    const double total_weight = std::accumulate(sample.weights.begin(), sample.weights.end(), 0.0);
    double below_wv = 0.0;
    double below_w = 0.0;
    std::size_t next = 0;

    DualSolution best{-std::numeric_limits<double>::infinity(), 0.0};
    for (double alpha : breakpoints(sample.values, sample.alpha_max)) {
        while (next < n && sample.values[order[next]] <= alpha) {
            below_wv += sample.weights[order[next]] * sample.values[order[next]];
            below_w += sample.weights[order[next]];
            ++next;
        }
        const double g = below_wv + alpha * (total_weight - below_w) - sample.rho * alpha;
        if (g > best.value) best = {g, alpha};
    }
    return best;
}

DualSolution dual_maximize_empirical(const DualSample& sample, OracleCounter& counter) {
    ++counter.calls;
    return dual_maximize_empirical(sample);
}

Eigen::VectorXd robust_factor_values(const LinearDrmdpSpec& spec, int h, const Eigen::VectorXd& v_next) {
    if (h < 0 || h >= spec.horizon) throw InputError("stage out of range");
    if (v_next.size() != spec.n_states) throw InputError("value vector must have one entry per state");

    const bool fail_form = spec.fail_state && std::abs(v_next(*spec.fail_state)) <= 1e-12 && v_next.minCoeff() >= -1e-12;
    const double alpha_max = std::max(static_cast<double>(spec.horizon), v_next.maxCoeff());

    FiniteDistribution dist;
    dist.values.assign(v_next.data(), v_next.data() + v_next.size());
    dist.probs.resize(spec.n_states);

    Eigen::VectorXd out(spec.dim);
    for (int i = 0; i < spec.dim; ++i) {
        const auto row = spec.factors[h].row(i);
        const double rho = spec.rho(h, i);
        if (rho == 0.0) {
            out(i) = row.dot(v_next);
            continue;
        }
        for (int s = 0; s < spec.n_states; ++s) dist.probs[s] = row(s);
        out(i) = tv_robust_expectation_dual(dist, rho, fail_form ? DualForm::fail_state : DualForm::general,
                                            alpha_max)
                     .value;
    }
    return out;
}

double robust_backup(const LinearDrmdpSpec& spec, int h, int s, int a, const Eigen::VectorXd& v_next) {
    if (s < 0 || s >= spec.n_states || a < 0 || a >= spec.n_actions) throw InputError("state/action out of range");
    const auto phi = spec.phi(s, a);
    const Eigen::VectorXd u = robust_factor_values(spec, h, v_next);
    double total = 0.0;
    for (int i = 0; i < spec.dim; ++i)
        if (phi(i) != 0.0) total += phi(i) * u(i);
    return total;
}

} // namespace drrl
