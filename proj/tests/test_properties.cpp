#include "doctest.h"

#include <cmath>

#include "drrl/robust_eval.hpp"
#include "drrl/tv_dual.hpp"
#include "oracles.hpp"

using namespace drrl;

namespace {

struct Shape {
    int S, A, H, d;
};

Shape random_shape(Rng& rng) {
    return {2 + static_cast<int>(rng.uniform() * 7), 1 + static_cast<int>(rng.uniform() * 4),
            1 + static_cast<int>(rng.uniform() * 6), 2 + static_cast<int>(rng.uniform() * 4)};
}

} // namespace

TEST_CASE("random specs: nominal kernels are distributions") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto sh = random_shape(rng);
        const auto spec = oracle::random_spec(rng, sh.S, sh.A, sh.H, sh.d, trial % 2 == 0);
        CHECK(validate_spec(spec).empty());
        for (int h = 0; h < sh.H; ++h) {
            for (int s = 0; s < sh.S; ++s) {
                for (int a = 0; a < sh.A; ++a) {
                    const auto p = nominal_transition(spec, h, s, a);
                    CHECK(p.minCoeff() >= 0.0);
                    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
                    const double r = reward(spec, h, s, a);
                    CHECK(r >= 0.0);
                    CHECK(r <= 1.0 + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("random specs: optimal value dominates every policy, robust below nominal") {
    Rng rng(12);
    for (int trial = 0; trial < 40; ++trial) {
        const auto sh = random_shape(rng);
        const auto spec = oracle::random_spec(rng, sh.S, sh.A, sh.H, sh.d, trial % 2 == 0);
        const auto sol = solve_robust_optimal(spec);
        for (int k = 0; k < 20; ++k) {
            const auto pi = oracle::random_policy(spec, rng);
            const auto robust = evaluate_policy_robust(spec, pi);
            const auto nominal = evaluate_policy_nominal(spec, pi);
            CHECK((robust.array() <= sol.v_star.array() + 1e-12).all());
            CHECK((robust.array() <= nominal.array() + 1e-12).all());
            CHECK(robust.minCoeff() >= -1e-12);
        }
    }
}

TEST_CASE("random specs: robust Bellman residual") {
    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const auto sh = random_shape(rng);
        const auto spec = oracle::random_spec(rng, sh.S, sh.A, sh.H, sh.d, trial % 2 == 0);
        const auto sol = solve_robust_optimal(spec);
        const auto ref = oracle::robust_values(spec);
        CHECK((sol.v_star - ref).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("random specs: range shrinkage under homogeneous rho") {
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const auto sh = random_shape(rng);
        const double rho = 0.05 + 0.95 * rng.uniform();
        const auto spec = with_homogeneous_rho(oracle::random_spec(rng, sh.S, sh.A, sh.H, sh.d, true), rho);
        for (int k = 0; k < 20; ++k) {
            const auto v = evaluate_policy_robust(spec, oracle::random_policy(spec, rng));
            for (bool ok : check_range_shrinkage(v, rho, spec.horizon)) CHECK(ok);
        }
    }
}

TEST_CASE("TV ball: worst mean lies between the minimum and the nominal mean") {
    Rng rng(15);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform() * 8);
        FiniteDistribution dist;
        dist.probs = oracle::random_simplex(n, rng, 0.2);
        for (int j = 0; j < n; ++j) dist.values.push_back(3.0 * rng.uniform());
        const double rho = rng.uniform();
        const auto sol = tv_robust_expectation_primal(dist, rho);
        double mean = 0.0, tv = 0.0, mass = 0.0;
        for (int j = 0; j < n; ++j) {
            mean += dist.probs[j] * dist.values[j];
            tv += 0.5 * std::abs(sol.worst.probs[j] - dist.probs[j]);
            mass += sol.worst.probs[j];
            CHECK(sol.worst.probs[j] >= 0.0);
        }
        CHECK(sol.value <= mean + 1e-12);
        CHECK(sol.value >= *std::min_element(dist.values.begin(), dist.values.end()) - 1e-12);
        CHECK(tv <= rho + 1e-12);
        CHECK(std::abs(mass - 1.0) <= 1e-12);
    }
}

TEST_CASE("empirical dual is monotone in the sample values") {
    Rng rng(16);
    for (int trial = 0; trial < 200; ++trial) {
        DualSample a;
        a.alpha_max = 3.0;
        a.rho = rng.uniform();
        const int n = 1 + static_cast<int>(rng.uniform() * 8);
        for (int t = 0; t < n; ++t) {
            a.values.push_back(2.0 * rng.uniform());
            a.weights.push_back(rng.uniform());
        }
        DualSample b = a;
        for (double& v : b.values) v += rng.uniform();
        CHECK(dual_maximize_empirical(b).value >= dual_maximize_empirical(a).value - 1e-12);
        const auto sol = dual_maximize_empirical(a);
        CHECK(sol.alpha_star >= 0.0);
        CHECK(sol.alpha_star <= a.alpha_max);
        CHECK(sol.value >= 0.0);
    }
}
