#include "doctest.h"

#include <cmath>

#include "drrl/environments.hpp"
#include "drrl/robust_eval.hpp"
#include "drrl/tv_dual.hpp"
#include "oracles.hpp"

using namespace drrl;

TEST_CASE("one-stage problems ignore rho") {
    Rng rng(1);
    auto spec = oracle::random_spec(rng, 4, 3, 1, 3, false);
    const auto sol = solve_robust_optimal(spec);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a) CHECK(sol.q_star[0](s, a) == doctest::Approx(oracle::reward(spec, 0, s, a)));
}

TEST_CASE("zero rho matches independent value iteration") {
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const auto spec = oracle::random_spec(rng, 6, 3, 5, 4, trial % 2 == 0, false);
        const auto sol = solve_robust_optimal(spec);
        const auto ref = oracle::plain_optimal_values(spec);
        CHECK((sol.v_star - ref).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("robust values match the reference backward induction") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto spec = oracle::random_spec(rng, 6, 3, 4, 4, trial % 2 == 0);
        const auto sol = solve_robust_optimal(spec);
        CHECK((sol.v_star - oracle::robust_values(spec)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("solution invariants") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto spec = oracle::random_spec(rng, 5, 4, 4, 3, true);
        const auto sol = solve_robust_optimal(spec);
        for (int h = 0; h < spec.horizon; ++h) {
            for (int s = 0; s < spec.n_states; ++s) {
                CHECK(std::abs(sol.v_star(h, s) - sol.q_star[h].row(s).maxCoeff()) <= 1e-12);
                CHECK(sol.q_star[h](s, sol.pi_star[h][s]) == sol.v_star(h, s));
                // smallest maximiser
                for (int a = 0; a < sol.pi_star[h][s]; ++a) CHECK(sol.q_star[h](s, a) < sol.v_star(h, s));
            }
            CHECK(sol.q_star[h].minCoeff() >= 0.0);
            CHECK(sol.q_star[h].maxCoeff() <= spec.horizon - h + 1e-12);
            CHECK(sol.v_star(h, *spec.fail_state) == 0.0);
        }
    }
}

TEST_CASE("policy evaluation") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto spec = oracle::random_spec(rng, 5, 3, 4, 3, true);
        const auto sol = solve_robust_optimal(spec);
        CHECK((evaluate_policy_robust(spec, sol.pi_star) - sol.v_star).cwiseAbs().maxCoeff() <= 1e-12);

        const auto pi = oracle::random_policy(spec, rng);
        const auto nominal = with_homogeneous_rho(spec, 0.0);
        CHECK((evaluate_policy_robust(nominal, pi) - oracle::plain_policy_values(nominal, pi)).cwiseAbs().maxCoeff() <=
              1e-12);
        CHECK((evaluate_policy_nominal(spec, pi) - oracle::plain_policy_values(spec, pi)).cwiseAbs().maxCoeff() <=
              1e-12);
    }
    auto zero = oracle::random_spec(rng, 4, 2, 3, 3, false);
    for (auto& theta : zero.reward_params) theta.setZero();
    CHECK(evaluate_policy_robust(zero, oracle::random_policy(zero, rng)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("worst-case kernel reproduces the backup") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto spec = oracle::random_spec(rng, 6, 3, 2, 4, trial % 2 == 0);
        Eigen::VectorXd v(6);
        for (int s = 0; s < 6; ++s) v(s) = 2.0 * rng.uniform();
        if (spec.fail_state) v(*spec.fail_state) = 0.0;
        const auto worst = worst_case_kernel(spec, 0, v);
        for (int s = 0; s < 6; ++s) {
            for (int a = 0; a < 3; ++a) {
                const double plugged = spec.phi(s, a) * (worst * v);
                CHECK(std::abs(plugged - robust_backup(spec, 0, s, a, v)) <= 1e-9);
            }
        }
        const auto nominal = with_homogeneous_rho(spec, 0.0);
        CHECK((worst_case_kernel(nominal, 0, v) - nominal.factors[0]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("five-state worst case pushes the x5 factor toward the fail state") {
    FiveStateParams params;
    params.rho_14 = 0.4;
    auto [source, target] = build_five_state_env(params);
    Eigen::VectorXd v(5);
    v << 0.5, 0.5, 0.5, 0.0, 1.0;
    const auto worst = worst_case_kernel(source, 0, v);
    CHECK(worst(3, 3) == doctest::Approx(0.4));
    CHECK(worst(3, 4) == doctest::Approx(0.6));
}

TEST_CASE("hard instance worst case sends rho mass to x_H") {
    HardInstanceParams params;
    Rng rng(9);
    params.xi_signs = random_xi_signs(params.horizon, params.d, rng);
    const auto spec = build_hard_instance(params);
    const auto sol = solve_robust_optimal(spec);
    const int fail = params.horizon - 1;
    const auto worst = worst_case_kernel(spec, 0, sol.v_star.row(1).transpose());
    for (int i = 0; i < spec.dim - 1; ++i) CHECK(worst(i, fail) == doctest::Approx(params.rho));
}

TEST_CASE("average suboptimality") {
    Rng rng(7);
    const auto spec = oracle::random_spec(rng, 5, 3, 4, 3, true);
    const auto sol = solve_robust_optimal(spec);
    CHECK(average_suboptimality(spec, sol, std::vector<Policy>(5, sol.pi_star)) == doctest::Approx(0.0));

    const auto pi = oracle::random_policy(spec, rng);
    const double gap = sol.v_star(0, spec.initial_state) - evaluate_policy_robust(spec, pi)(0, spec.initial_state);
    CHECK(average_suboptimality(spec, std::vector<Policy>(3, pi)) == doctest::Approx(gap));
    CHECK(average_suboptimality(spec, std::vector<Policy>(30, pi)) == doctest::Approx(gap));

    // Mixing one optimal and one suboptimal episode halves the gap.
    CHECK(average_suboptimality(spec, sol, {pi, sol.pi_star}) == doctest::Approx(gap / 2));
}

TEST_CASE("range shrinkage") {
    SUBCASE("constant values") {
        const Eigen::MatrixXd v = Eigen::MatrixXd::Constant(4, 5, 1.7);
        for (bool ok : check_range_shrinkage(v, 0.3, 3)) CHECK(ok);
    }
    SUBCASE("bound values") {
        CHECK(range_shrinkage_bound(1.0, 5, 2) == doctest::Approx(1.0));
        CHECK(range_shrinkage_bound(0.5, 3, 2) == doctest::Approx(1.0));
        CHECK(range_shrinkage_bound(0.5, 3, 0) == doctest::Approx(1.75));
    }
    SUBCASE("rho = 1 keeps every stage range below 1") {
        Rng rng(8);
        for (int trial = 0; trial < 20; ++trial) {
            const auto spec = with_homogeneous_rho(oracle::random_spec(rng, 5, 3, 5, 3, true), 1.0);
            const auto sol = solve_robust_optimal(spec);
            for (bool ok : check_range_shrinkage(sol.v_star, 1.0, spec.horizon)) CHECK(ok);
        }
    }
    SUBCASE("violations are flagged") {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(3, 2);
        v(1, 0) = 1.5;  // last real stage: bound is 1
        const auto flags = check_range_shrinkage(v, 0.5, 2);
        CHECK(flags[0]);
        CHECK_FALSE(flags[1]);
    }
}

TEST_CASE("robust values decrease with rho") {
    Rng rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const auto spec = oracle::random_spec(rng, 5, 3, 4, 3, true);
        Eigen::MatrixXd prev = solve_robust_optimal(with_homogeneous_rho(spec, 0.0)).v_star;
        for (int k = 1; k <= 10; ++k) {
            const auto v = solve_robust_optimal(with_homogeneous_rho(spec, k / 10.0)).v_star;
            CHECK((v.array() <= prev.array() + 1e-12).all());
            prev = v;
        }
    }
}
