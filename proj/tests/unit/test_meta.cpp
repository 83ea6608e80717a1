#include "doctest.h"

#include "marl/baselines.hpp"
#include "marl/errors.hpp"
#include "marl/meta.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace marl;

namespace {

HyperParams tiny_hyper() {
    HyperParams h;
    h.iterations = 50;
    h.beta = 0.01;
    h.alpha = 0.04;
    return h;
}

MetaHooks scripted(std::vector<double> scores, std::vector<int>* trials_run = nullptr) {
    MetaHooks hooks;
    hooks.run_trial = [trials_run](int trial, std::uint64_t) {
        if (trials_run) trials_run->push_back(trial);
        Matrix prob = Matrix::Zero(1, 4);
        prob(0, trial % 4) = 1.0;
        return Policy{prob, {}};
    };
    hooks.evaluate = [scores = std::move(scores)](int trial, const Policy&, Rng&) {
        return scores[static_cast<std::size_t>(trial)];
    };
    return hooks;
}

} // namespace

TEST_SUITE("meta") {

TEST_CASE("trial count") {
    CHECK(default_k(2.0 / 3.0) == 1);
    CHECK(default_k(0.1) == static_cast<int>(std::ceil(std::log(0.05) / std::log(1.0 / 3.0))));
    CHECK(default_k(0.1) == 3);
    CHECK(default_k(0.01) == 5);
    CHECK_THROWS_AS(default_k(0.0), ParameterError);
    CHECK_THROWS_AS(default_k(1.0), ParameterError);
}

TEST_CASE("evaluation horizon") {
    CHECK(default_l(0.5, 0.5, 1, 1.0, 1.0) == static_cast<std::int64_t>(std::ceil(4.0 * std::log(8.0))));
    CHECK(default_l(0.5, 0.5, 1, 1.0, 1.0) == 9);
    // exact ratio once the ceiling is taken out
    const double ratio = (1.0 / (0.05 * 0.05)) / (1.0 / (0.1 * 0.1));
    CHECK(ratio == doctest::Approx(4.0));
    const double big = default_l(0.05, 0.1, 3, 1.0, 1.0), small = default_l(0.1, 0.1, 3, 1.0, 1.0);
    CHECK(big / small == doctest::Approx(4.0).epsilon(1e-3));
    CHECK_THROWS_AS(default_l(0.5, 0.5, 1, 1.0, 0.0), ParameterError);
}

TEST_CASE("rollout evaluation") {
    const auto constant = oracle::single_state_mdp({0.7});
    Rng rng(1);
    for (std::int64_t horizon : {1, 10, 1000}) CHECK(approximate_value_evaluation(constant, Policy::uniform(1, 1), horizon, 0, rng) == doctest::Approx(0.7).epsilon(1e-12));

    Rng gen(2);
    const auto mdp = random_unichain_mdp(3, {2}, 1, gen);
    Rng a(3), b(3);
    CHECK(approximate_value_evaluation(mdp, Policy::uniform(3, 2), 500, 0, a) ==
          approximate_value_evaluation(mdp, Policy::uniform(3, 2), 500, 0, b));

    CHECK_THROWS_AS(approximate_value_evaluation(mdp, Policy::uniform(3, 2), 0, 0, a), ParameterError);
    CHECK_THROWS_AS(approximate_value_evaluation(mdp, Policy::uniform(3, 2), 10, 3, a), ParameterError);
}

TEST_CASE("rollout evaluation concentrates on the average reward") {
    // chain 0 -> 1 w.p. 0.5, 1 -> 0 w.p. 1; reward 0.3 in state 0 and 0.9 in state 1
    Matrix p(2, 2);
    p << 0.5, 0.5, 1.0, 0.0;
    Matrix r(2, 1);
    r << 0.3, 0.9;
    const TabularMdp mdp({p}, {r});
    const auto [x0, x1] = oracle::two_state_stationary(0.5, 1.0);
    const double lambda = x0 * 0.3 + x1 * 0.9;
    REQUIRE(lambda == doctest::Approx(0.5));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        CHECK(std::abs(approximate_value_evaluation(mdp, Policy::uniform(2, 1), 100000, 0, rng) - lambda) <= 0.05);
    }
}

TEST_CASE("selection contract") {
    const auto mdp = oracle::single_state_mdp({0.1, 0.2, 0.3, 0.4});
    const auto schedule = GraphSchedule::complete(1);
    MetaConfig config;
    config.horizon = 10;

    SUBCASE("a single trial is returned unconditionally") {
        config.trials = 1;
        const auto result = run_meta(mdp, schedule, tiny_hyper(), config, 5, scripted({-1.0}));
        CHECK(result.selected == 0);
        CHECK(result.policy.prob(0, 0) == 1.0);
    }
    SUBCASE("argmax wins") {
        config.trials = 2;
        const auto result = run_meta(mdp, schedule, tiny_hyper(), config, 5, scripted({0.3, 0.8}));
        CHECK(result.selected == 1);
        CHECK(result.policy.prob(0, 1) == 1.0);
    }
    SUBCASE("ties go to the lowest index") {
        config.trials = 2;
        CHECK(run_meta(mdp, schedule, tiny_hyper(), config, 5, scripted({0.5, 0.5})).selected == 0);
        config.trials = 4;
        CHECK(run_meta(mdp, schedule, tiny_hyper(), config, 5, scripted({0.1, 0.6, 0.2, 0.6})).selected == 1);
    }
    SUBCASE("every trial runs once, in order") {
        config.trials = 3;
        std::vector<int> order;
        const auto result = run_meta(mdp, schedule, tiny_hyper(), config, 5, scripted({0.1, 0.2, 0.3}, &order));
        CHECK(order == std::vector<int>{0, 1, 2});
        CHECK(result.reports.size() == 3);
    }
    SUBCASE("K defaults from delta") {
        config.trials.reset();
        config.delta = 0.01;
        CHECK(run_meta(mdp, schedule, tiny_hyper(), config, 5, scripted({0, 0, 0, 0, 0})).trials == 5);
    }
    SUBCASE("K below one") {
        config.trials = 0;
        CHECK_THROWS_AS(run_meta(mdp, schedule, tiny_hyper(), config, 5, scripted({})), ParameterError);
    }
}

TEST_CASE("selected trial has the best rollout score") {
    Rng gen(6);
    const auto mdp = random_unichain_mdp(3, {2}, 2, gen);
    MetaConfig config;
    config.trials = 4;
    config.horizon = 2000;
    const auto result = run_meta(mdp, GraphSchedule::ring(2), tiny_hyper(), config, 9);
    for (const auto& r : result.reports) CHECK(result.reports[result.selected].score >= r.score);
    CHECK(result.horizon == 2000);
}

TEST_CASE("trials depend only on the run seed and their index") {
    Rng gen(7);
    const auto mdp = random_unichain_mdp(3, {2}, 2, gen);
    MetaConfig two, three;
    two.trials = 2;
    three.trials = 3;
    two.horizon = three.horizon = 300;
    const auto a = run_meta(mdp, GraphSchedule::ring(2), tiny_hyper(), two, 11);
    const auto b = run_meta(mdp, GraphSchedule::ring(2), tiny_hyper(), three, 11);
    for (int k = 0; k < 2; ++k) {
        CHECK(a.reports[k].seed == b.reports[k].seed);
        CHECK(a.reports[k].score == b.reports[k].score);
        CHECK(a.reports[k].policy.prob == b.reports[k].policy.prob);
        CHECK(a.reports[k].seed == trial_seed(11, k));
    }
    CHECK(trial_seed(11, 0) != trial_seed(11, 1));
    CHECK(trial_seed(11, 0) != trial_seed(12, 0));
}

TEST_CASE("reference iteration count") {
    const double base = reference_iterations(2.0, 1.0, 4, 0.5, 3, 2, 10.0, 0.1, true);
    CHECK(base == doctest::Approx(4.0 * 1.0 * 2.0 * 0.5 * 6.0 * 10.0 / 0.01));
    CHECK(reference_iterations(2.0, 1.0, 4, 0.5, 3, 2, 10.0, 0.1, false) == doctest::Approx(2.0 * base));
    CHECK(reference_iterations(2.0, 1.0, 4, 0.5, 3, 2, 10.0, 0.05, true) == doctest::Approx(4.0 * base));
}

}

TEST_SUITE("meta-grid") {

TEST_CASE("meta runs reach the optimum often enough on the small grid") {
    const auto grid = build_grid_world(GridWorldSpec::cooperative_navigation(2));
    const double lambda_star = solve_lp_exact(grid).lambda;
    MetaConfig config;
    config.delta = 0.1;
    config.epsilon = 0.1 * lambda_star;
    // desk-scale trial length; the tau and shift overrides match configs/grid_compare.json
    HyperOverrides overrides;
    overrides.iterations = 200000;
    overrides.shift = 1.0;
    overrides.beta = 1e-3;
    const auto hyper = resolve_hyperparams(grid.num_states(), grid.num_actions(), 1.0, 1024.0, overrides);
    const int runs = 30;
    int hits = 0;
    for (int k = 0; k < runs; ++k) {
        const auto result = run_meta(grid, GraphSchedule::ring(2), hyper, config, 1000 + static_cast<std::uint64_t>(k));
        if (long_run_reward(grid, result.policy) >= lambda_star - config.epsilon) ++hits;
    }
    MESSAGE(hits << " of " << runs << " meta runs within epsilon of the optimum");
    CHECK(hits >= static_cast<int>(std::ceil((1.0 - config.delta - 0.1) * runs)));
}

}
