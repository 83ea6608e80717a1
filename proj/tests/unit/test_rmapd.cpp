#include "doctest.h"

#include "marl/baselines.hpp"
#include "marl/diagnostics.hpp"
#include "marl/errors.hpp"
#include "marl/geometry.hpp"
#include "marl/primal_dual.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace marl;

namespace {

HyperParams small_hyper(std::int64_t iterations, double beta, double alpha, double t_mix = 1.0, double tau = 4.0) {
    HyperParams h;
    h.iterations = iterations;
    h.shift = 4.0 * t_mix + 1.0;
    h.beta = beta;
    h.alpha = alpha;
    h.t_mix = t_mix;
    h.tau = tau;
    return h;
}

Matrix random_simplex(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = -std::log(1.0 - rng.uniform()) + 0.05;
    return m / m.sum();
}

double time_averaged_consensus_v(const TabularMdp& mdp, const GraphSchedule& schedule, const HyperParams& h,
                                 std::uint64_t seed, double& mu_error) {
    double v_sum = 0.0, mu_sum = 0.0;
    std::int64_t count = 0;
    const std::vector<Observer> observers{[&](const RunView& view) {
        const auto e = consensus_errors(view.agents);
        v_sum += e.value;
        mu_sum += e.occupancy;
        ++count;
    }};
    run_rmapd(mdp, schedule, h, RunOptions{seed}, observers);
    mu_error = mu_sum / static_cast<double>(count);
    return v_sum / static_cast<double>(count);
}

} // namespace

TEST_SUITE("rmapd") {

TEST_CASE("default hyperparameters") {
    const auto h = default_hyperparams(81, 16, 3.0, 2.0);
    CHECK(h.shift == 13.0);
    CHECK(h.iterations == 46656);
    const double sa = 81.0 * 16.0;
    const double beta = (1.0 / 3.0) * std::sqrt(std::log(sa) / (2.0 * sa * 46656.0));
    CHECK(h.beta == doctest::Approx(beta).epsilon(1e-12));
    CHECK(h.alpha == doctest::Approx(81.0 * 9.0 * beta).epsilon(1e-12));

    const auto alg1 = default_hyperparams(81, 16, 3.0, 2.0, AlphaRule::algorithm1);
    CHECK(alg1.alpha == doctest::Approx(81.0 * 3.0 * std::sqrt(std::log(sa) / (2.0 * 16.0 * 46656.0))).epsilon(1e-12));

    HyperOverrides overrides;
    overrides.beta = 0.0123;
    overrides.iterations = 500;
    const auto o = resolve_hyperparams(4, 4, 1.0, 4.0, overrides);
    CHECK(o.beta == 0.0123);
    CHECK(o.iterations == 500);
    CHECK(o.alpha == doctest::Approx(4.0 * 0.0123));

    CHECK_THROWS_AS(default_hyperparams(4, 4, 0.5, 4.0), ParameterError);
    CHECK_THROWS_AS(default_hyperparams(4, 4, 1.0, 0.5), ParameterError);
}

TEST_CASE("consensus round") {
    Rng rng(1);
    auto agents = initial_agents(3, 2, 2);
    for (auto& a : agents) {
        a.mu = random_simplex(2, 2, rng);
        a.v = Vector::Random(2);
    }
    consensus_round(agents, WeightMatrix::identity(3));
    for (const auto& a : agents) {
        CHECK(a.mu_mix == a.mu);
        CHECK(a.v_mix == a.v);
    }

    auto pair = initial_agents(2, 2, 2);
    pair[0].mu = random_simplex(2, 2, rng);
    pair[1].mu = random_simplex(2, 2, rng);
    pair[0].v << 1.0, -1.0;
    pair[1].v << 0.0, 0.5;
    consensus_round(pair, metropolis_weights(complete_edges(2), 2));
    const Matrix mean_mu = 0.5 * (pair[0].mu + pair[1].mu);
    for (const auto& a : pair) {
        CHECK((a.mu_mix - mean_mu).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(a.v_mix(0) == doctest::Approx(0.5));
        CHECK(a.v_mix(1) == doctest::Approx(-0.25));
    }

    auto same = initial_agents(4, 3, 2);
    consensus_round(same, metropolis_weights(ring_edges(4), 4));
    for (const auto& a : same) CHECK((a.mu_mix - a.mu).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("consensus reads only neighbours") {
    auto agents = initial_agents(3, 2, 1);
    agents[2].mu = Matrix::Constant(2, 1, std::nan(""));
    agents[2].v = Vector::Constant(2, std::nan(""));
    consensus_round(agents, metropolis_weights(EdgeSet{{0, 1}}, 3));
    CHECK(agents[0].mu_mix.allFinite());
    CHECK(agents[1].v_mix.allFinite());
}

TEST_CASE("draw_sample") {
    Rng gen(2);
    const auto mdp = random_unichain_mdp(2, {2}, 1, gen);
    SUBCASE("point mass") {
        Matrix point = Matrix::Zero(2, 2);
        point(1, 0) = 1.0;
        Rng rng(3);
        for (int k = 0; k < 100; ++k) {
            const auto s = draw_sample(point, mdp, 0, rng);
            CHECK(s.state == 1);
            CHECK(s.action == 0);
            CHECK(s.reward == mdp.local_reward(0)(1, 0));
        }
    }
    SUBCASE("uniform frequencies") {
        const Matrix uniform = Matrix::Constant(2, 2, 0.25);
        Rng rng(4);
        Matrix counts = Matrix::Zero(2, 2);
        const int draws = 100000;
        for (int k = 0; k < draws; ++k) {
            const auto s = draw_sample(uniform, mdp, 0, rng);
            counts(s.state, s.action) += 1.0;
        }
        CHECK((counts.array() / draws - 0.25).abs().maxCoeff() <= 0.01);
    }
    SUBCASE("seeded stream") {
        const Matrix mu = Matrix::Constant(2, 2, 0.25);
        Rng a(5), b(5);
        for (int k = 0; k < 200; ++k) {
            const auto x = draw_sample(mu, mdp, 0, a), y = draw_sample(mu, mdp, 0, b);
            CHECK(x.state == y.state);
            CHECK(x.action == y.action);
            CHECK(x.next_state == y.next_state);
        }
    }
}

TEST_CASE("dual gradient") {
    const HyperParams h = small_hyper(1, 0.1, 0.1);
    Matrix mu = Matrix::Constant(2, 1, 0.5);
    const Sample sample{0, 0, 1, 0.0};
    const auto delta = dual_gradient(mu, Vector::Zero(2), sample, h);
    CHECK(delta.state == 0);
    CHECK(delta.action == 0);
    CHECK(delta.value == doctest::Approx(-1.0));

    Matrix zero = Matrix::Zero(2, 1);
    zero(1, 0) = 1.0;
    CHECK_THROWS_AS(dual_gradient(zero, Vector::Zero(2), sample, h), InternalError);

    Rng rng(6);
    for (int k = 0; k < 2000; ++k) {
        const double t_mix = 1.0 + 3.0 * rng.uniform();
        const HyperParams hk = small_hyper(1, rng.uniform(), 0.1, t_mix);
        Vector v(3);
        for (int s = 0; s < 3; ++s) v(s) = 2.0 * t_mix * (2.0 * rng.uniform() - 1.0);
        const Sample sk{k % 3, k % 2, (k / 3) % 3, rng.uniform()};
        CHECK(dual_gradient(random_simplex(3, 2, rng), v, sk, hk).value <= 0.0);
    }
}

TEST_CASE("primal gradient") {
    const HyperParams h = small_hyper(1, 0.1, 0.2);
    const Matrix mu = Matrix::Constant(2, 2, 0.25);
    const auto step = primal_gradient(mu, mu, Sample{0, 1, 1, 0.0}, h);
    const Vector d = step.to_dense(2);
    CHECK(d(0) == doctest::Approx(0.2));
    CHECK(d(1) == doctest::Approx(-0.2));

    CHECK(primal_gradient(mu, mu, Sample{1, 0, 1, 0.0}, h).to_dense(2).isZero());

    Rng rng(7);
    for (int k = 0; k < 500; ++k) {
        const Matrix m = random_simplex(3, 2, rng), mix = random_simplex(3, 2, rng);
        const Sample s{k % 3, k % 2, (k + 1) % 3, 0.0};
        const Vector dk = primal_gradient(m, mix, s, h).to_dense(3);
        CHECK(dk.norm() <= m(s.state, s.action) / mix(s.state, s.action) * 0.2 * std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("estimators are unbiased") {
    Rng gen(8);
    const int ns = 3, na = 2;
    const auto mdp = random_unichain_mdp(ns, {na}, 1, gen);
    const HyperParams h = small_hyper(1, 0.05, 0.3);
    const Matrix mix = random_simplex(ns, na, gen);
    const Matrix mu = random_simplex(ns, na, gen);
    Vector v(ns);
    v << 0.7, -1.2, 0.4;

    Matrix delta_expected(ns, na);
    for (int a = 0; a < na; ++a) {
        const Vector pv = mdp.transition(a) * v;
        for (int s = 0; s < ns; ++s) delta_expected(s, a) = h.beta * (pv(s) - v(s) + mdp.local_reward(0)(s, a) - h.shift);
    }
    Vector d_expected = Vector::Zero(ns);
    for (int a = 0; a < na; ++a)
        d_expected += h.alpha * (Matrix::Identity(ns, ns) - mdp.transition(a)).transpose() * mu.col(a);

    // 10 replicates x 9 components; under unbiasedness about 0.24 exceed 3 SE
    const int replicates = 10;
    const int draws = 100000;
    int outside = 0;
    for (int rep = 0; rep < replicates; ++rep) {
        Matrix delta_sum = Matrix::Zero(ns, na), delta_sq = Matrix::Zero(ns, na);
        Vector d_sum = Vector::Zero(ns), d_sq = Vector::Zero(ns);
        Rng rng(derive_seed(9, static_cast<std::uint64_t>(rep)));
        for (int k = 0; k < draws; ++k) {
            const Sample s = draw_sample(mix, mdp, 0, rng);
            const Matrix delta = dual_gradient(mix, v, s, h).to_dense(ns, na);
            const Vector d = primal_gradient(mu, mix, s, h).to_dense(ns);
            delta_sum += delta;
            delta_sq += delta.cwiseProduct(delta);
            d_sum += d;
            d_sq += d.cwiseProduct(d);
        }
        const Matrix delta_mean = delta_sum / draws;
        const Matrix delta_se = ((delta_sq / draws - delta_mean.cwiseProduct(delta_mean)) / (draws - 1.0)).cwiseSqrt();
        outside += static_cast<int>(((delta_mean - delta_expected).cwiseAbs().array() > 3.0 * delta_se.array()).count());
        const Vector d_mean = d_sum / draws;
        const Vector d_se = ((d_sq / draws - d_mean.cwiseProduct(d_mean)) / (draws - 1.0)).cwiseSqrt();
        outside += static_cast<int>(((d_mean - d_expected).cwiseAbs().array() > 3.0 * d_se.array()).count());
    }
    MESSAGE(outside << " of " << replicates * (ns * na + ns) << " components beyond 3 SE");
    CHECK(outside <= 2);
}

TEST_CASE("iterations keep every agent feasible") {
    Rng gen(10);
    const auto mdp = random_unichain_mdp(4, {2, 2}, 3, gen);
    const HyperParams h = small_hyper(2000, 0.05, 0.5, 1.0, 4.0);
    std::int64_t checked = 0;
    bool feasible = true;
    const std::vector<Observer> observers{[&](const RunView& view) {
        for (const auto& a : view.agents) {
            feasible = feasible && OccupancyMeasure{a.mu}.in_restricted_set(h.tau, 1e-9);
            feasible = feasible && a.v.cwiseAbs().maxCoeff() <= 2.0 * h.t_mix + 1e-12;
        }
        ++checked;
    }};
    run_rmapd(mdp, GraphSchedule::erdos_renyi(3, 0.5, 3), h, RunOptions{11}, observers);
    CHECK(checked == 2000);
    CHECK(feasible);
}

TEST_CASE("null steps leave agents unchanged") {
    Rng gen(12);
    const auto mdp = random_unichain_mdp(3, {2}, 2, gen);
    auto agents = initial_agents(2, 3, 2);
    agents[0].mu = kl_project_to_u(random_simplex(3, 2, gen), 4.0);
    agents[1].mu = kl_project_to_u(random_simplex(3, 2, gen), 4.0);
    agents[0].v << 0.5, -0.5, 1.0;
    const auto before = agents;
    SamplerState sampler(1, 2);
    rmapd_iteration(agents, mdp, WeightMatrix::identity(2), small_hyper(1, 0.0, 0.0), sampler);
    for (int i = 0; i < 2; ++i) {
        CHECK((agents[i].mu - before[i].mu).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(agents[i].v == before[i].v);
    }
}

TEST_CASE("runs are deterministic under a seed") {
    Rng gen(13);
    const auto mdp = random_unichain_mdp(4, {2, 2}, 2, gen);
    const auto schedule = GraphSchedule::erdos_renyi(2, 0.5, 9);
    const HyperParams h = small_hyper(3000, 0.02, 0.1);
    const auto a = run_rmapd(mdp, schedule, h, RunOptions{77});
    const auto b = run_rmapd(mdp, schedule, h, RunOptions{77});
    CHECK(a.mu_hat == b.mu_hat);
    for (std::size_t i = 0; i < a.agents.size(); ++i) {
        CHECK(a.agents[i].mu == b.agents[i].mu);
        CHECK(a.agents[i].v == b.agents[i].v);
    }
    const auto c = run_rmapd(mdp, schedule, h, RunOptions{78});
    CHECK(a.mu_hat != c.mu_hat);
}

TEST_CASE("run boundaries") {
    const auto mdp = oracle::single_state_mdp({0.2, 0.9});
    CHECK_THROWS_AS(run_rmapd(mdp, GraphSchedule::complete(1), small_hyper(0, 0.1, 0.1), RunOptions{}), ParameterError);

    Rng gen(14);
    const auto bigger = random_unichain_mdp(3, {2}, 2, gen);
    const auto one = run_rmapd(bigger, GraphSchedule::ring(2), small_hyper(1, 0.1, 0.1), RunOptions{3});
    CHECK((one.policy.prob - one.policy_average.prob).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("single-state learning concentrates on the best action") {
    const auto mdp = oracle::single_state_mdp({0.2, 0.9, 0.5});
    HyperOverrides overrides;
    overrides.iterations = 10000;
    overrides.shift = 1.0;
    const auto h = resolve_hyperparams(1, 3, 1.0, 1.0, overrides);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto result = run_rmapd(mdp, GraphSchedule::complete(1), h, RunOptions{seed});
        CHECK(average_reward(mdp, result.policy) >= 0.9 - 0.05);
    }
}

TEST_CASE("one agent with identity mixing matches the centralized learner") {
    Rng gen(16);
    const auto mdp = random_unichain_mdp(3, {2}, 1, gen);
    const HyperParams h = small_hyper(1500, 0.05, 0.2);
    const auto decentralized = run_rmapd(mdp, GraphSchedule::complete(1), h, RunOptions{21});
    DiagnosticsOptions diag;
    diag.evaluate_reward = false;
    const auto centralized = centralized_spd(mdp, h, RunOptions{21}, diag);
    CHECK(decentralized.mu_hat == centralized.result.mu_hat);
    CHECK(decentralized.agents[0].v == centralized.result.agents[0].v);
}

TEST_CASE("consensus error scales with the step size") {
    Rng gen(17);
    const auto mdp = random_unichain_mdp(4, {2}, 4, gen);
    const auto schedule = GraphSchedule::ring(4);
    const HyperParams coarse = small_hyper(20000, 0.02, 4.0 * 0.02);
    const HyperParams fine = small_hyper(20000, 0.01, 4.0 * 0.01);
    double mu_coarse = 0.0, mu_fine = 0.0;
    const double v_coarse = time_averaged_consensus_v(mdp, schedule, coarse, 5, mu_coarse);
    const double v_fine = time_averaged_consensus_v(mdp, schedule, fine, 5, mu_fine);
    MESSAGE("value ratio " << v_fine / v_coarse << ", occupancy ratio " << mu_fine / mu_coarse);
    CHECK(v_fine / v_coarse >= 0.3);
    CHECK(v_fine / v_coarse <= 0.7);
    CHECK(mu_fine / mu_coarse >= 0.3);
    CHECK(mu_fine / mu_coarse <= 0.7);
}

}
