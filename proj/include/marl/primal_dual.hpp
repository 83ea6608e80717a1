#pragma once

// Decentralized stochastic primal-dual learner for the average-reward LP.
//
// Every agent keeps an occupancy estimate mu_i in U and a value estimate
// v_i in V. One iteration:
//   1. consensus: mu~_i = sum_j w_ij mu_j, v~_i = sum_j w_ij v_j
//   2. sample (s, a) ~ mu~_i, s' ~ P(.|s, a), read r_i(s, a)
//   3. mu_i <- KL-projection onto U of the entropic step from mu~_i
//   4. v_i  <- clip(v~_i + d_i) onto the inf-norm box of radius 2 t_mix

#include "marl/agent_state.hpp"
#include "marl/diagnostics.hpp"
#include "marl/mdp.hpp"
#include "marl/network.hpp"
#include "marl/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace marl {

enum class AlphaRule {
    analysis,    ///< alpha = |S| t_mix^2 beta
    algorithm1,  ///< alpha = |S| t_mix sqrt(log(|S||A|) / (2 |A| T))
};

struct HyperParams {
    std::int64_t iterations = 1;  ///< T
    double shift = 5.0;           ///< M
    double beta = 0.0;            ///< dual step, lives inside the estimator
    double alpha = 0.0;           ///< primal step
    double t_mix = 1.0;
    double tau = 1.0;
};

struct HyperOverrides {
    std::optional<std::int64_t> iterations;
    std::optional<double> shift;
    std::optional<double> beta;
    std::optional<double> alpha;
    AlphaRule alpha_rule = AlphaRule::analysis;
};

/// T = (tau t_mix)^2 |S||A|, M = 4 t_mix + 1,
/// beta = (1/t_mix) sqrt(log(|S||A|) / (2 |S||A| T)), alpha per `rule`.
HyperParams default_hyperparams(int num_states, int num_actions, double t_mix, double tau,
                                AlphaRule rule = AlphaRule::analysis);

/// Defaults with overrides applied; beta and alpha use the overridden T.
HyperParams resolve_hyperparams(int num_states, int num_actions, double t_mix, double tau,
                                const HyperOverrides& overrides);

void validate_hyperparams(const HyperParams& hyper);

struct Sample {
    int state = 0;
    int action = 0;
    int next_state = 0;
    double reward = 0.0;  ///< the sampling agent's local reward
};

/// Single nonzero entry of the dual estimator.
struct CellDelta {
    int state = 0;
    int action = 0;
    double value = 0.0;

    Matrix to_dense(int num_states, int num_actions) const;
};

/// d = coefficient * (e_state - e_next_state).
struct ValueStep {
    int state = 0;
    int next_state = 0;
    double coefficient = 0.0;

    Vector to_dense(int num_states) const;
};

/// Agent states initialized to the uniform occupancy and zero value.
std::vector<AgentState> initial_agents(int num_agents, int num_states, int num_actions);

/// Fills mu_mix and v_mix from a frozen snapshot; only entries with
/// w_ij > 0 are read.
void consensus_round(std::span<AgentState> agents, const WeightMatrix& weights);

/// (s, a) ~ mu_mix scanned in column-major (action-major) order, then s' ~ P.
Sample draw_sample(const Matrix& mu_mix, const TabularMdp& mdp, int agent, Rng& rng);

/// beta (v(s') - v(s) + r - M) / mu~(s, a) at the sampled cell.
CellDelta dual_gradient(const Matrix& mu_mix, const Vector& v, const Sample& sample, const HyperParams& hyper);

/// (mu(s, a) / mu~(s, a)) alpha (e_s - e_s').
ValueStep primal_gradient(const Matrix& mu, const Matrix& mu_mix, const Sample& sample, const HyperParams& hyper);

enum class SamplingMode {
    generative,  ///< (s, a) ~ mu~_i, importance-weighted estimators
    on_policy,   ///< follow the system trajectory, importance weights disabled
};

/// Per-run mutable sampling context: one stream per agent plus an
/// environment stream and system state for on-policy execution.
struct SamplerState {
    std::vector<Rng> agent_rngs;
    Rng env_rng;
    int system_state = 0;
    SamplingMode mode = SamplingMode::generative;

    SamplerState(std::uint64_t seed, int num_agents, SamplingMode mode = SamplingMode::generative);
};

/// One synchronous iteration over all agents.
void rmapd_iteration(std::span<AgentState> agents, const TabularMdp& mdp, const WeightMatrix& weights,
                     const HyperParams& hyper, SamplerState& sampler);

struct RmapdResult {
    Matrix mu_hat;               ///< (1/T) sum_{t=1..T} mu_bar^t
    Policy policy;               ///< policy_from_occupancy(mu_hat)
    Policy policy_average;       ///< (1/T) sum_{t=1..T} policy_from_occupancy(mu_bar^t)
    std::vector<AgentState> agents;
};

struct RunOptions {
    std::uint64_t seed = 0;
    SamplingMode mode = SamplingMode::generative;
};

RmapdResult run_rmapd(const TabularMdp& mdp, const GraphSchedule& schedule, const HyperParams& hyper,
                      const RunOptions& options, std::span<const Observer> observers = {});

struct TracedRun {
    RmapdResult result;
    RunTrace trace;
};

/// run_rmapd with a DiagnosticsRecorder attached.
TracedRun run_rmapd_traced(const TabularMdp& mdp, const GraphSchedule& schedule, const HyperParams& hyper,
                           const RunOptions& options, DiagnosticsOptions diagnostics,
                           std::span<const Observer> extra_observers = {});

} // namespace marl
