#pragma once

#include "marl/network.hpp"
#include "marl/primal_dual.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace marl {

struct MetaConfig {
    double epsilon = 0.1;
    double delta = 0.1;
    std::optional<int> trials;             ///< K; defaults to default_k(delta)
    std::optional<std::int64_t> horizon;   ///< L; defaults to default_l(...)
    double horizon_constant = 1.0;         ///< c_L
    int start_state = 0;
};

/// K = ceil(log(delta/2) / log(1/3)).
int default_k(double delta);

/// L = ceil(c_L (t_mix / eps^2) log(4K / delta)).
std::int64_t default_l(double epsilon, double delta, int trials, double t_mix, double c_l);

/// Iteration count tau^2 t_mix^2 f(n) E_0 |S||A| D / eps^2 with f(n) = sqrt(n)
/// or n; D is the network factor (1 + Gamma) / (1 - rho).
double reference_iterations(double tau, double t_mix, int num_agents, double lyapunov0, int num_states,
                            int num_actions, double network_factor, double epsilon, bool sqrt_n);

/// Mean team reward along one L-step trajectory under `policy`.
double approximate_value_evaluation(const TabularMdp& mdp, const Policy& policy, std::int64_t horizon,
                                    int start_state, Rng& rng);

/// Index of the largest score; the lowest index wins ties.
int select_best_trial(std::span<const double> scores);

struct TrialReport {
    int trial = 0;
    std::uint64_t seed = 0;
    double score = 0.0;  ///< Y-bar from the rollout
    Policy policy;
};

struct MetaResult {
    Policy policy;
    int selected = 0;
    int trials = 0;
    std::int64_t horizon = 0;
    std::vector<TrialReport> reports;
};

/// Seed of trial k; depends only on (seed, k).
std::uint64_t trial_seed(std::uint64_t seed, int trial);

/// Injection points; defaults run the learner and the rollout evaluator.
struct MetaHooks {
    std::function<Policy(int trial, std::uint64_t seed)> run_trial;
    std::function<double(int trial, const Policy& policy, Rng& rng)> evaluate;
};

MetaResult run_meta(const TabularMdp& mdp, const GraphSchedule& schedule, const HyperParams& trial_hyper,
                    const MetaConfig& config, std::uint64_t seed, const MetaHooks& hooks = {});

} // namespace marl
