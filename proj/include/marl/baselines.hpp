#pragma once

#include "marl/diagnostics.hpp"
#include "marl/mdp.hpp"
#include "marl/primal_dual.hpp"

#include <vector>

namespace marl {

struct LpSolution {
    Matrix mu;             ///< optimal occupancy mu*
    double lambda = 0.0;   ///< optimal average reward
    Vector v;              ///< differential value, normalized so xi*^T v = 0
    Vector xi;             ///< state marginal of mu*
    bool value_from_bellman = false;  ///< duals were not Bellman-tight
    int pivots = 0;

    OptimalReference reference() const { return {mu, v, lambda}; }
};

/// Exact occupancy LP: max sum mu r, flow balance, simplex, mu >= 0.
/// v* comes from the duals of the flow rows, or from relative value
/// iteration when those duals do not satisfy the Bellman equation.
LpSolution solve_lp_exact(const TabularMdp& mdp);

struct BellmanSolution {
    double lambda = 0.0;
    Vector v;
    std::vector<int> greedy;  ///< argmax action per state, lowest index on ties
    int sweeps = 0;
};

/// Relative value iteration on the team reward, referenced at state 0.
BellmanSolution solve_bellman(const TabularMdp& mdp, double tol = 1e-12, int max_iter = 1000000);

/// Same iteration on explicit per-action matrices and an |S| x |A| reward.
BellmanSolution relative_value_iteration(std::span<const Matrix> transitions, const Matrix& reward, double tol,
                                         int max_iter);

struct BruteForceResult {
    double lambda = 0.0;
    Policy policy;
};

/// Enumerates every deterministic stationary policy; refuses when |A|^|S| > 1e6.
BruteForceResult brute_force_optimal(const TabularMdp& mdp);

/// Single learner on the team reward over the joint action with identity mixing.
TracedRun centralized_spd(const TabularMdp& mdp, const HyperParams& hyper, const RunOptions& options,
                          DiagnosticsOptions diagnostics);

struct IaviResult {
    std::vector<Matrix> local_policies;  ///< agent i: |S| x |A_i|, deterministic
    Policy joint;                        ///< product of the local policies
    std::vector<double> local_gains;     ///< each agent's own optimal gain in its induced MDP
};

/// Each agent runs relative value iteration on its own reward, treating the
/// other agents' actions as uniformly random.
IaviResult independent_avi(const TabularMdp& mdp, double tol = 1e-12, int max_iter = 1000000);

} // namespace marl
