#pragma once

#include "marl/rng.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace marl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One entry of a sparse transition row.
struct Successor {
    int state;
    double prob;
};

/**
 * Tabular multi-agent MDP with a joint state and a joint action.
 *
 * Joint actions are encoded lexicographically over the per-agent action
 * factors with agent 0 most significant. Each agent owns a local reward
 * table r_i(s, a) in [0, 1]; the team reward is their mean.
 *
 * `reward_scale` records the factor that maps stored rewards back to the
 * environment's raw units (raw = scale * stored).
 */
class TabularMdp {
public:
    /// \param transitions one |S|x|S| row-stochastic matrix per joint action
    /// \param local_rewards one |S|x|A| table per agent
    /// \param action_factors per-agent action counts; empty means a single
    ///        factor of size |A|
    TabularMdp(std::vector<Matrix> transitions, std::vector<Matrix> local_rewards,
               std::vector<int> action_factors = {}, double reward_scale = 1.0);

    int num_states() const { return num_states_; }
    int num_actions() const { return static_cast<int>(transitions_.size()); }
    int num_agents() const { return static_cast<int>(local_rewards_.size()); }
    const std::vector<int>& action_factors() const { return action_factors_; }
    double reward_scale() const { return reward_scale_; }

    const Matrix& transition(int action) const { return transitions_[action]; }
    const Matrix& local_reward(int agent) const { return local_rewards_[agent]; }
    /// r(s, a) = (1/n) sum_i r_i(s, a)
    const Matrix& global_reward() const { return global_reward_; }

    std::span<const Successor> successors(int state, int action) const {
        const auto& row = successors_[static_cast<std::size_t>(action) * num_states_ + state];
        return {row.data(), row.size()};
    }

    /// Draw s' ~ P[a][s][.] from the sparse successor list.
    int sample_next(int state, int action, Rng& rng) const;

    /// Same dynamics with a single reward stream equal to the team reward.
    TabularMdp with_aggregated_reward() const;

private:
    int num_states_ = 0;
    std::vector<Matrix> transitions_;
    std::vector<Matrix> local_rewards_;
    std::vector<int> action_factors_;
    double reward_scale_ = 1.0;
    Matrix global_reward_;
    std::vector<std::vector<Successor>> successors_;
};

/// Stochastic policy over joint actions, optionally with per-agent factors.
struct Policy {
    Matrix prob;                  ///< |S| x |A|, rows sum to one
    std::vector<Matrix> factors;  ///< optional, factor i is |S| x |A_i|

    int num_states() const { return static_cast<int>(prob.rows()); }
    int num_actions() const { return static_cast<int>(prob.cols()); }

    static Policy uniform(int num_states, int num_actions);
    /// Deterministic policy from one action index per state.
    static Policy deterministic(std::span<const int> actions, int num_actions);
};

/// Throws ParameterError unless rows are stochastic (and factors consistent).
void validate_policy(const Policy& policy, double tol = 1e-12);

std::vector<int> decode_joint_action(int action, std::span<const int> factors);
int encode_joint_action(std::span<const int> per_agent, std::span<const int> factors);

/// Joint policy pi(a|s) = prod_i pi_i(a_i|s).
Policy product_policy(std::vector<Matrix> factors, std::span<const int> action_factors);

// ---------------------------------------------------------------------------
// Grid world

struct RewardCell {
    int row = 0;
    int col = 0;
    std::vector<double> rewards;  ///< raw per-agent rewards
};

struct GridWorldSpec {
    int side = 2;
    int num_agents = 2;
    double reward_scale = 10.0;
    std::vector<RewardCell> reward_cells;

    /// Two agents: (8, 5) in the top-left cell and (5, 10) in the bottom-right.
    static GridWorldSpec cooperative_navigation(int side);
};

enum class Move { up = 0, right = 1, down = 2, left = 3 };

/// Joint state index of a tuple of cells (row * side + col), agent 0 most significant.
int grid_state_index(std::span<const int> cells, int side);
std::vector<int> grid_cells(int state, int side, int num_agents);

/// Deterministic grid world; moves off the grid leave the agent in place.
/// A reward cell pays its vector only when every agent occupies it.
TabularMdp build_grid_world(const GridWorldSpec& spec);

// ---------------------------------------------------------------------------
// Generators and evaluation

/// Rows ~ Dirichlet(1) with a 1e-3 uniform floor, rewards ~ U[0,1].
TabularMdp random_unichain_mdp(int num_states, std::vector<int> action_factors, int num_agents,
                               Rng& rng);

struct SampledTransition {
    int next_state;
    std::vector<double> rewards;  ///< per-agent local rewards r_i(s, a)
};

SampledTransition sample_transition(const TabularMdp& mdp, int state, int action, Rng& rng);

/// P^pi[s][s'] = sum_a pi(a|s) P[a][s][s'].
Matrix policy_transition_matrix(const TabularMdp& mdp, const Policy& policy);

/// Solves xi^T P = xi^T, sum(xi) = 1. Throws NonUnichainError when the
/// solution is not unique or carries negative mass.
Vector stationary_distribution(const Matrix& transition);

/// r^pi(s) = sum_a pi(a|s) r(s, a) for the team reward.
Vector policy_reward(const TabularMdp& mdp, const Policy& policy);

/// Long-run team reward (stored units) of a unichain policy.
double average_reward(const TabularMdp& mdp, const Policy& policy);

/// lim (1/N) sum_{t<N} P^t, via repeated squaring of the lazy chain.
Matrix cesaro_limit(const Matrix& transition);

/// g(s) = long-run team reward from state s; defined for multichain policies.
Vector gain_vector(const TabularMdp& mdp, const Policy& policy);

/// start^T g.
double average_reward_from(const TabularMdp& mdp, const Policy& policy, const Vector& start);

/// average_reward for unichain policies, otherwise the gain averaged over a
/// uniform start state.
double long_run_reward(const TabularMdp& mdp, const Policy& policy);

/// Smallest t with max_s TV((P^t)(s, .), xi) <= 1/4, or nullopt past max_t.
std::optional<int> mixing_time(const Matrix& transition, int max_t);
std::optional<int> mixing_time(const TabularMdp& mdp, const Policy& policy, int max_t);

/// Smallest tau >= 1 with 1/(sqrt(tau)|S|) <= xi(s) <= sqrt(tau)/|S| for all s,
/// i.e. max_s max((|S| xi(s))^2, (|S| xi(s))^-2). nullopt on a zero-mass state.
std::optional<double> tau_from_distribution(const Vector& xi);
std::optional<double> tau_bound(const TabularMdp& mdp, std::span<const Policy> policies);

} // namespace marl
