#include "marl/mdp.hpp"

#include "marl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace marl {

namespace {

constexpr double kStochasticTol = 1e-12;

int product(std::span<const int> factors) {
    return std::accumulate(factors.begin(), factors.end(), 1, std::multiplies<>());
}

} // namespace

TabularMdp::TabularMdp(std::vector<Matrix> transitions, std::vector<Matrix> local_rewards,
                       std::vector<int> action_factors, double reward_scale)
    : transitions_(std::move(transitions)),
      local_rewards_(std::move(local_rewards)),
      action_factors_(std::move(action_factors)),
      reward_scale_(reward_scale) {
    if (transitions_.empty()) throw ParameterError("MDP needs at least one action");
    if (local_rewards_.empty()) throw ParameterError("MDP needs at least one reward stream");
    if (!(reward_scale_ > 0.0)) throw ParameterError("reward_scale must be positive");

    num_states_ = static_cast<int>(transitions_.front().rows());
    const int num_actions = static_cast<int>(transitions_.size());
    if (num_states_ < 1) throw ParameterError("MDP needs at least one state");

    if (action_factors_.empty()) action_factors_ = {num_actions};
    if (product(action_factors_) != num_actions)
        throw ParameterError("action factors do not multiply to the joint action count");

    for (int a = 0; a < num_actions; ++a) {
        const Matrix& p = transitions_[a];
        if (p.rows() != num_states_ || p.cols() != num_states_)
            throw ParameterError("transition matrix " + std::to_string(a) + " has wrong shape");
        if ((p.array() < 0.0).any())
            throw ParameterError("negative transition probability for action " + std::to_string(a));
        for (int s = 0; s < num_states_; ++s) {
            if (std::abs(p.row(s).sum() - 1.0) > kStochasticTol)
                throw ParameterError("transition row (a=" + std::to_string(a) +
                                     ", s=" + std::to_string(s) + ") does not sum to one");
        }
    }

    global_reward_ = Matrix::Zero(num_states_, num_actions);
    for (std::size_t i = 0; i < local_rewards_.size(); ++i) {
        const Matrix& r = local_rewards_[i];
        if (r.rows() != num_states_ || r.cols() != num_actions)
            throw ParameterError("reward table " + std::to_string(i) + " has wrong shape");
        if ((r.array() < 0.0).any() || (r.array() > 1.0).any())
            throw ParameterError("local rewards must lie in [0, 1]");
        global_reward_ += r;
    }
    global_reward_ /= static_cast<double>(local_rewards_.size());

    successors_.resize(static_cast<std::size_t>(num_actions) * num_states_);
    for (int a = 0; a < num_actions; ++a) {
        for (int s = 0; s < num_states_; ++s) {
            auto& row = successors_[static_cast<std::size_t>(a) * num_states_ + s];
            for (int sp = 0; sp < num_states_; ++sp) {
                const double p = transitions_[a](s, sp);
                if (p > 0.0) row.push_back({sp, p});
            }
        }
    }
}

int TabularMdp::sample_next(int state, int action, Rng& rng) const {
    const auto row = successors(state, action);
    if (row.size() == 1) return row.front().state;
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& succ : row) {
        acc += succ.prob;
        if (u < acc) return succ.state;
    }
    return row.back().state;
}

TabularMdp TabularMdp::with_aggregated_reward() const {
    return TabularMdp(transitions_, {global_reward_}, action_factors_, reward_scale_);
}

// ---------------------------------------------------------------------------

Policy Policy::uniform(int num_states, int num_actions) {
    return Policy{Matrix::Constant(num_states, num_actions, 1.0 / num_actions), {}};
}

Policy Policy::deterministic(std::span<const int> actions, int num_actions) {
    Policy pi{Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions), {}};
    for (std::size_t s = 0; s < actions.size(); ++s) pi.prob(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    return pi;
}

void validate_policy(const Policy& policy, double tol) {
    if ((policy.prob.array() < 0.0).any()) throw ParameterError("policy has negative entries");
    for (Eigen::Index s = 0; s < policy.prob.rows(); ++s) {
        if (std::abs(policy.prob.row(s).sum() - 1.0) > tol)
            throw ParameterError("policy row " + std::to_string(s) + " does not sum to one");
    }
    if (policy.factors.empty()) return;
    std::vector<int> sizes;
    for (const auto& f : policy.factors) sizes.push_back(static_cast<int>(f.cols()));
    const Policy joint = product_policy(policy.factors, sizes);
    if (joint.prob.rows() != policy.prob.rows() || joint.prob.cols() != policy.prob.cols() ||
        (joint.prob - policy.prob).cwiseAbs().maxCoeff() > 1e-9)
        throw ParameterError("policy factors are inconsistent with the joint table");
}

std::vector<int> decode_joint_action(int action, std::span<const int> factors) {
    std::vector<int> out(factors.size());
    for (std::size_t k = factors.size(); k-- > 0;) {
        out[k] = action % factors[k];
        action /= factors[k];
    }
    return out;
}

int encode_joint_action(std::span<const int> per_agent, std::span<const int> factors) {
    int a = 0;
    for (std::size_t k = 0; k < factors.size(); ++k) a = a * factors[k] + per_agent[k];
    return a;
}

Policy product_policy(std::vector<Matrix> factors, std::span<const int> action_factors) {
    if (factors.size() != action_factors.size())
        throw ParameterError("one policy factor per agent is required");
    const Eigen::Index num_states = factors.front().rows();
    const int num_actions = product(action_factors);
    Matrix joint(num_states, num_actions);
    for (int a = 0; a < num_actions; ++a) {
        const auto parts = decode_joint_action(a, action_factors);
        Vector col = Vector::Ones(num_states);
        for (std::size_t i = 0; i < parts.size(); ++i) col.array() *= factors[i].col(parts[i]).array();
        joint.col(a) = col;
    }
    return Policy{std::move(joint), std::move(factors)};
}

// ---------------------------------------------------------------------------
// Grid world

GridWorldSpec GridWorldSpec::cooperative_navigation(int side) {
    GridWorldSpec spec;
    spec.side = side;
    spec.num_agents = 2;
    spec.reward_scale = 10.0;
    spec.reward_cells = {{0, 0, {8.0, 5.0}}, {side - 1, side - 1, {5.0, 10.0}}};
    return spec;
}

int grid_state_index(std::span<const int> cells, int side) {
    int s = 0;
    for (int c : cells) s = s * side * side + c;
    return s;
}

std::vector<int> grid_cells(int state, int side, int num_agents) {
    const int cells = side * side;
    std::vector<int> out(static_cast<std::size_t>(num_agents));
    for (int k = num_agents; k-- > 0;) {
        out[static_cast<std::size_t>(k)] = state % cells;
        state /= cells;
    }
    return out;
}

namespace {

int apply_move(int cell, int move, int side) {
    int row = cell / side;
    int col = cell % side;
    switch (static_cast<Move>(move)) {
    case Move::up: row = std::max(row - 1, 0); break;
    case Move::right: col = std::min(col + 1, side - 1); break;
    case Move::down: row = std::min(row + 1, side - 1); break;
    case Move::left: col = std::max(col - 1, 0); break;
    }
    return row * side + col;
}

} // namespace

TabularMdp build_grid_world(const GridWorldSpec& spec) {
    const int m = spec.side;
    const int n = spec.num_agents;
    if (m < 2) throw ConfigError("grid side must be at least 2");
    if (n < 1) throw ConfigError("grid needs at least one agent");
    if (!(spec.reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");

    const int cells = m * m;
    int num_states = 1;
    int num_actions = 1;
    for (int i = 0; i < n; ++i) {
        num_states *= cells;
        num_actions *= 4;
    }
    const std::vector<int> factors(static_cast<std::size_t>(n), 4);

    // per-cell reward vector, already scaled
    std::vector<std::vector<double>> cell_reward(static_cast<std::size_t>(cells));
    for (const auto& rc : spec.reward_cells) {
        if (rc.row < 0 || rc.row >= m || rc.col < 0 || rc.col >= m)
            throw ConfigError("reward cell (" + std::to_string(rc.row) + ", " + std::to_string(rc.col) +
                              ") lies outside the grid");
        if (static_cast<int>(rc.rewards.size()) != n)
            throw ConfigError("reward cell vector must have one entry per agent");
        std::vector<double> scaled;
        for (double r : rc.rewards) {
            if (r < 0.0 || r > spec.reward_scale)
                throw ConfigError("reward cell entry outside [0, reward_scale]");
            scaled.push_back(r / spec.reward_scale);
        }
        cell_reward[static_cast<std::size_t>(rc.row * m + rc.col)] = std::move(scaled);
    }

    std::vector<Matrix> transitions(static_cast<std::size_t>(num_actions),
                                    Matrix::Zero(num_states, num_states));
    std::vector<Matrix> rewards(static_cast<std::size_t>(n), Matrix::Zero(num_states, num_actions));

    std::vector<int> next(static_cast<std::size_t>(n));
    for (int s = 0; s < num_states; ++s) {
        const auto pos = grid_cells(s, m, n);
        const bool together = std::all_of(pos.begin(), pos.end(), [&](int c) { return c == pos[0]; });
        const auto& payout = cell_reward[static_cast<std::size_t>(pos[0])];
        for (int a = 0; a < num_actions; ++a) {
            const auto moves = decode_joint_action(a, factors);
            for (int i = 0; i < n; ++i) next[i] = apply_move(pos[i], moves[i], m);
            transitions[a](s, grid_state_index(next, m)) = 1.0;
            if (together && !payout.empty()) {
                for (int i = 0; i < n; ++i) rewards[i](s, a) = payout[i];
            }
        }
    }
    return TabularMdp(std::move(transitions), std::move(rewards), factors, spec.reward_scale);
}

// ---------------------------------------------------------------------------

TabularMdp random_unichain_mdp(int num_states, std::vector<int> action_factors, int num_agents, Rng& rng) {
    if (num_states < 1 || num_agents < 1) throw ParameterError("random MDP needs states and agents");
    const int num_actions = product(action_factors);
    constexpr double floor = 1e-3;

    std::vector<Matrix> transitions;
    for (int a = 0; a < num_actions; ++a) {
        Matrix p(num_states, num_states);
        for (int s = 0; s < num_states; ++s) {
            // Dirichlet(1) row via normalized exponentials
            for (int sp = 0; sp < num_states; ++sp) p(s, sp) = -std::log(1.0 - rng.uniform());
            p.row(s) /= p.row(s).sum();
            p.row(s).array() += floor;
            p.row(s) /= p.row(s).sum();
        }
        transitions.push_back(std::move(p));
    }
    std::vector<Matrix> rewards;
    for (int i = 0; i < num_agents; ++i) {
        Matrix r(num_states, num_actions);
        for (int s = 0; s < num_states; ++s)
            for (int a = 0; a < num_actions; ++a) r(s, a) = rng.uniform();
        rewards.push_back(std::move(r));
    }
    return TabularMdp(std::move(transitions), std::move(rewards), std::move(action_factors));
}

SampledTransition sample_transition(const TabularMdp& mdp, int state, int action, Rng& rng) {
    if (state < 0 || state >= mdp.num_states()) throw ParameterError("state index out of range");
    if (action < 0 || action >= mdp.num_actions()) throw ParameterError("action index out of range");
    SampledTransition out{mdp.sample_next(state, action, rng), {}};
    out.rewards.reserve(static_cast<std::size_t>(mdp.num_agents()));
    for (int i = 0; i < mdp.num_agents(); ++i) out.rewards.push_back(mdp.local_reward(i)(state, action));
    return out;
}

Matrix policy_transition_matrix(const TabularMdp& mdp, const Policy& policy) {
    const int ns = mdp.num_states();
    if (policy.num_states() != ns || policy.num_actions() != mdp.num_actions())
        throw ParameterError("policy shape does not match the MDP");
    Matrix p = Matrix::Zero(ns, ns);
    for (int a = 0; a < mdp.num_actions(); ++a) p += policy.prob.col(a).asDiagonal() * mdp.transition(a);
    return p;
}

Vector stationary_distribution(const Matrix& transition) {
    const Eigen::Index n = transition.rows();
    if (transition.cols() != n) throw ParameterError("transition matrix must be square");
    // [P^T - I; 1^T] xi = [0; 1]
    Matrix system(n + 1, n);
    system.topRows(n) = transition.transpose() - Matrix::Identity(n, n);
    system.row(n).setOnes();
    Vector rhs = Vector::Zero(n + 1);
    rhs(n) = 1.0;

    Eigen::ColPivHouseholderQR<Matrix> qr(system);
    qr.setThreshold(1e-10);
    if (qr.rank() < n) throw NonUnichainError("stationary distribution is not unique");
    Vector xi = qr.solve(rhs);
    if ((system * xi - rhs).cwiseAbs().maxCoeff() > 1e-9)
        throw NonUnichainError("stationary equations are inconsistent");
    if (xi.minCoeff() < -1e-8) throw NonUnichainError("stationary solve produced negative mass");
    xi = xi.cwiseMax(0.0);
    xi /= xi.sum();
    return xi;
}

Vector policy_reward(const TabularMdp& mdp, const Policy& policy) {
    return policy.prob.cwiseProduct(mdp.global_reward()).rowwise().sum();
}

double average_reward(const TabularMdp& mdp, const Policy& policy) {
    const Vector xi = stationary_distribution(policy_transition_matrix(mdp, policy));
    return xi.dot(policy_reward(mdp, policy));
}

Matrix cesaro_limit(const Matrix& transition) {
    const Eigen::Index n = transition.rows();
    if (transition.cols() != n) throw ParameterError("transition matrix must be square");
    // The lazy chain (I + P) / 2 has the same Cesaro limit and is aperiodic.
    Matrix power = 0.5 * (Matrix::Identity(n, n) + transition);
    for (int k = 0; k < 64; ++k) {
        Matrix next = power * power;
        const double change = (next - power).cwiseAbs().maxCoeff();
        power = std::move(next);
        if (change < 1e-15) break;
    }
    return power;
}

Vector gain_vector(const TabularMdp& mdp, const Policy& policy) {
    return cesaro_limit(policy_transition_matrix(mdp, policy)) * policy_reward(mdp, policy);
}

double average_reward_from(const TabularMdp& mdp, const Policy& policy, const Vector& start) {
    if (start.size() != mdp.num_states()) throw ParameterError("start distribution has the wrong size");
    return start.dot(gain_vector(mdp, policy));
}

double long_run_reward(const TabularMdp& mdp, const Policy& policy) {
    try {
        return average_reward(mdp, policy);
    } catch (const NonUnichainError&) {
        return gain_vector(mdp, policy).mean();
    }
}

std::optional<int> mixing_time(const Matrix& transition, int max_t) {
    const Vector xi = stationary_distribution(transition);
    Matrix power = transition;
    for (int t = 1; t <= max_t; ++t) {
        if (t > 1) power = power * transition;
        double worst = 0.0;
        for (Eigen::Index s = 0; s < power.rows(); ++s)
            worst = std::max(worst, 0.5 * (power.row(s).transpose() - xi).cwiseAbs().sum());
        if (worst <= 0.25) return t;
    }
    return std::nullopt;
}

std::optional<int> mixing_time(const TabularMdp& mdp, const Policy& policy, int max_t) {
    return mixing_time(policy_transition_matrix(mdp, policy), max_t);
}

std::optional<double> tau_from_distribution(const Vector& xi) {
    const double ns = static_cast<double>(xi.size());
    // solver round-off leaves absorbing-chain transients near 1e-17
    constexpr double kZeroMass = 1e-12;
    double tau = 1.0;
    for (Eigen::Index s = 0; s < xi.size(); ++s) {
        if (xi(s) <= kZeroMass) return std::nullopt;
        const double ratio = ns * xi(s);
        tau = std::max({tau, ratio * ratio, 1.0 / (ratio * ratio)});
    }
    return tau;
}

std::optional<double> tau_bound(const TabularMdp& mdp, std::span<const Policy> policies) {
    double tau = 1.0;
    for (const auto& pi : policies) {
        const auto t = tau_from_distribution(stationary_distribution(policy_transition_matrix(mdp, pi)));
        if (!t) return std::nullopt;
        tau = std::max(tau, *t);
    }
    return tau;
}

} // namespace marl
