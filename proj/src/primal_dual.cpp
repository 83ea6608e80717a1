#include "marl/primal_dual.hpp"

#include "marl/errors.hpp"
#include "marl/geometry.hpp"

#include <cmath>
#include <string>

namespace marl {

HyperParams default_hyperparams(int num_states, int num_actions, double t_mix, double tau, AlphaRule rule) {
    HyperOverrides overrides;
    overrides.alpha_rule = rule;
    return resolve_hyperparams(num_states, num_actions, t_mix, tau, overrides);
}

HyperParams resolve_hyperparams(int num_states, int num_actions, double t_mix, double tau,
                                const HyperOverrides& overrides) {
    if (num_states < 1 || num_actions < 1) throw ParameterError("|S| and |A| must be positive");
    if (!(t_mix >= 1.0)) throw ParameterError("t_mix must be >= 1");
    if (!(tau >= 1.0)) throw ParameterError("tau must be >= 1");

    const double ns = num_states;
    const double na = num_actions;
    const double nsa = ns * na;

    HyperParams h;
    h.t_mix = t_mix;
    h.tau = tau;
    h.iterations = overrides.iterations.value_or(
        static_cast<std::int64_t>(std::ceil((tau * t_mix) * (tau * t_mix) * nsa)));
    if (h.iterations < 1) throw ParameterError("T must be at least 1");
    const double big_t = static_cast<double>(h.iterations);

    h.shift = overrides.shift.value_or(4.0 * t_mix + 1.0);
    h.beta = overrides.beta.value_or(std::sqrt(std::log(nsa) / (2.0 * nsa * big_t)) / t_mix);
    if (overrides.alpha) {
        h.alpha = *overrides.alpha;
    } else if (overrides.alpha_rule == AlphaRule::analysis) {
        h.alpha = ns * t_mix * t_mix * h.beta;
    } else {
        h.alpha = ns * t_mix * std::sqrt(std::log(nsa) / (2.0 * na * big_t));
    }
    validate_hyperparams(h);
    return h;
}

void validate_hyperparams(const HyperParams& h) {
    if (h.iterations < 1) throw ParameterError("T must be at least 1");
    if (!(h.beta >= 0.0) || !(h.alpha >= 0.0)) throw ParameterError("step sizes must be nonnegative");
    if (!(h.t_mix >= 1.0)) throw ParameterError("t_mix must be >= 1");
    if (!(h.tau >= 1.0)) throw ParameterError("tau must be >= 1");
    if (!std::isfinite(h.shift)) throw ParameterError("shift M must be finite");
}

Matrix CellDelta::to_dense(int num_states, int num_actions) const {
    Matrix d = Matrix::Zero(num_states, num_actions);
    d(state, action) = value;
    return d;
}

Vector ValueStep::to_dense(int num_states) const {
    Vector d = Vector::Zero(num_states);
    d(state) += coefficient;
    d(next_state) -= coefficient;
    return d;
}

std::vector<AgentState> initial_agents(int num_agents, int num_states, int num_actions) {
    std::vector<AgentState> agents;
    agents.reserve(static_cast<std::size_t>(num_agents));
    for (int i = 0; i < num_agents; ++i) {
        AgentState a;
        a.index = i;
        a.mu = OccupancyMeasure::uniform(num_states, num_actions).mass;
        a.v = Vector::Zero(num_states);
        a.mu_mix = a.mu;
        a.v_mix = a.v;
        agents.push_back(std::move(a));
    }
    return agents;
}

void consensus_round(std::span<AgentState> agents, const WeightMatrix& weights) {
    const int n = static_cast<int>(agents.size());
    if (weights.size() != n) throw ParameterError("weight matrix size does not match the agent count");
    for (const auto& a : agents) {
        if (a.mu.rows() != agents.front().mu.rows() || a.mu.cols() != agents.front().mu.cols() ||
            a.v.size() != agents.front().v.size())
            throw ParameterError("agent states differ in dimension");
    }
    // mu_mix / v_mix are separate buffers, so reading mu_j while writing
    // mu_mix_i sees the frozen snapshot.
    for (int i = 0; i < n; ++i) {
        auto& self = agents[i];
        bool first = true;
        for (int j = 0; j < n; ++j) {
            const double w = weights(i, j);
            if (w <= 0.0) continue;
            if (first) {
                self.mu_mix = w * agents[j].mu;
                self.v_mix = w * agents[j].v;
                first = false;
            } else {
                self.mu_mix += w * agents[j].mu;
                self.v_mix += w * agents[j].v;
            }
        }
        if (first) throw ParameterError("agent " + std::to_string(i) + " has no positive weights");
    }
}

Sample draw_sample(const Matrix& mu_mix, const TabularMdp& mdp, int agent, Rng& rng) {
    const int ns = mdp.num_states();
    const std::size_t cell =
        rng.sample_index(std::span<const double>(mu_mix.data(), static_cast<std::size_t>(mu_mix.size())));
    Sample s;
    s.state = static_cast<int>(cell % static_cast<std::size_t>(ns));
    s.action = static_cast<int>(cell / static_cast<std::size_t>(ns));
    s.next_state = mdp.sample_next(s.state, s.action, rng);
    s.reward = mdp.local_reward(agent)(s.state, s.action);
    return s;
}

namespace {

CellDelta dual_step(const Matrix& mu_mix, const Vector& v, const Sample& sample, const HyperParams& hyper,
                    bool importance_weighted) {
    const double weight = mu_mix(sample.state, sample.action);
    if (importance_weighted && !(weight > 0.0))
        throw InternalError("sampled a cell with zero mixed occupancy");
    const double advantage = v(sample.next_state) - v(sample.state) + sample.reward - hyper.shift;
    const double value = hyper.beta * advantage / (importance_weighted ? weight : 1.0);
    return {sample.state, sample.action, value};
}

ValueStep primal_step(const Matrix& mu, const Matrix& mu_mix, const Sample& sample, const HyperParams& hyper,
                      bool importance_weighted) {
    if (sample.state == sample.next_state) return {sample.state, sample.next_state, 0.0};
    double ratio = 1.0;
    if (importance_weighted) {
        const double weight = mu_mix(sample.state, sample.action);
        if (!(weight > 0.0)) throw InternalError("sampled a cell with zero mixed occupancy");
        ratio = mu(sample.state, sample.action) / weight;
    }
    return {sample.state, sample.next_state, ratio * hyper.alpha};
}

void apply_updates(AgentState& agent, const CellDelta& delta, const ValueStep& step, const HyperParams& hyper) {
    agent.mu = agent.mu_mix;
    entropic_step_inplace(agent.mu, delta.state, delta.action, delta.value);
    kl_project_to_u_inplace(agent.mu, hyper.tau);

    agent.v = agent.v_mix;
    agent.v(step.state) += step.coefficient;
    agent.v(step.next_state) -= step.coefficient;
    const double radius = 2.0 * hyper.t_mix;
    agent.v(step.state) = std::clamp(agent.v(step.state), -radius, radius);
    agent.v(step.next_state) = std::clamp(agent.v(step.next_state), -radius, radius);
    // v_mix is a convex combination of points in the box, so only the two
    // touched coordinates can leave it.
}

} // namespace

CellDelta dual_gradient(const Matrix& mu_mix, const Vector& v, const Sample& sample, const HyperParams& hyper) {
    return dual_step(mu_mix, v, sample, hyper, true);
}

ValueStep primal_gradient(const Matrix& mu, const Matrix& mu_mix, const Sample& sample, const HyperParams& hyper) {
    return primal_step(mu, mu_mix, sample, hyper, true);
}

SamplerState::SamplerState(std::uint64_t seed, int num_agents, SamplingMode sampling_mode)
    : env_rng(derive_seed(seed, static_cast<std::uint64_t>(num_agents))), mode(sampling_mode) {
    agent_rngs.reserve(static_cast<std::size_t>(num_agents));
    for (int i = 0; i < num_agents; ++i) agent_rngs.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
}

void rmapd_iteration(std::span<AgentState> agents, const TabularMdp& mdp, const WeightMatrix& weights,
                     const HyperParams& hyper, SamplerState& sampler) {
    const int n = static_cast<int>(agents.size());
    if (n != mdp.num_agents()) throw ParameterError("agent count does not match the MDP's reward streams");
    if (static_cast<int>(sampler.agent_rngs.size()) != n) throw ParameterError("one RNG stream per agent is required");

    consensus_round(agents, weights);

    if (sampler.mode == SamplingMode::generative) {
        for (int i = 0; i < n; ++i) {
            auto& agent = agents[i];
            const Sample sample = draw_sample(agent.mu_mix, mdp, i, sampler.agent_rngs[i]);
            const CellDelta delta = dual_step(agent.mu_mix, agent.v, sample, hyper, true);
            const ValueStep step = primal_step(agent.mu, agent.mu_mix, sample, hyper, true);
            apply_updates(agent, delta, step, hyper);
        }
        return;
    }

    // On-policy: every agent acts from its own mixed estimate at the shared
    // system state; the environment takes one joint step.
    const int s = sampler.system_state;
    const auto& factors = mdp.action_factors();
    int joint = 0;
    if (static_cast<int>(factors.size()) == n) {
        std::vector<int> parts(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            Vector local = Vector::Zero(factors[i]);
            for (int a = 0; a < mdp.num_actions(); ++a)
                local(decode_joint_action(a, factors)[i]) += agents[i].mu_mix(s, a);
            parts[i] = static_cast<int>(
                sampler.agent_rngs[i].sample_index(std::span<const double>(local.data(), local.size())));
        }
        joint = encode_joint_action(parts, factors);
    } else {
        const Vector row = agents[0].mu_mix.row(s).transpose();
        joint = static_cast<int>(sampler.agent_rngs[0].sample_index(std::span<const double>(row.data(), row.size())));
    }
    const int next = mdp.sample_next(s, joint, sampler.env_rng);
    for (int i = 0; i < n; ++i) {
        auto& agent = agents[i];
        const Sample sample{s, joint, next, mdp.local_reward(i)(s, joint)};
        const CellDelta delta = dual_step(agent.mu_mix, agent.v, sample, hyper, false);
        const ValueStep step = primal_step(agent.mu, agent.mu_mix, sample, hyper, false);
        apply_updates(agent, delta, step, hyper);
    }
    sampler.system_state = next;
}

RmapdResult run_rmapd(const TabularMdp& mdp, const GraphSchedule& schedule, const HyperParams& hyper,
                      const RunOptions& options, std::span<const Observer> observers) {
    validate_hyperparams(hyper);
    const int n = mdp.num_agents();
    if (schedule.num_nodes() != n)
        throw ParameterError("graph has " + std::to_string(schedule.num_nodes()) + " nodes but the MDP has " +
                             std::to_string(n) + " agents");
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();

    auto agents = initial_agents(n, ns, na);
    SamplerState sampler(options.seed, n, options.mode);

    const bool static_graph = schedule.model() == GraphModel::complete || schedule.model() == GraphModel::ring;
    std::optional<WeightMatrix> fixed;
    if (static_graph) fixed = schedule.weights_at(0);

    Matrix mu_bar_sum = Matrix::Zero(ns, na);
    Matrix policy_sum = Matrix::Zero(ns, na);
    for (std::int64_t t = 0; t < hyper.iterations; ++t) {
        if (static_graph) {
            rmapd_iteration(agents, mdp, *fixed, hyper, sampler);
        } else {
            rmapd_iteration(agents, mdp, schedule.weights_at(t), hyper, sampler);
        }
        const auto avg = network_averages(agents);
        mu_bar_sum += avg.mu_bar;
        policy_sum += policy_from_occupancy(avg.mu_bar).prob;
        const RunView view{t + 1, agents, avg.mu_bar, avg.v_bar, mu_bar_sum};
        for (const auto& obs : observers) obs(view);
    }

    const double inv_t = 1.0 / static_cast<double>(hyper.iterations);
    RmapdResult result;
    result.mu_hat = mu_bar_sum * inv_t;
    result.policy = policy_from_occupancy(result.mu_hat);
    result.policy_average = Policy{policy_sum * inv_t, {}};
    result.agents = std::move(agents);
    return result;
}

TracedRun run_rmapd_traced(const TabularMdp& mdp, const GraphSchedule& schedule, const HyperParams& hyper,
                           const RunOptions& options, DiagnosticsOptions diagnostics,
                           std::span<const Observer> extra_observers) {
    DiagnosticsRecorder recorder(mdp, std::move(diagnostics), hyper.iterations);
    std::vector<Observer> observers{recorder.observer()};
    observers.insert(observers.end(), extra_observers.begin(), extra_observers.end());
    auto result = run_rmapd(mdp, schedule, hyper, options, observers);
    return {std::move(result), recorder.take_trace()};
}

} // namespace marl
