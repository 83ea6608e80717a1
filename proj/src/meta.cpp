#include "marl/meta.hpp"

#include "marl/errors.hpp"

#include <cmath>

namespace marl {

int default_k(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
    const double k = std::log(delta / 2.0) / std::log(1.0 / 3.0);
    // absorb rounding so exact integers (delta = 2/3) are not bumped up
    return std::max(1, static_cast<int>(std::ceil(k - 1e-12)));
}

std::int64_t default_l(double epsilon, double delta, int trials, double t_mix, double c_l) {
    if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || trials < 1 || !(t_mix > 0.0))
        throw ParameterError("L needs epsilon > 0, delta in (0, 1), K >= 1 and t_mix > 0");
    const double l = std::ceil(c_l * (t_mix / (epsilon * epsilon)) * std::log(4.0 * trials / delta));
    if (!(l >= 1.0)) throw ParameterError("evaluation horizon L must be at least 1 (check c_L)");
    return static_cast<std::int64_t>(l);
}

double reference_iterations(double tau, double t_mix, int num_agents, double lyapunov0, int num_states,
                            int num_actions, double network_factor, double epsilon, bool sqrt_n) {
    const double agents = sqrt_n ? std::sqrt(static_cast<double>(num_agents)) : static_cast<double>(num_agents);
    return tau * tau * t_mix * t_mix * agents * lyapunov0 * num_states * num_actions * network_factor /
           (epsilon * epsilon);
}

double approximate_value_evaluation(const TabularMdp& mdp, const Policy& policy, std::int64_t horizon,
                                    int start_state, Rng& rng) {
    if (horizon < 1) throw ParameterError("evaluation horizon must be at least 1");
    if (start_state < 0 || start_state >= mdp.num_states()) throw ParameterError("start state out of range");
    const int na = mdp.num_actions();
    std::vector<double> row(static_cast<std::size_t>(na));
    int s = start_state;
    double total = 0.0;
    for (std::int64_t t = 0; t < horizon; ++t) {
        for (int a = 0; a < na; ++a) row[a] = policy.prob(s, a);
        const int a = static_cast<int>(rng.sample_index(row));
        total += mdp.global_reward()(s, a);
        s = mdp.sample_next(s, a, rng);
    }
    return total / static_cast<double>(horizon);
}

int select_best_trial(std::span<const double> scores) {
    if (scores.empty()) throw ParameterError("no trials to select from");
    int best = 0;
    for (int k = 1; k < static_cast<int>(scores.size()); ++k)
        if (scores[k] > scores[best]) best = k;
    return best;
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
    return derive_seed(seed, 0x7472690000ULL + static_cast<std::uint64_t>(trial));
}

MetaResult run_meta(const TabularMdp& mdp, const GraphSchedule& schedule, const HyperParams& trial_hyper,
                    const MetaConfig& config, std::uint64_t seed, const MetaHooks& hooks) {
    MetaResult out;
    out.trials = config.trials.value_or(default_k(config.delta));
    if (out.trials < 1) throw ParameterError("K must be at least 1");
    out.horizon = config.horizon.value_or(
        default_l(config.epsilon, config.delta, out.trials, trial_hyper.t_mix, config.horizon_constant));

    std::vector<double> scores;
    for (int k = 0; k < out.trials; ++k) {
        TrialReport report;
        report.trial = k;
        report.seed = trial_seed(seed, k);
        if (hooks.run_trial) {
            report.policy = hooks.run_trial(k, report.seed);
        } else {
            report.policy = run_rmapd(mdp, schedule, trial_hyper, RunOptions{report.seed}).policy;
        }
        Rng eval_rng(derive_seed(report.seed, 0x6576616cULL));
        report.score = hooks.evaluate
                           ? hooks.evaluate(k, report.policy, eval_rng)
                           : approximate_value_evaluation(mdp, report.policy, out.horizon, config.start_state, eval_rng);
        scores.push_back(report.score);
        out.reports.push_back(std::move(report));
    }
    out.selected = select_best_trial(scores);
    out.policy = out.reports[out.selected].policy;
    return out;
}

} // namespace marl
