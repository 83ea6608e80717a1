#include "marl/harness.hpp"

#include "marl/baselines.hpp"
#include "marl/errors.hpp"
#include "marl/geometry.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace marl {

using nlohmann::json;

namespace {

constexpr long kLpCellLimit = 20000;
constexpr std::int64_t kConnectivityHorizon = 100000;
constexpr int kEstimatePolicies = 32;
constexpr int kEstimateMaxMixing = 100000;

struct Context {
    const RunConfig& config;
    TabularMdp mdp;
    GraphSchedule schedule;
    HyperParams hyper;
    std::optional<LpSolution> lp;
    std::filesystem::path dir;
};

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json hyper_json(const HyperParams& h) {
    return {{"T", h.iterations}, {"M", h.shift}, {"beta", h.beta}, {"alpha", h.alpha}, {"t_mix", h.t_mix},
            {"tau", h.tau}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot open " + path.string() + " for writing");
    file << text;
    if (!file) throw Error("failed writing " + path.string());
}

std::filesystem::path prepare_dir(const std::string& dir) {
    std::filesystem::path path(dir);
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec || !std::filesystem::is_directory(path))
        throw Error("cannot create output directory " + dir + (ec ? ": " + ec.message() : ""));
    return path;
}

std::optional<LpSolution> try_solve_lp(const TabularMdp& mdp) {
    const long cells = static_cast<long>(mdp.num_states()) * mdp.num_actions();
    if (cells > kLpCellLimit) {
        spdlog::info("skipping the exact LP: {} state-action cells", cells);
        return std::nullopt;
    }
    try {
        return solve_lp_exact(mdp);
    } catch (const SolverError& e) {
        spdlog::warn("exact LP failed, reference diagnostics disabled: {}", e.what());
        return std::nullopt;
    }
}

void check_network(const GraphSchedule& schedule, const NetworkConfig& network, std::int64_t horizon) {
    if (schedule.model() != GraphModel::erdos_renyi && schedule.model() != GraphModel::periodic) return;
    const std::int64_t checked = std::min(horizon, kConnectivityHorizon);
    if (!check_window_connectivity(schedule, network.window, checked))
        spdlog::warn("the {} schedule is not connected over every window of B = {} steps (checked {} steps)",
                     to_string(schedule.model()), network.window, checked);
}

Context make_context(const RunConfig& config) {
    TabularMdp mdp = build_environment(config.environment);
    const int n = config.environment.num_agents();
    GraphSchedule schedule = build_schedule(config.network, n, config.seed);
    HyperParams hyper = resolved_hyperparams(config, mdp);
    check_network(schedule, config.network, hyper.iterations);
    auto lp = try_solve_lp(mdp);
    return Context{config, std::move(mdp), std::move(schedule), hyper, std::move(lp),
                   prepare_dir(config.output.dir)};
}

DiagnosticsOptions diagnostics_for(const Context& ctx) {
    DiagnosticsOptions d;
    d.stride = ctx.config.output.stride;
    d.t_mix = ctx.hyper.t_mix;
    if (ctx.lp) d.reference = ctx.lp->reference();
    return d;
}

RunOptions run_options(const Context& ctx) { return RunOptions{ctx.config.seed, ctx.config.algorithm.sampling}; }

json learner_entry(const Context& ctx, const TracedRun& run, const std::string& csv) {
    std::optional<double> final_reward;
    if (!run.trace.rows.empty()) final_reward = run.trace.rows.back().avg_reward_scaled;
    json entry = {{"csv", csv},
                  {"final_avg_reward_scaled", optional_number(final_reward)},
                  {"final_avg_reward_raw",
                   optional_number(final_reward ? std::optional<double>(*final_reward * ctx.mdp.reward_scale())
                                                : std::nullopt)}};
    try {
        entry["policy_average_reward_scaled"] = long_run_reward(ctx.mdp, run.result.policy_average);
    } catch (const Error&) {
        entry["policy_average_reward_scaled"] = nullptr;
    }
    return entry;
}

json write_learner(const Context& ctx, const TracedRun& run, const std::string& name) {
    const std::string csv = name + ".csv";
    write_trace_csv(run.trace, (ctx.dir / csv).string());
    return learner_entry(ctx, run, csv);
}

TracedRun run_decentralized(const Context& ctx) {
    return run_rmapd_traced(ctx.mdp, ctx.schedule, ctx.hyper, run_options(ctx), diagnostics_for(ctx));
}

TracedRun run_centralized(const Context& ctx) {
    return centralized_spd(ctx.mdp, ctx.hyper, run_options(ctx), diagnostics_for(ctx));
}

// Constant baselines get a flat two-row trace spanning the learners' horizon.
RunTrace flat_trace(double reward, double scale, std::int64_t horizon) {
    RunTrace trace;
    for (std::int64_t it : {std::int64_t{0}, horizon}) {
        DiagRow row;
        row.iteration = it;
        row.avg_reward_scaled = reward;
        row.avg_reward_raw = reward * scale;
        trace.rows.push_back(row);
    }
    return trace;
}

json write_iavi(const Context& ctx) {
    const IaviResult iavi = independent_avi(ctx.mdp);
    const double reward = long_run_reward(ctx.mdp, iavi.joint);
    write_trace_csv(flat_trace(reward, ctx.mdp.reward_scale(), ctx.hyper.iterations), (ctx.dir / "iavi.csv").string());
    return {{"csv", "iavi.csv"},
            {"final_avg_reward_scaled", reward},
            {"final_avg_reward_raw", reward * ctx.mdp.reward_scale()},
            {"local_gains", iavi.local_gains}};
}

json write_lp(const Context& ctx) {
    if (!ctx.lp) throw SolverError("the exact LP is unavailable for this environment");
    const double lambda = ctx.lp->lambda;
    write_trace_csv(flat_trace(lambda, ctx.mdp.reward_scale(), ctx.hyper.iterations), (ctx.dir / "lp.csv").string());
    return {{"csv", "lp.csv"},
            {"final_avg_reward_scaled", lambda},
            {"final_avg_reward_raw", lambda * ctx.mdp.reward_scale()},
            {"pivots", ctx.lp->pivots},
            {"value_from_bellman", ctx.lp->value_from_bellman}};
}

json base_summary(const Context& ctx, Command command) {
    static const char* names[] = {"run", "compare", "meta", "estimate"};
    json s = {{"command", names[static_cast<int>(command)]},
              {"config", config_to_json(ctx.config)},
              {"hyperparameters", hyper_json(ctx.hyper)},
              {"num_states", ctx.mdp.num_states()},
              {"num_actions", ctx.mdp.num_actions()},
              {"num_agents", ctx.mdp.num_agents()},
              {"reward_scale", ctx.mdp.reward_scale()}};
    s["lambda_star"] = ctx.lp ? json(ctx.lp->lambda) : json(nullptr);
    return s;
}

json run_command(const Context& ctx) {
    json summary = base_summary(ctx, Command::run);
    json algorithms = json::object();
    switch (ctx.config.algorithm.name) {
    case AlgorithmName::rmapd: algorithms["rmapd"] = write_learner(ctx, run_decentralized(ctx), "rmapd"); break;
    case AlgorithmName::cspd: algorithms["cspd"] = write_learner(ctx, run_centralized(ctx), "cspd"); break;
    case AlgorithmName::iavi: algorithms["iavi"] = write_iavi(ctx); break;
    case AlgorithmName::lp: algorithms["lp"] = write_lp(ctx); break;
    case AlgorithmName::meta: throw InternalError("meta runs are dispatched by execute");
    }
    summary["algorithms"] = algorithms;
    return summary;
}

json compare_command(const Context& ctx) {
    json summary = base_summary(ctx, Command::compare);
    json algorithms = json::object();
    spdlog::info("compare: rmapd");
    algorithms["rmapd"] = write_learner(ctx, run_decentralized(ctx), "rmapd");
    spdlog::info("compare: cspd");
    algorithms["cspd"] = write_learner(ctx, run_centralized(ctx), "cspd");
    spdlog::info("compare: iavi");
    algorithms["iavi"] = write_iavi(ctx);
    algorithms["lp"] = write_lp(ctx);
    summary["algorithms"] = algorithms;
    return summary;
}

std::optional<PerronConstants> perron_constants(const Context& ctx) {
    const int n = ctx.mdp.num_agents();
    const double eta = realized_eta(ctx.schedule, ctx.hyper.iterations);
    if (n < 2 || !(eta > 0.0 && eta < 1.0)) return std::nullopt;
    return proposition1_bound(eta, n, ctx.config.network.window);
}

double initial_lyapunov(const Context& ctx) {
    const auto agents = initial_agents(ctx.mdp.num_agents(), ctx.mdp.num_states(), ctx.mdp.num_actions());
    return lyapunov(agents, ctx.lp->mu, ctx.lp->v, ctx.hyper.t_mix);
}

// Trials target precision epsilon/3. Without an explicit T the count comes
// from the reference formula, which needs the LP and a multi-agent network.
HyperParams meta_trial_hyper(const Context& ctx) {
    if (ctx.config.algorithm.overrides.iterations) return ctx.hyper;
    const auto pc = perron_constants(ctx);
    if (!ctx.lp || !pc) {
        spdlog::warn("meta: reference trial length unavailable, using T = {}", ctx.hyper.iterations);
        return ctx.hyper;
    }
    const double t = reference_iterations(ctx.hyper.tau, ctx.hyper.t_mix, ctx.mdp.num_agents(), initial_lyapunov(ctx),
                                          ctx.mdp.num_states(), ctx.mdp.num_actions(), pc->network_factor(),
                                          ctx.config.meta.epsilon / 3.0, true);
    if (!(t < 9e18)) throw ParameterError("meta: reference trial length overflows; set algorithm.T");
    HyperOverrides overrides = ctx.config.algorithm.overrides;
    overrides.iterations = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t)));
    spdlog::info("meta: trial length T = {} from the reference formula at epsilon/3", *overrides.iterations);
    HyperParams h = resolve_hyperparams(ctx.mdp.num_states(), ctx.mdp.num_actions(), ctx.hyper.t_mix, ctx.hyper.tau,
                                        overrides);
    validate_hyperparams(h);
    return h;
}

json meta_command(const Context& ctx) {
    json summary = base_summary(ctx, Command::meta);
    json trials = json::array();
    const HyperParams trial_hyper = meta_trial_hyper(ctx);
    summary["hyperparameters"] = hyper_json(trial_hyper);
    MetaHooks hooks;
    hooks.run_trial = [&](int trial, std::uint64_t seed) {
        spdlog::info("meta: trial {}", trial);
        RunOptions options = run_options(ctx);
        options.seed = seed;
        TracedRun run = run_rmapd_traced(ctx.mdp, ctx.schedule, trial_hyper, options, diagnostics_for(ctx));
        json entry = write_learner(ctx, run, "meta_trial_" + std::to_string(trial));
        entry["trial"] = trial;
        entry["seed"] = seed;
        trials.push_back(entry);
        return run.result.policy;
    };
    const MetaResult meta = run_meta(ctx.mdp, ctx.schedule, trial_hyper, ctx.config.meta, ctx.config.seed, hooks);
    for (const auto& report : meta.reports) trials[report.trial]["score"] = report.score;

    json selected = {{"trial", meta.selected}};
    try {
        selected["reward_scaled"] = long_run_reward(ctx.mdp, meta.policy);
    } catch (const Error&) {
        selected["reward_scaled"] = nullptr;
    }
    summary["meta"] = {{"K", meta.trials}, {"L", meta.horizon}, {"trials", trials}, {"selected", selected}};
    return summary;
}

Matrix random_policy_table(int num_states, int num_actions, Rng& rng) {
    Matrix p(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) p(s, a) = -std::log(1.0 - rng.uniform());
        p.row(s) /= p.row(s).sum();
    }
    return p;
}

json estimate_command(const Context& ctx) {
    json summary = base_summary(ctx, Command::estimate);
    const int ns = ctx.mdp.num_states();
    const int na = ctx.mdp.num_actions();

    std::vector<Policy> policies{Policy::uniform(ns, na)};
    Rng rng(derive_seed(ctx.config.seed, 0x657374));
    for (int k = 1; k < kEstimatePolicies; ++k) policies.push_back(Policy{random_policy_table(ns, na, rng), {}});

    int worst_mixing = 0;
    bool all_mix = true;
    for (const auto& policy : policies) {
        std::optional<int> t;
        try {
            t = mixing_time(ctx.mdp, policy, kEstimateMaxMixing);
        } catch (const NonUnichainError&) {
            t.reset();
        }
        if (!t) {
            all_mix = false;
            break;
        }
        worst_mixing = std::max(worst_mixing, *t);
    }
    std::optional<double> tau;
    try {
        tau = tau_bound(ctx.mdp, policies);
    } catch (const NonUnichainError&) {
        tau.reset();
    }

    json estimate = {{"sampled_policies", policies.size()},
                     {"mixing_time", all_mix ? json(worst_mixing) : json(nullptr)},
                     {"tau_bound", optional_number(tau)}};

    const double eta = realized_eta(ctx.schedule, ctx.hyper.iterations);
    json network = {{"eta", eta}, {"B", ctx.config.network.window}};
    const auto pc = perron_constants(ctx);
    if (pc) {
        network["gamma"] = pc->gamma;
        network["rho"] = pc->rho;
    }
    network["network_factor"] = pc ? json(pc->network_factor()) : json(nullptr);
    estimate["network"] = network;

    if (ctx.lp && pc) {
        const int n = ctx.mdp.num_agents();
        const double e0 = initial_lyapunov(ctx);
        const double eps = ctx.config.meta.epsilon;
        estimate["lyapunov_initial"] = e0;
        for (const bool sqrt_n : {true, false})
            estimate[sqrt_n ? "reference_iterations_sqrt_n" : "reference_iterations_n"] = reference_iterations(
                ctx.hyper.tau, ctx.hyper.t_mix, n, e0, ns, na, pc->network_factor(), eps, sqrt_n);
    } else {
        estimate["reference_iterations_sqrt_n"] = nullptr;
        estimate["reference_iterations_n"] = nullptr;
    }
    summary["estimate"] = estimate;
    return summary;
}

} // namespace

RunConfig apply_options(RunConfig config, const CommandOptions& options) {
    if (options.seed) config.seed = *options.seed;
    if (options.out) {
        if (options.out->empty()) throw ConfigError("--out must not be empty");
        config.output.dir = *options.out;
    }
    if (options.stride) {
        if (*options.stride < 1) throw ConfigError("--stride must be a positive integer");
        config.output.stride = *options.stride;
    }
    return config;
}

HyperParams resolved_hyperparams(const RunConfig& config, const TabularMdp& mdp) {
    HyperParams h = resolve_hyperparams(mdp.num_states(), mdp.num_actions(), config.algorithm.t_mix,
                                        config.algorithm.tau, config.algorithm.overrides);
    validate_hyperparams(h);
    return h;
}

json execute(Command command, const RunConfig& config) {
    const Context ctx = make_context(config);
    spdlog::info("resolved hyperparameters: {}", hyper_json(ctx.hyper).dump());
    if (ctx.lp) spdlog::info("lambda* = {:.10g}", ctx.lp->lambda);

    json summary;
    switch (command) {
    case Command::run:
        summary = config.algorithm.name == AlgorithmName::meta ? meta_command(ctx) : run_command(ctx);
        break;
    case Command::compare: summary = compare_command(ctx); break;
    case Command::meta: summary = meta_command(ctx); break;
    case Command::estimate: summary = estimate_command(ctx); break;
    }
    write_text(ctx.dir / "summary.json", format_summary(summary));
    return summary;
}

std::string format_summary(const json& summary) { return summary.dump(2) + "\n"; }

} // namespace marl
