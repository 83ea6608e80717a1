#include "marl/diagnostics.hpp"

#include "marl/errors.hpp"
#include "marl/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace marl {

NetworkAverages network_averages(std::span<const AgentState> agents) {
    if (agents.empty()) throw ParameterError("network averages need at least one agent");
    NetworkAverages avg{agents.front().mu, agents.front().v};
    for (std::size_t i = 1; i < agents.size(); ++i) {
        avg.mu_bar += agents[i].mu;
        avg.v_bar += agents[i].v;
    }
    if (agents.size() > 1) {
        const double inv = 1.0 / static_cast<double>(agents.size());
        avg.mu_bar *= inv;
        avg.v_bar *= inv;
    }
    return avg;
}

double lyapunov(std::span<const AgentState> agents, const Matrix& mu_star, const Vector& v_star, double t_mix) {
    if (agents.empty()) throw ParameterError("lyapunov needs at least one agent");
    double kl = 0.0;
    for (const auto& agent : agents) kl += kl_divergence(mu_star, agent.mu);
    kl /= static_cast<double>(agents.size());
    const Vector v_bar = network_averages(agents).v_bar;
    const double ns = static_cast<double>(v_star.size());
    return kl + (v_bar - v_star).squaredNorm() / (2.0 * ns * t_mix * t_mix);
}

namespace {

// sum_a mu(a)^T (I - P_a) v and sum_a mu(a)^T r_a
std::pair<double, double> gap_terms(const Matrix& mu_bar, const Vector& v_star, const TabularMdp& mdp) {
    double flow = 0.0;
    for (int a = 0; a < mdp.num_actions(); ++a) {
        const Vector drift = v_star - mdp.transition(a) * v_star;
        flow += mu_bar.col(a).dot(drift);
    }
    return {flow, mu_bar.cwiseProduct(mdp.global_reward()).sum()};
}

} // namespace

double duality_gap(const Matrix& mu_bar, const Vector& v_star, double lambda_star, const TabularMdp& mdp) {
    const auto [flow, reward] = gap_terms(mu_bar, v_star, mdp);
    return lambda_star + flow + reward;
}

double duality_gap_proofside(const Matrix& mu_bar, const Vector& v_star, double lambda_star,
                             const TabularMdp& mdp) {
    const auto [flow, reward] = gap_terms(mu_bar, v_star, mdp);
    return lambda_star + flow - reward;
}

ConsensusErrors consensus_errors(std::span<const AgentState> agents) {
    if (agents.size() <= 1) return {};
    const auto avg = network_averages(agents);
    ConsensusErrors err;
    double sq = 0.0;
    for (const auto& agent : agents) {
        sq += (agent.v - avg.v_bar).squaredNorm();
        err.occupancy += (agent.mu - avg.mu_bar).cwiseAbs().sum();
    }
    err.value = std::sqrt(sq);
    err.occupancy /= static_cast<double>(agents.size());
    return err;
}

std::optional<double> occupancy_policy_reward(const TabularMdp& mdp, const Matrix& mu) {
    try {
        return long_run_reward(mdp, policy_from_occupancy(mu));
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------

DiagnosticsRecorder::DiagnosticsRecorder(const TabularMdp& mdp, DiagnosticsOptions options,
                                         std::int64_t final_iteration)
    : mdp_(mdp), options_(std::move(options)), final_iteration_(final_iteration) {
    if (options_.stride < 1) throw ParameterError("diagnostics stride must be at least 1");
}

void DiagnosticsRecorder::operator()(const RunView& view) {
    if (view.iteration % options_.stride != 0 && view.iteration != final_iteration_) return;

    DiagRow row;
    row.iteration = view.iteration;
    if (options_.evaluate_reward && view.iteration > 0) {
        const Matrix mu_hat = view.mu_bar_sum / static_cast<double>(view.iteration);
        row.avg_reward_scaled = occupancy_policy_reward(mdp_, mu_hat);
        if (row.avg_reward_scaled) row.avg_reward_raw = *row.avg_reward_scaled * mdp_.reward_scale();
    }
    if (options_.reference) {
        const auto& ref = *options_.reference;
        row.duality_gap_printed = duality_gap(view.mu_bar, ref.v_star, ref.lambda_star, mdp_);
        row.duality_gap_proofside = duality_gap_proofside(view.mu_bar, ref.v_star, ref.lambda_star, mdp_);
        row.lyapunov = lyapunov(view.agents, ref.mu_star, ref.v_star, options_.t_mix);
    }
    const auto cons = consensus_errors(view.agents);
    row.consensus_v = cons.value;
    row.consensus_mu = cons.occupancy;
    trace_.rows.push_back(row);
}

// ---------------------------------------------------------------------------

namespace {

void append_number(std::string& out, const std::optional<double>& x) {
    if (!x) return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *x);
    out += buf;
}

} // namespace

std::string format_trace_csv(const RunTrace& trace) {
    std::string out = kTraceColumns;
    out += '\n';
    for (const auto& row : trace.rows) {
        out += std::to_string(row.iteration);
        for (const auto* col : {&row.avg_reward_scaled, &row.avg_reward_raw, &row.duality_gap_printed,
                                &row.duality_gap_proofside, &row.lyapunov, &row.consensus_v, &row.consensus_mu}) {
            out += ',';
            append_number(out, *col);
        }
        out += '\n';
    }
    return out;
}

void write_trace_csv(const RunTrace& trace, const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot open trace file " + path);
    file << format_trace_csv(trace);
    if (!file) throw Error("failed writing trace file " + path);
}

} // namespace marl
