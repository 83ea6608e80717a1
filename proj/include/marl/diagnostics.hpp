#pragma once

#include "marl/agent_state.hpp"
#include "marl/mdp.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace marl {

struct NetworkAverages {
    Matrix mu_bar;
    Vector v_bar;
};

NetworkAverages network_averages(std::span<const AgentState> agents);

/// Optimal primal-dual triple used by the gap and Lyapunov diagnostics.
struct OptimalReference {
    Matrix mu_star;
    Vector v_star;
    double lambda_star = 0.0;
};

/// E_t = (1/n) sum_i KL(mu* || mu_i) + ||v_bar - v*||^2 / (2 |S| t_mix^2).
double lyapunov(std::span<const AgentState> agents, const Matrix& mu_star, const Vector& v_star, double t_mix);

/// D_t = lambda* + sum_a mu_bar(a)^T [(I - P_a) v* + r_a].
double duality_gap(const Matrix& mu_bar, const Vector& v_star, double lambda_star, const TabularMdp& mdp);

/// lambda* + sum_a mu_bar(a)^T [(I - P_a) v* - r_a], the sign used when
/// bounding lambda* - lambda_pi.
double duality_gap_proofside(const Matrix& mu_bar, const Vector& v_star, double lambda_star,
                             const TabularMdp& mdp);

struct ConsensusErrors {
    double value = 0.0;      ///< ||stacked v - replicated v_bar||_2
    double occupancy = 0.0;  ///< (1/n) sum_i ||mu_i - mu_bar||_1
};

ConsensusErrors consensus_errors(std::span<const AgentState> agents);

/// One trace row. Unavailable diagnostics are nullopt.
struct DiagRow {
    std::int64_t iteration = 0;
    std::optional<double> avg_reward_scaled;
    std::optional<double> avg_reward_raw;
    std::optional<double> duality_gap_printed;
    std::optional<double> duality_gap_proofside;
    std::optional<double> lyapunov;
    std::optional<double> consensus_v;
    std::optional<double> consensus_mu;
};

struct RunTrace {
    std::vector<std::pair<std::string, std::string>> header;  ///< metadata, written as JSON
    std::vector<DiagRow> rows;
};

/// Fixed CSV column order.
inline constexpr const char* kTraceColumns =
    "iter,avg_reward_scaled,avg_reward_raw,duality_gap_printed,duality_gap_proofside,lyapunov,consensus_v,consensus_mu";

/// RFC 4180 CSV with LF endings; numbers printed with 17 significant digits.
std::string format_trace_csv(const RunTrace& trace);
void write_trace_csv(const RunTrace& trace, const std::string& path);

struct DiagnosticsOptions {
    std::int64_t stride = 100;
    double t_mix = 1.0;
    std::optional<OptimalReference> reference;
    bool evaluate_reward = true;
};

/**
 * Observer that appends a DiagRow every `stride` iterations and at the final
 * iteration. The reward column is the long-run reward of the policy extracted
 * from the running time-averaged occupancy. Gap and Lyapunov columns need a
 * reference solution and stay empty without one.
 */
class DiagnosticsRecorder {
public:
    DiagnosticsRecorder(const TabularMdp& mdp, DiagnosticsOptions options, std::int64_t final_iteration);

    void operator()(const RunView& view);
    Observer observer() {
        return [this](const RunView& view) { (*this)(view); };
    }

    RunTrace& trace() { return trace_; }
    RunTrace take_trace() { return std::move(trace_); }

private:
    const TabularMdp& mdp_;
    DiagnosticsOptions options_;
    std::int64_t final_iteration_;
    RunTrace trace_;
};

/// long_run_reward of the policy extracted from an occupancy table, or
/// nullopt when a state carries no mass.
std::optional<double> occupancy_policy_reward(const TabularMdp& mdp, const Matrix& mu);

} // namespace marl
