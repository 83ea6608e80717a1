#pragma once

#include "marl/mdp.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace marl {

/// Undirected edge list with i < j, sorted and deduplicated.
using EdgeSet = std::vector<std::pair<int, int>>;

EdgeSet normalize_edges(EdgeSet edges, int num_nodes);
EdgeSet complete_edges(int num_nodes);
EdgeSet ring_edges(int num_nodes);

/// Symmetric doubly stochastic mixing matrix.
class WeightMatrix {
public:
    /// Validates symmetry, nonnegativity and unit row/column sums.
    explicit WeightMatrix(Matrix weights);

    static WeightMatrix identity(int n) { return WeightMatrix(Matrix::Identity(n, n)); }

    const Matrix& matrix() const { return w_; }
    int size() const { return static_cast<int>(w_.rows()); }
    double operator()(int i, int j) const { return w_(i, j); }
    /// Smallest strictly positive entry (the realized eta).
    double min_positive() const;

private:
    Matrix w_;
};

/// w_ij = 1 / (1 + max(d_i, d_j)) on edges, w_ii = 1 - sum_{j != i} w_ij.
WeightMatrix metropolis_weights(const EdgeSet& edges, int num_nodes);

enum class GraphModel { complete, ring, periodic, erdos_renyi };

/// Time-varying communication graph. Erdos-Renyi graphs are drawn from a
/// stream keyed by (seed, t), so edges_at(t) is a pure function of t.
class GraphSchedule {
public:
    static GraphSchedule complete(int num_nodes);
    static GraphSchedule ring(int num_nodes);
    static GraphSchedule periodic(int num_nodes, std::vector<EdgeSet> edge_sets);
    static GraphSchedule erdos_renyi(int num_nodes, double p, std::uint64_t seed);

    GraphModel model() const { return model_; }
    int num_nodes() const { return num_nodes_; }
    double edge_probability() const { return p_; }
    /// Length of one cycle for periodic schedules, 1 otherwise.
    int period() const;

    EdgeSet edges_at(std::int64_t t) const;
    WeightMatrix weights_at(std::int64_t t) const { return metropolis_weights(edges_at(t), num_nodes_); }

private:
    GraphSchedule(GraphModel model, int num_nodes) : model_(model), num_nodes_(num_nodes) {}

    GraphModel model_;
    int num_nodes_;
    double p_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<EdgeSet> periodic_;
    EdgeSet fixed_;
};

bool is_connected(const EdgeSet& edges, int num_nodes);

/// True iff every window of B consecutive graphs starting in [0, horizon - B]
/// has a connected union.
bool check_window_connectivity(const GraphSchedule& schedule, int window, std::int64_t horizon);

/// Minimum positive mixing weight realized over [0, horizon).
double realized_eta(const GraphSchedule& schedule, std::int64_t horizon);

/// g_t = max_ij |[W^t ... W^0]_ij - 1/n| for t = 0 .. size-1.
std::vector<double> perron_product_gap(std::span<const WeightMatrix> weights);

struct PerronConstants {
    double gamma;  ///< (1 - eta/(4n^2))^-2
    double rho;    ///< (1 - eta/(4n^2))^(1/B)

    /// (1 + Gamma) / (1 - rho)
    double network_factor() const { return (1.0 + gamma) / (1.0 - rho); }
};

PerronConstants proposition1_bound(double eta, int num_nodes, int window);

} // namespace marl
