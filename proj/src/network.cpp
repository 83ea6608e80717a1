#include "marl/network.hpp"

#include "marl/errors.hpp"
#include "marl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace marl {

EdgeSet normalize_edges(EdgeSet edges, int num_nodes) {
    for (auto& [i, j] : edges) {
        if (i < 0 || j < 0 || i >= num_nodes || j >= num_nodes)
            throw ConfigError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") references a missing node");
        if (i > j) std::swap(i, j);
    }
    std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

EdgeSet complete_edges(int num_nodes) {
    EdgeSet edges;
    for (int i = 0; i < num_nodes; ++i)
        for (int j = i + 1; j < num_nodes; ++j) edges.emplace_back(i, j);
    return edges;
}

EdgeSet ring_edges(int num_nodes) {
    EdgeSet edges;
    if (num_nodes < 2) return edges;
    for (int i = 0; i < num_nodes; ++i) edges.emplace_back(i, (i + 1) % num_nodes);
    return normalize_edges(std::move(edges), num_nodes);
}

// ---------------------------------------------------------------------------

WeightMatrix::WeightMatrix(Matrix weights) : w_(std::move(weights)) {
    constexpr double tol = 1e-12;
    if (w_.rows() != w_.cols()) throw ParameterError("weight matrix must be square");
    if ((w_.array() < 0.0).any()) throw ParameterError("weight matrix has negative entries");
    if ((w_ - w_.transpose()).cwiseAbs().maxCoeff() > tol) throw ParameterError("weight matrix is not symmetric");
    const Vector ones = Vector::Ones(w_.rows());
    if ((w_ * ones - ones).cwiseAbs().maxCoeff() > tol ||
        (w_.transpose() * ones - ones).cwiseAbs().maxCoeff() > tol)
        throw ParameterError("weight matrix is not doubly stochastic");
}

double WeightMatrix::min_positive() const {
    double eta = 1.0;
    for (Eigen::Index k = 0; k < w_.size(); ++k) {
        const double w = w_.data()[k];
        if (w > 0.0) eta = std::min(eta, w);
    }
    return eta;
}

WeightMatrix metropolis_weights(const EdgeSet& edges, int num_nodes) {
    std::vector<int> degree(static_cast<std::size_t>(num_nodes), 0);
    for (const auto& [i, j] : edges) {
        ++degree[i];
        ++degree[j];
    }
    Matrix w = Matrix::Zero(num_nodes, num_nodes);
    for (const auto& [i, j] : edges) {
        const double wij = 1.0 / (1.0 + std::max(degree[i], degree[j]));
        w(i, j) = wij;
        w(j, i) = wij;
    }
    for (int i = 0; i < num_nodes; ++i) w(i, i) = 1.0 - (w.row(i).sum() - w(i, i));
    return WeightMatrix(std::move(w));
}

// ---------------------------------------------------------------------------

GraphSchedule GraphSchedule::complete(int num_nodes) {
    GraphSchedule g(GraphModel::complete, num_nodes);
    g.fixed_ = complete_edges(num_nodes);
    return g;
}

GraphSchedule GraphSchedule::ring(int num_nodes) {
    GraphSchedule g(GraphModel::ring, num_nodes);
    g.fixed_ = ring_edges(num_nodes);
    return g;
}

GraphSchedule GraphSchedule::periodic(int num_nodes, std::vector<EdgeSet> edge_sets) {
    if (edge_sets.empty()) throw ConfigError("periodic schedule needs at least one edge set");
    GraphSchedule g(GraphModel::periodic, num_nodes);
    for (auto& e : edge_sets) g.periodic_.push_back(normalize_edges(std::move(e), num_nodes));
    return g;
}

GraphSchedule GraphSchedule::erdos_renyi(int num_nodes, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("edge probability p must lie in [0, 1]");
    GraphSchedule g(GraphModel::erdos_renyi, num_nodes);
    g.p_ = p;
    g.seed_ = seed;
    return g;
}

int GraphSchedule::period() const {
    return model_ == GraphModel::periodic ? static_cast<int>(periodic_.size()) : 1;
}

EdgeSet GraphSchedule::edges_at(std::int64_t t) const {
    switch (model_) {
    case GraphModel::complete:
    case GraphModel::ring: return fixed_;
    case GraphModel::periodic: return periodic_[static_cast<std::size_t>(t % static_cast<std::int64_t>(periodic_.size()))];
    case GraphModel::erdos_renyi: {
        Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(t)));
        EdgeSet edges;
        for (int i = 0; i < num_nodes_; ++i)
            for (int j = i + 1; j < num_nodes_; ++j)
                if (rng.uniform() < p_) edges.emplace_back(i, j);
        return edges;
    }
    }
    return {};
}

// ---------------------------------------------------------------------------

bool is_connected(const EdgeSet& edges, int num_nodes) {
    if (num_nodes <= 1) return true;
    std::vector<int> parent(static_cast<std::size_t>(num_nodes));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    int components = num_nodes;
    for (const auto& [i, j] : edges) {
        const int a = find(i);
        const int b = find(j);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return components == 1;
}

bool check_window_connectivity(const GraphSchedule& schedule, int window, std::int64_t horizon) {
    if (window < 1) throw ParameterError("window length B must be at least 1");
    if (horizon < window) throw ParameterError("horizon must be at least B");
    for (std::int64_t t = 0; t + window <= horizon; ++t) {
        EdgeSet united;
        for (int l = 0; l < window; ++l) {
            const auto e = schedule.edges_at(t + l);
            united.insert(united.end(), e.begin(), e.end());
        }
        if (!is_connected(united, schedule.num_nodes())) return false;
    }
    return true;
}

double realized_eta(const GraphSchedule& schedule, std::int64_t horizon) {
    double eta = 1.0;
    const std::int64_t distinct =
        schedule.model() == GraphModel::erdos_renyi ? horizon : std::min<std::int64_t>(horizon, schedule.period());
    for (std::int64_t t = 0; t < distinct; ++t) eta = std::min(eta, schedule.weights_at(t).min_positive());
    return eta;
}

std::vector<double> perron_product_gap(std::span<const WeightMatrix> weights) {
    std::vector<double> gaps;
    if (weights.empty()) return gaps;
    const int n = weights.front().size();
    Matrix phi = Matrix::Identity(n, n);
    for (const auto& w : weights) {
        if (w.size() != n) throw ParameterError("weight matrices must share one size");
        phi = w.matrix() * phi;
        gaps.push_back((phi.array() - 1.0 / n).abs().maxCoeff());
    }
    return gaps;
}

PerronConstants proposition1_bound(double eta, int num_nodes, int window) {
    if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must lie in (0, 1)");
    if (num_nodes < 1 || window < 1) throw ParameterError("n and B must be at least 1");
    const double base = 1.0 - eta / (4.0 * num_nodes * num_nodes);
    return {std::pow(base, -2.0), std::pow(base, 1.0 / window)};
}

} // namespace marl
