#pragma once

// Reference computations used by the tests. None of these call into the code
// under test beyond plain data types.

#include "marl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace marl::oracle {

/// Euclidean projection onto
///   U = { x >= 0, sum x = 1, sum over the cells of state s >= c }
/// by nested bisection on the KKT multipliers: x = max(0, y - theta + lambda_s)
/// with lambda_s >= 0 chosen so that the state marginal reaches c when active.
inline Matrix euclidean_project_to_u(const Matrix& y, double c) {
    const Eigen::Index ns = y.rows();
    auto state_block = [&](Eigen::Index s, double shift) {
        return (y.row(s).array() + shift).max(0.0).matrix().eval();
    };
    auto state_mass = [&](Eigen::Index s, double theta, double& lambda) {
        lambda = 0.0;
        double m = state_block(s, -theta).sum();
        if (m >= c) return m;
        double lo = 0.0, hi = std::abs(theta) + std::abs(y.row(s).minCoeff()) + c + 1.0;
        for (int k = 0; k < 80; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (state_block(s, mid - theta).sum() >= c) hi = mid; else lo = mid;
        }
        lambda = hi;
        return state_block(s, lambda - theta).sum();
    };
    auto total = [&](double theta) {
        double sum = 0.0, lambda = 0.0;
        for (Eigen::Index s = 0; s < ns; ++s) sum += state_mass(s, theta, lambda);
        return sum;
    };
    double lo = y.minCoeff() - 2.0, hi = y.maxCoeff() + 2.0;
    for (int k = 0; k < 80; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (total(mid) > 1.0) lo = mid; else hi = mid;
    }
    const double theta = 0.5 * (lo + hi);
    Matrix x(y.rows(), y.cols());
    for (Eigen::Index s = 0; s < ns; ++s) {
        double lambda = 0.0;
        state_mass(s, theta, lambda);
        x.row(s) = state_block(s, lambda - theta);
    }
    return x;
}

inline double kl(const Matrix& p, const Matrix& q) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k)
        if (p.data()[k] > 0.0) sum += p.data()[k] * std::log(p.data()[k] / q.data()[k]);
    return sum;
}

/// argmin over U of KL(x || target) by projected gradient descent.
inline Matrix kl_projection_by_gradient(const Matrix& target, double c, int iterations = 200000) {
    Matrix x = euclidean_project_to_u(Matrix::Constant(target.rows(), target.cols(), 1.0 / target.size()), c);
    const double step = 0.5 * target.minCoeff();
    for (int k = 0; k < iterations; ++k) {
        Matrix grad(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            grad.data()[i] = std::log(std::max(x.data()[i], 1e-300) / target.data()[i]) + 1.0;
        Matrix next = euclidean_project_to_u(x - step * grad, c);
        const double change = (next - x).cwiseAbs().maxCoeff();
        x = std::move(next);
        if (change < 1e-13) break;
    }
    return x;
}

/// Two-state chain: xi_0 = p10 / (p01 + p10).
inline std::pair<double, double> two_state_stationary(double p01, double p10) {
    return {p10 / (p01 + p10), p01 / (p01 + p10)};
}

/// Single-state MDP with the given per-action rewards and one agent.
inline TabularMdp single_state_mdp(const std::vector<double>& rewards) {
    const int na = static_cast<int>(rewards.size());
    std::vector<Matrix> p(static_cast<std::size_t>(na), Matrix::Ones(1, 1));
    Matrix r(1, na);
    for (int a = 0; a < na; ++a) r(0, a) = rewards[static_cast<std::size_t>(a)];
    return TabularMdp(std::move(p), {r});
}

/// Two-state MDP, two actions: action 0 keeps the chain in place with prob
/// 1 - flip, action 1 moves deterministically; rewards given per (s, a).
inline TabularMdp two_state_mdp(double flip, const Matrix& reward) {
    Matrix stay(2, 2), move(2, 2);
    stay << 1.0 - flip, flip, flip, 1.0 - flip;
    move << 0.0, 1.0, 1.0, 0.0;
    return TabularMdp({stay, move}, {reward});
}

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double standard_error(const std::vector<double>& xs) {
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

} // namespace marl::oracle
