#include "marl/baselines.hpp"

#include "marl/errors.hpp"
#include "marl/simplex.hpp"

#include <cmath>
#include <string>

namespace marl {

namespace {

Vector normalize_against(Vector v, const Vector& xi) { return v.array() - xi.dot(v); }

double bellman_residual(const TabularMdp& mdp, const Vector& v, double lambda) {
    double worst = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.num_actions(); ++a)
            best = std::max(best, mdp.global_reward()(s, a) + mdp.transition(a).row(s).dot(v));
        worst = std::max(worst, std::abs(best - v(s) - lambda));
    }
    return worst;
}

} // namespace

LpSolution solve_lp_exact(const TabularMdp& mdp) {
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();
    const int nvar = ns * na;

    // column k = a * |S| + s, matching the column-major occupancy table
    Matrix a = Matrix::Zero(ns + 1, nvar);
    Vector c(nvar);
    for (int act = 0; act < na; ++act) {
        const Matrix& p = mdp.transition(act);
        for (int s = 0; s < ns; ++s) {
            const int k = act * ns + s;
            a(s, k) += 1.0;
            for (int sp = 0; sp < ns; ++sp) a(sp, k) -= p(s, sp);
            a(ns, k) = 1.0;
            c(k) = mdp.global_reward()(s, act);
        }
    }
    Vector b = Vector::Zero(ns + 1);
    b(ns) = 1.0;

    const LpResult lp = solve_standard_lp(a, b, c);
    switch (lp.status) {
    case LpStatus::optimal: break;
    case LpStatus::infeasible: throw SolverError("occupancy LP is infeasible");
    case LpStatus::unbounded: throw SolverError("occupancy LP is unbounded");
    case LpStatus::iteration_limit: throw NumericalError("simplex pivot limit exceeded");
    }

    LpSolution sol;
    sol.pivots = lp.pivots;
    sol.mu = Eigen::Map<const Matrix>(lp.x.data(), ns, na);
    sol.mu = sol.mu.cwiseMax(0.0);
    sol.mu /= sol.mu.sum();
    sol.lambda = sol.mu.cwiseProduct(mdp.global_reward()).sum();
    sol.xi = sol.mu.rowwise().sum();

    // duals: y_s for flow rows, y_{|S|} = lambda for the normalization row
    Vector v = lp.y.head(ns);
    if (bellman_residual(mdp, v, sol.lambda) > 1e-8) {
        v = solve_bellman(mdp).v;
        sol.value_from_bellman = true;
    }
    sol.v = normalize_against(std::move(v), sol.xi);
    return sol;
}

BellmanSolution relative_value_iteration(std::span<const Matrix> transitions, const Matrix& reward, double tol,
                                         int max_iter) {
    const int ns = static_cast<int>(reward.rows());
    const int na = static_cast<int>(reward.cols());
    BellmanSolution out;
    Vector h = Vector::Zero(ns);
    Vector next(ns);
    std::vector<int> greedy(static_cast<std::size_t>(ns), 0);
    for (int k = 1; k <= max_iter; ++k) {
        for (int s = 0; s < ns; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int a = 0; a < na; ++a) {
                const double q = reward(s, a) + transitions[a].row(s).dot(h);
                if (q > best + 1e-14) {
                    best = q;
                    arg = a;
                }
            }
            next(s) = best;
            greedy[s] = arg;
        }
        const double offset = next(0);
        next.array() -= offset;
        const Vector diff = next - h;
        h.swap(next);
        if (diff.maxCoeff() - diff.minCoeff() < tol) {
            out.lambda = offset;
            out.v = h;
            out.greedy = greedy;
            out.sweeps = k;
            return out;
        }
    }
    throw NumericalError("relative value iteration did not converge in " + std::to_string(max_iter) + " sweeps");
}

BellmanSolution solve_bellman(const TabularMdp& mdp, double tol, int max_iter) {
    std::vector<Matrix> transitions;
    for (int a = 0; a < mdp.num_actions(); ++a) transitions.push_back(mdp.transition(a));
    BellmanSolution sol = relative_value_iteration(transitions, mdp.global_reward(), tol, max_iter);
    // normalize by the greedy policy's stationary distribution when it is unique
    try {
        const Policy greedy = Policy::deterministic(sol.greedy, mdp.num_actions());
        const Vector xi = stationary_distribution(policy_transition_matrix(mdp, greedy));
        sol.v = normalize_against(sol.v, xi);
    } catch (const NonUnichainError&) {
        // keep the h(0) = 0 normalization
    }
    return sol;
}

BruteForceResult brute_force_optimal(const TabularMdp& mdp) {
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();
    if (ns * std::log(static_cast<double>(na)) > std::log(1e6) + 1e-9)
        throw ParameterError("brute force refused: |A|^|S| exceeds 1e6");

    std::vector<int> actions(static_cast<std::size_t>(ns), 0);
    BruteForceResult best{-std::numeric_limits<double>::infinity(), {}};
    while (true) {
        const Policy pi = Policy::deterministic(actions, na);
        const double lambda = average_reward(mdp, pi);
        if (lambda > best.lambda + 1e-12) best = {lambda, pi};
        // odometer with state 0 most significant, i.e. lexicographic order
        int pos = ns - 1;
        while (pos >= 0 && ++actions[pos] == na) actions[pos--] = 0;
        if (pos < 0) break;
    }
    return best;
}

TracedRun centralized_spd(const TabularMdp& mdp, const HyperParams& hyper, const RunOptions& options,
                          DiagnosticsOptions diagnostics) {
    const TabularMdp team = mdp.num_agents() == 1 ? mdp : mdp.with_aggregated_reward();
    return run_rmapd_traced(team, GraphSchedule::complete(1), hyper, options, std::move(diagnostics));
}

IaviResult independent_avi(const TabularMdp& mdp, double tol, int max_iter) {
    const auto& factors = mdp.action_factors();
    const int n = mdp.num_agents();
    if (static_cast<int>(factors.size()) != n)
        throw ParameterError("independent value iteration needs one action factor per agent");
    const int ns = mdp.num_states();

    IaviResult out;
    for (int i = 0; i < n; ++i) {
        const int ni = factors[i];
        const double others = static_cast<double>(mdp.num_actions()) / ni;
        std::vector<Matrix> p(static_cast<std::size_t>(ni), Matrix::Zero(ns, ns));
        Matrix r = Matrix::Zero(ns, ni);
        for (int a = 0; a < mdp.num_actions(); ++a) {
            const int own = decode_joint_action(a, factors)[i];
            p[own] += mdp.transition(a) / others;
            r.col(own) += mdp.local_reward(i).col(a) / others;
        }
        const BellmanSolution sol = relative_value_iteration(p, r, tol, max_iter);
        Matrix local = Matrix::Zero(ns, ni);
        for (int s = 0; s < ns; ++s) local(s, sol.greedy[s]) = 1.0;
        out.local_policies.push_back(std::move(local));
        out.local_gains.push_back(sol.lambda);
    }
    out.joint = product_policy(out.local_policies, factors);
    return out;
}

} // namespace marl
