#include "marl/geometry.hpp"

#include "marl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace marl {

bool OccupancyMeasure::in_simplex(double tol) const {
    return (mass.array() >= 0.0).all() && std::abs(mass.sum() - 1.0) <= tol;
}

bool OccupancyMeasure::in_restricted_set(double tau, double tol) const {
    return in_simplex(tol) && state_marginal().minCoeff() >= marginal_floor(tau, num_states()) - tol;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ParameterError("KL arguments differ in size");
    double kl = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] < kMassFloor) continue;
        if (q[k] < kMassFloor) return std::numeric_limits<double>::infinity();
        kl += p[k] * std::log(p[k] / q[k]);
    }
    return std::max(kl, 0.0);
}

double kl_divergence(const Matrix& p, const Matrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) throw ParameterError("KL arguments differ in shape");
    return kl_divergence(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                         std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

ValueVector project_value(Vector v, double t_mix) {
    const double radius = 2.0 * t_mix;
    v = v.cwiseMax(-radius).cwiseMin(radius);
    return {std::move(v), radius};
}

Matrix entropic_step(const Matrix& centre, const Matrix& delta) {
    if (centre.rows() != delta.rows() || centre.cols() != delta.cols())
        throw ParameterError("entropic step arguments differ in shape");
    const double shift = delta.maxCoeff();
    Matrix out = centre.array() * (delta.array() - shift).exp();
    const double z = out.sum();
    if (!(z > 0.0)) throw NumericalError("entropic step lost all mass");
    out /= z;
    return out;
}

void entropic_step_inplace(Matrix& mu, int state, int action, double delta) {
    // Only one cell moves; the rest are rescaled by the common normalizer.
    const double shift = std::max(delta, 0.0);
    const double rest = std::exp(-shift);
    double& cell = mu(state, action);
    const double old_cell = cell;
    const double new_cell = old_cell * std::exp(delta - shift);
    const double z = (mu.sum() - old_cell) * rest + new_cell;
    if (!(z > 0.0)) throw NumericalError("entropic step lost all mass");
    mu *= rest / z;
    cell = new_cell / z;
}

Matrix entropic_step(const Matrix& centre, int state, int action, double delta) {
    Matrix out = centre;
    entropic_step_inplace(out, state, action, delta);
    return out;
}

void kl_project_to_u_inplace(Matrix& mu, double tau) {
    if (!(tau >= 1.0)) throw ParameterError("tau must be >= 1");
    const int ns = static_cast<int>(mu.rows());
    const double floor = marginal_floor(tau, ns);

    Vector marg = mu.rowwise().sum();
    for (int s = 0; s < ns; ++s)
        if (marg(s) < kMassFloor) marg(s) = 0.0;
    const double total = marg.sum();
    if (!(total > 0.0)) throw NumericalError("cannot project an all-zero occupancy");

    // Fast path: already feasible up to normalization.
    if (marg.minCoeff() / total >= floor) {
        if (total != 1.0) mu /= total;
        return;
    }

    std::vector<char> pinned(static_cast<std::size_t>(ns), 0);
    int num_pinned = 0;
    double free_mass = 0.0;
    double kappa = 1.0 / total;
    bool converged = false;
    for (int round = 0; round < 100; ++round) {
        free_mass = 0.0;
        for (int s = 0; s < ns; ++s)
            if (!pinned[s]) free_mass += marg(s);
        kappa = num_pinned == ns ? 0.0 : (1.0 - floor * num_pinned) / free_mass;
        bool changed = false;
        for (int s = 0; s < ns; ++s) {
            if (pinned[s] || kappa * marg(s) >= floor) continue;
            pinned[s] = 1;
            ++num_pinned;
            changed = true;
        }
        if (!changed) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericalError("KL projection onto U did not converge in 100 rounds");

    const double na = static_cast<double>(mu.cols());
    for (int s = 0; s < ns; ++s) {
        if (pinned[s]) {
            if (marg(s) > 0.0)
                mu.row(s) *= floor / marg(s);
            else
                mu.row(s).setConstant(floor / na);
        } else {
            mu.row(s) *= kappa;
        }
    }
}

Matrix kl_project_to_u(const Matrix& mu_hat, double tau) {
    Matrix out = mu_hat;
    kl_project_to_u_inplace(out, tau);
    return out;
}

Policy policy_from_occupancy(const Matrix& mu) {
    Policy pi{mu, {}};
    for (Eigen::Index s = 0; s < mu.rows(); ++s) {
        const double m = mu.row(s).sum();
        if (!(m > kMassFloor))
            throw NumericalError("state " + std::to_string(s) + " has zero occupancy; policy undefined");
        pi.prob.row(s) /= m;
    }
    return pi;
}

Matrix occupancy_from_policy(const Vector& xi, const Policy& policy) {
    return xi.asDiagonal() * policy.prob;
}

Matrix marginal_local_policy(const Policy& policy, std::span<const int> action_factors, int agent) {
    if (agent < 0 || agent >= static_cast<int>(action_factors.size()))
        throw ParameterError("agent index out of range");
    Matrix local = Matrix::Zero(policy.num_states(), action_factors[agent]);
    for (int a = 0; a < policy.num_actions(); ++a) {
        const auto parts = decode_joint_action(a, action_factors);
        local.col(parts[agent]) += policy.prob.col(a);
    }
    return local;
}

} // namespace marl
