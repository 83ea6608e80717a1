#pragma once

#include "marl/mdp.hpp"

#include <limits>
#include <span>

namespace marl {

/// Entries below this are treated as zero mass before logs and ratios.
inline constexpr double kMassFloor = 1e-300;

/// Nonnegative table mu(s, a) over states x joint actions.
struct OccupancyMeasure {
    Matrix mass;

    static OccupancyMeasure uniform(int num_states, int num_actions) {
        return {Matrix::Constant(num_states, num_actions, 1.0 / (static_cast<double>(num_states) * num_actions))};
    }

    int num_states() const { return static_cast<int>(mass.rows()); }
    int num_actions() const { return static_cast<int>(mass.cols()); }
    Vector state_marginal() const { return mass.rowwise().sum(); }

    bool in_simplex(double tol = 1e-9) const;
    /// In the simplex and every state marginal >= 1/(sqrt(tau)|S|) - tol.
    bool in_restricted_set(double tau, double tol = 1e-9) const;
};

/// Differential value estimate confined to the box ||v||_inf <= 2 t_mix.
struct ValueVector {
    Vector values;
    double radius = 0.0;

    bool in_box(double tol = 1e-12) const {
        return values.size() == 0 || values.cwiseAbs().maxCoeff() <= radius + tol;
    }
};

/// sum p log(p/q) with 0 log 0 = 0; +infinity when p > 0 where q = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const Matrix& p, const Matrix& q);

/// Coordinatewise clip to [-2 t_mix, 2 t_mix], the Euclidean projection onto V.
ValueVector project_value(Vector v, double t_mix);

/// mu'(s, a) proportional to centre(s, a) exp(delta(s, a)); delta is shifted
/// by its maximum before exponentiation.
Matrix entropic_step(const Matrix& centre, const Matrix& delta);

/// Single-cell form of entropic_step: delta is zero except at (state, action).
Matrix entropic_step(const Matrix& centre, int state, int action, double delta);
/// In-place variant used by the training loop.
void entropic_step_inplace(Matrix& mu, int state, int action, double delta);

/// Lower bound 1/(sqrt(tau)|S|) on state marginals in U.
inline double marginal_floor(double tau, int num_states) { return 1.0 / (std::sqrt(tau) * num_states); }

/**
 * argmin over mu in U of KL(mu || mu_hat), where
 * U = { mu >= 0, sum mu = 1, sum_a mu(s, a) >= 1/(sqrt(tau)|S|) }.
 *
 * KL separates into a marginal part and per-state conditionals; the optimum
 * keeps every conditional of mu_hat and sets marginals to max(c, kappa m_hat_s)
 * with kappa fixed by normalization. Violating states are pinned to c in
 * rounds until none remain (at most |S| rounds since kappa only decreases).
 */
Matrix kl_project_to_u(const Matrix& mu_hat, double tau);
void kl_project_to_u_inplace(Matrix& mu, double tau);

/// pi(a|s) = mu(s, a) / sum_a' mu(s, a'). Throws NumericalError on a zero marginal.
Policy policy_from_occupancy(const Matrix& mu);

/// mu(s, a) = xi(s) pi(a|s).
Matrix occupancy_from_policy(const Vector& xi, const Policy& policy);

/// pi_i(a_i|s) = sum over the other agents' actions of pi((a_i, a_-i)|s).
Matrix marginal_local_policy(const Policy& policy, std::span<const int> action_factors, int agent);

} // namespace marl
