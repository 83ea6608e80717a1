#pragma once

#include "marl/mdp.hpp"

namespace marl {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    Vector x;       ///< primal solution
    Vector y;       ///< row duals, y^T A >= c^T at optimality; zero on redundant rows
    double objective = 0.0;
    int pivots = 0;
};

/// max c^T x subject to A x = b, x >= 0, by a dense two-phase tableau simplex
/// with Bland's anti-cycling rule. Redundant equality rows are tolerated.
LpResult solve_standard_lp(const Matrix& a, const Vector& b, const Vector& c, int max_pivots = 200000);

} // namespace marl
