#include "marl/simplex.hpp"

#include "marl/errors.hpp"

#include <cmath>
#include <vector>

namespace marl {

namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-10;

class DenseSimplex {
public:
    DenseSimplex(const Matrix& a, const Vector& b, int max_pivots)
        : m_(static_cast<int>(a.rows())), n_(static_cast<int>(a.cols())), max_pivots_(max_pivots) {
        // columns: originals | artificials | rhs; last row holds reduced costs
        tab_ = Tableau::Zero(m_ + 1, n_ + m_ + 1);
        sign_.resize(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) {
            sign_[i] = b(i) < 0.0 ? -1.0 : 1.0;
            tab_.row(i).head(n_) = sign_[i] * a.row(i);
            tab_(i, n_ + i) = 1.0;
            tab_(i, rhs()) = sign_[i] * b(i);
            basis_.push_back(n_ + i);
        }
    }

    LpResult solve(const Vector& c) {
        LpResult out;

        // Phase 1: maximize -sum(artificials).
        Vector phase1 = Vector::Zero(n_ + m_);
        phase1.tail(m_).setConstant(-1.0);
        set_objective(phase1);
        if (!iterate(n_ + m_, out)) return out;
        double residual = 0.0;
        for (int i = 0; i < m_; ++i)
            if (basis_[i] >= n_) residual += tab_(i, rhs());
        if (residual > 1e-8) {
            out.status = LpStatus::infeasible;
            return out;
        }
        drive_out_artificials();

        // Phase 2 over original columns only.
        Vector phase2 = Vector::Zero(n_ + m_);
        phase2.head(n_) = c;
        set_objective(phase2);
        if (!iterate(n_, out)) return out;

        out.status = LpStatus::optimal;
        out.x = Vector::Zero(n_);
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < n_) out.x(basis_[i]) = tab_(i, rhs());
        out.objective = c.dot(out.x);

        // y^T = c_B^T B^-1; B^-1 sits in the artificial block.
        out.y = Vector::Zero(m_);
        for (int k = 0; k < m_; ++k) {
            double yk = 0.0;
            for (int i = 0; i < m_; ++i)
                if (basis_[i] < n_) yk += c(basis_[i]) * tab_(i, n_ + k);
            out.y(k) = yk * sign_[k];
        }
        return out;
    }

private:
    int rhs() const { return n_ + m_; }

    // Reduced costs cbar_j = c_j - c_B^T B^-1 A_j in the last row.
    void set_objective(const Vector& cost) {
        tab_.row(m_).setZero();
        tab_.row(m_).head(n_ + m_) = cost.transpose();
        for (int i = 0; i < m_; ++i) {
            const double cb = cost(basis_[i]);
            if (cb != 0.0) tab_.row(m_).head(n_ + m_) -= cb * tab_.row(i).head(n_ + m_);
        }
    }

    void pivot(int row, int col) {
        tab_.row(row) /= tab_(row, col);
        for (int i = 0; i <= m_; ++i) {
            if (i == row) continue;
            const double f = tab_(i, col);
            if (f != 0.0) tab_.row(i) -= f * tab_.row(row);
        }
        basis_[row] = col;
        ++pivots_;
    }

    /// Bland's rule over columns [0, allowed). Returns false on unbounded or limit.
    bool iterate(int allowed, LpResult& out) {
        while (true) {
            int enter = -1;
            for (int j = 0; j < allowed; ++j) {
                if (tab_(m_, j) > kCostTol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) {
                out.pivots = pivots_;
                return true;
            }
            int leave = -1;
            double best = 0.0;
            for (int i = 0; i < m_; ++i) {
                const double aij = tab_(i, enter);
                if (aij <= kPivotTol) continue;
                const double ratio = tab_(i, rhs()) / aij;
                if (leave < 0 || ratio < best - 1e-12 ||
                    (std::abs(ratio - best) <= 1e-12 && basis_[i] < basis_[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave < 0) {
                out.status = LpStatus::unbounded;
                out.pivots = pivots_;
                return false;
            }
            if (pivots_ >= max_pivots_) {
                out.status = LpStatus::iteration_limit;
                out.pivots = pivots_;
                return false;
            }
            pivot(leave, enter);
        }
    }

    void drive_out_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            for (int j = 0; j < n_; ++j) {
                if (std::abs(tab_(i, j)) > kPivotTol) {
                    pivot(i, j);
                    break;
                }
            }
            // otherwise the row is redundant; its artificial stays basic at zero
        }
    }

    int m_;
    int n_;
    int max_pivots_;
    int pivots_ = 0;
    Tableau tab_;
    std::vector<int> basis_;
    std::vector<double> sign_;
};

} // namespace

LpResult solve_standard_lp(const Matrix& a, const Vector& b, const Vector& c, int max_pivots) {
    if (a.rows() != b.size() || a.cols() != c.size()) throw ParameterError("LP dimensions are inconsistent");
    DenseSimplex simplex(a, b, max_pivots);
    return simplex.solve(c);
}

} // namespace marl
