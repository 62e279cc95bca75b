/**
 * @file nnlasso.hpp
 * @brief Non-negative weighted HSIC-Lasso:
 *
 *     minimize  -βᵀH + ½ βᵀMβ + λ βᵀw   subject to β >= 0,
 *
 * its Cholesky (least-squares) form ½‖y - Uβ‖² + λ βᵀw with M = UᵀU and
 * Uᵀy = H, KKT certification, and hyper-parameter selection.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace hsic_psi {

using Index = Eigen::Index;

struct LassoProblem {
    Eigen::VectorXd H;
    Eigen::MatrixXd M;
    double lambda = 0.0;
    Eigen::VectorXd w;

    /// Checks shapes, λ >= 0, w >= 0 and positive definiteness of M.
    void validate() const;
    double objective(const Eigen::Ref<const Eigen::VectorXd>& beta) const;
};

struct LassoSolution {
    Eigen::VectorXd beta;
    std::vector<Index> active;   // {s : beta_s > 0}
    Eigen::VectorXd slack;       // u = -H + Mβ + λw
    double kkt_residual = 0.0;
    long sweeps = 0;
    bool converged = false;
};

struct SolverOptions {
    double tol = 1e-12;
    long max_sweeps = 0;  // 0 selects 10 * p * 1000
    std::optional<Eigen::VectorXd> start;
};

/// Cyclic coordinate descent with a per-coordinate non-negativity clamp,
/// followed by an exact solve on the detected active set when that solve is
/// feasible. Never throws on non-convergence; check `converged`.
LassoSolution solve(const LassoProblem& problem, const SolverOptions& options = {});

/// max(‖min(u,0)‖∞, ‖min(β,0)‖∞, max_j β_j u_j)
double kkt_check(const Eigen::Ref<const Eigen::VectorXd>& beta, const LassoProblem& problem);
double kkt_check(const LassoSolution& solution, const LassoProblem& problem);

struct CholeskyForm {
    Eigen::MatrixXd U;  // upper triangular, M = UᵀU
    Eigen::VectorXd y;  // Uᵀy = H
};

/// Throws NotPD when the factorization fails.
CholeskyForm cholesky_reformulate(const Eigen::Ref<const Eigen::MatrixXd>& M, const Eigen::Ref<const Eigen::VectorXd>& H);

/// Solves the least-squares form over β >= 0. U need not have full column
/// rank (CV training rows); coordinates with no curvature stay at zero.
LassoSolution solve_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                                  double lambda, const Eigen::Ref<const Eigen::VectorXd>& w,
                                  const SolverOptions& options = {});

/// Smallest λ with β̂ = 0: max_j H_j / w_j over w_j > 0. Returns 0 when no
/// entry is positive.
double lambda_max(const Eigen::Ref<const Eigen::VectorXd>& H, const Eigen::Ref<const Eigen::VectorXd>& w);

/// `count` log-spaced values from `top` down to ratio * top (descending).
std::vector<double> lambda_grid(double top, int count = 50, double ratio = 1e-3);

/// K-fold CV over the rows of (U, y): contiguous folds after a seeded row
/// shuffle, mean held-out ½‖y - Uβ‖². Ties go to the larger λ.
double cv_lambda(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                 const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const double> grid, int folds,
                 std::uint64_t seed);

/// argmin over the grid of n·log(RSS/n) + 2|S|. Ties go to the larger λ.
double aic_lambda(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const double> grid);

/// Adaptive weights 1 / max(β̃_j, floor)^γ from a non-negative least-squares pilot.
Eigen::VectorXd adaptive_weights(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                                 double gamma, double floor = 1e-6);
Eigen::VectorXd adaptive_weights_from_pilot(const Eigen::Ref<const Eigen::VectorXd>& pilot, double gamma,
                                            double floor = 1e-6);

}  // namespace hsic_psi
