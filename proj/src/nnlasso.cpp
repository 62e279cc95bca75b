#include "hsic_psi/nnlasso.hpp"

#include "hsic_psi/error.hpp"
#include "hsic_psi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace hsic_psi {

namespace {

constexpr long kPolishEvery = 25;

double residual_of(const Eigen::VectorXd& beta, const Eigen::VectorXd& slack) {
    double r = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        r = std::max({r, -slack[j], -beta[j], beta[j] * slack[j]});
    }
    return r;
}

// Exact solve of the stationarity equations on the current support. Returns
// false when the reduced system is singular or the solution leaves the
// non-negative orthant.
bool polish(const Eigen::MatrixXd& Q, const Eigen::VectorXd& rhs, Eigen::VectorXd& beta) {
    std::vector<Index> support;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] > 0.0) support.push_back(j);
    }
    if (support.empty()) return true;
    const auto k = static_cast<Index>(support.size());
    Eigen::MatrixXd Qss(k, k);
    Eigen::VectorXd r(k);
    for (Index a = 0; a < k; ++a) {
        r[a] = rhs[support[static_cast<std::size_t>(a)]];
        for (Index b = 0; b < k; ++b) Qss(a, b) = Q(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(Qss);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd bs = llt.solve(r);
    if (!bs.allFinite() || (bs.array() <= 0.0).any()) return false;
    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(beta.size());
    for (Index a = 0; a < k; ++a) candidate[support[static_cast<std::size_t>(a)]] = bs[a];
    beta = std::move(candidate);
    return true;
}

// Core solver for min -βᵀq + ½βᵀQβ + λβᵀw over β >= 0 with Q PSD.
LassoSolution solve_quadratic(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q, double lambda,
                              const Eigen::VectorXd& w, const SolverOptions& options) {
    const Index p = q.size();
    const Eigen::VectorXd rhs = q - lambda * w;
    const double diag_floor = 1e-14 * std::max(Q.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

    LassoSolution sol;
    sol.beta = options.start ? Eigen::VectorXd(options.start->cwiseMax(0.0)) : Eigen::VectorXd::Zero(p);
    if (sol.beta.size() != p) throw Error(ErrorCode::SizeMismatch, "start vector has the wrong length");
    Eigen::VectorXd grad = Q * sol.beta - rhs;
    const long max_sweeps = options.max_sweeps > 0 ? options.max_sweeps : 10L * std::max<Index>(p, 1) * 1000L;

    auto slack_of = [&](const Eigen::VectorXd& b) { Eigen::VectorXd u = Q * b - rhs; return u; };

    for (sol.sweeps = 1; sol.sweeps <= max_sweeps; ++sol.sweeps) {
        double max_change = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double qjj = Q(j, j);
            if (qjj <= diag_floor) continue;
            const double next = std::max(0.0, sol.beta[j] - grad[j] / qjj);
            const double delta = next - sol.beta[j];
            if (delta != 0.0) {
                sol.beta[j] = next;
                grad += delta * Q.col(j);
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        const double bound = options.tol * (1.0 + sol.beta.cwiseAbs().maxCoeff());
        if (max_change <= bound) {
            sol.converged = true;
            break;
        }
        if (sol.sweeps % kPolishEvery == 0) {
            Eigen::VectorXd trial = sol.beta;
            if (polish(Q, rhs, trial) && residual_of(trial, slack_of(trial)) <= bound) {
                sol.beta = std::move(trial);
                sol.converged = true;
                break;
            }
        }
    }
    sol.sweeps = std::min(sol.sweeps, max_sweeps);

    sol.slack = slack_of(sol.beta);
    sol.kkt_residual = residual_of(sol.beta, sol.slack);
    Eigen::VectorXd trial = sol.beta;
    if (polish(Q, rhs, trial)) {
        Eigen::VectorXd trial_slack = slack_of(trial);
        const double r = residual_of(trial, trial_slack);
        if (r <= sol.kkt_residual) {
            sol.beta = std::move(trial);
            sol.slack = std::move(trial_slack);
            sol.kkt_residual = r;
        }
    }
    for (Index j = 0; j < p; ++j) {
        if (sol.beta[j] > 0.0) sol.active.push_back(j);
    }
    return sol;
}

void require_weights(const Eigen::Ref<const Eigen::VectorXd>& w, Index p) {
    if (w.size() != p) throw Error(ErrorCode::SizeMismatch, "weight vector has the wrong length");
    if (!w.allFinite() || (w.array() < 0.0).any()) {
        throw Error(ErrorCode::InvalidArgument, "weights must be finite and non-negative");
    }
}

std::vector<double> descending_unique(std::span<const double> grid) {
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "lambda grid is empty");
    std::vector<double> g(grid.begin(), grid.end());
    std::sort(g.begin(), g.end(), std::greater<>());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

double argmin_prefer_larger(const std::vector<double>& grid, const std::vector<double>& score) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (score[i] < score[best]) best = i;
    }
    return grid[best];
}

}  // namespace

void LassoProblem::validate() const {
    const Index p = H.size();
    if (M.rows() != p || M.cols() != p) throw Error(ErrorCode::SizeMismatch, "M must be p x p");
    require_weights(w, p);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (!H.allFinite() || !M.allFinite()) throw Error(ErrorCode::NonFinite, "problem data is not finite");
    if (p > 0 && Eigen::LLT<Eigen::MatrixXd>(M).info() != Eigen::Success) {
        throw Error(ErrorCode::NotPD, "M is not positive definite");
    }
}

double LassoProblem::objective(const Eigen::Ref<const Eigen::VectorXd>& beta) const {
    return -beta.dot(H) + 0.5 * beta.dot(M * beta) + lambda * beta.dot(w);
}

LassoSolution solve(const LassoProblem& problem, const SolverOptions& options) {
    problem.validate();
    return solve_quadratic(problem.M, problem.H, problem.lambda, problem.w, options);
}

double kkt_check(const Eigen::Ref<const Eigen::VectorXd>& beta, const LassoProblem& problem) {
    const Eigen::VectorXd slack = -problem.H + problem.M * beta + problem.lambda * problem.w;
    return residual_of(beta, slack);
}

double kkt_check(const LassoSolution& solution, const LassoProblem& problem) {
    return kkt_check(solution.beta, problem);
}

CholeskyForm cholesky_reformulate(const Eigen::Ref<const Eigen::MatrixXd>& M, const Eigen::Ref<const Eigen::VectorXd>& H) {
    if (M.rows() != M.cols() || M.rows() != H.size()) throw Error(ErrorCode::SizeMismatch, "M must be p x p, H length p");
    const Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPD, "Cholesky factorization failed");
    CholeskyForm out;
    out.U = llt.matrixU();
    out.y = llt.matrixL().solve(H);  // Uᵀy = H with Uᵀ = L
    return out;
}

LassoSolution solve_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                                  double lambda, const Eigen::Ref<const Eigen::VectorXd>& w,
                                  const SolverOptions& options) {
    if (U.rows() != y.size()) throw Error(ErrorCode::SizeMismatch, "U and y row counts differ");
    require_weights(w, U.cols());
    const Eigen::MatrixXd Q = U.transpose() * U;
    const Eigen::VectorXd q = U.transpose() * y;
    return solve_quadratic(Q, q, lambda, w, options);
}

double lambda_max(const Eigen::Ref<const Eigen::VectorXd>& H, const Eigen::Ref<const Eigen::VectorXd>& w) {
    require_weights(w, H.size());
    double top = 0.0;
    for (Index j = 0; j < H.size(); ++j) {
        if (w[j] > 0.0) top = std::max(top, H[j] / w[j]);
    }
    return top;
}

std::vector<double> lambda_grid(double top, int count, double ratio) {
    if (!(top > 0.0) || count < 1 || !(ratio > 0.0 && ratio <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "lambda grid needs top > 0, count >= 1, ratio in (0, 1]");
    }
    std::vector<double> grid(static_cast<std::size_t>(count));
    if (count == 1) {
        grid[0] = top;
        return grid;
    }
    const double step = std::log(ratio) / static_cast<double>(count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = top * std::exp(step * i);
    return grid;
}

double cv_lambda(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                 const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const double> grid, int folds,
                 std::uint64_t seed) {
    const auto g = descending_unique(grid);
    const Index rows = U.rows();
    if (rows != y.size()) throw Error(ErrorCode::SizeMismatch, "U and y row counts differ");
    require_weights(w, U.cols());
    if (folds < 2 || rows < folds) {
        throw Error(ErrorCode::DegenerateFolds, std::to_string(folds) + " folds over " + std::to_string(rows) + " rows");
    }
    if (g.size() == 1) return g.front();

    std::vector<Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<double> loss(g.size(), 0.0);
    for (int k = 0; k < folds; ++k) {
        const Index lo = rows * k / folds;
        const Index hi = rows * (k + 1) / folds;
        std::vector<Index> test(order.begin() + lo, order.begin() + hi);
        std::vector<Index> train(order.begin(), order.begin() + lo);
        train.insert(train.end(), order.begin() + hi, order.end());

        const Eigen::MatrixXd Utr = U(train, Eigen::all);
        const Eigen::VectorXd ytr = y(train);
        const Eigen::MatrixXd Ute = U(test, Eigen::all);
        const Eigen::VectorXd yte = y(test);
        const Eigen::MatrixXd Q = Utr.transpose() * Utr;
        const Eigen::VectorXd q = Utr.transpose() * ytr;

        SolverOptions opts;
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto sol = solve_quadratic(Q, q, g[i], w, opts);
            loss[i] += 0.5 * (yte - Ute * sol.beta).squaredNorm() / folds;
            opts.start = std::move(sol.beta);
        }
    }
    return argmin_prefer_larger(g, loss);
}

double aic_lambda(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const double> grid) {
    const auto g = descending_unique(grid);
    if (U.rows() != y.size()) throw Error(ErrorCode::SizeMismatch, "U and y row counts differ");
    require_weights(w, U.cols());
    const Eigen::MatrixXd Q = U.transpose() * U;
    const Eigen::VectorXd q = U.transpose() * y;
    const auto n = static_cast<double>(y.size());
    std::vector<double> score(g.size());
    SolverOptions opts;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto sol = solve_quadratic(Q, q, g[i], w, opts);
        const double rss = std::max((y - U * sol.beta).squaredNorm(), std::numeric_limits<double>::min());
        score[i] = n * std::log(rss / n) + 2.0 * static_cast<double>(sol.active.size());
        opts.start = std::move(sol.beta);
    }
    return argmin_prefer_larger(g, score);
}

Eigen::VectorXd adaptive_weights_from_pilot(const Eigen::Ref<const Eigen::VectorXd>& pilot, double gamma, double floor) {
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "adaptive gamma must be positive");
    return pilot.unaryExpr([&](double b) { return 1.0 / std::pow(std::max(b, floor), gamma); });
}

Eigen::VectorXd adaptive_weights(const Eigen::Ref<const Eigen::MatrixXd>& U, const Eigen::Ref<const Eigen::VectorXd>& y,
                                 double gamma, double floor) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(U.cols());
    const auto pilot = solve_least_squares(U, y, 0.0, ones);
    return adaptive_weights_from_pilot(pilot.beta, gamma, floor);
}

}  // namespace hsic_psi
