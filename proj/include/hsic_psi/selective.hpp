/**
 * @file selective.hpp
 * @brief Affine selection events of the non-negative weighted HSIC-Lasso,
 *        truncation points of the polyhedral lemma, the truncated Gaussian
 *        CDF and the resulting conditional p-values and confidence intervals.
 *
 * All vectors and matrices are in the original feature order unless noted.
 */
#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hsic_psi {

using Index = Eigen::Index;

/// The polyhedron {A H <= b}. `A` acts on H permuted into (S, Sᶜ) order;
/// ordering[k] is the original index of permuted coordinate k.
struct SelectionEvent {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    std::vector<Index> ordering;

    /// A with its columns mapped back to the original feature order.
    Eigen::MatrixXd constraint_matrix() const;
    bool contains(const Eigen::Ref<const Eigen::VectorXd>& H, double slack = 1e-8) const;
};

/// {Ŝ = S}: the KKT sign constraints on β_S and the dual feasibility of Sᶜ.
SelectionEvent event_full_model(const Eigen::Ref<const Eigen::MatrixXd>& M, std::span<const Index> S, double lambda,
                                const Eigen::Ref<const Eigen::VectorXd>& w);

/// {j ∈ Ŝ} = {-H_j <= -(Mβ̂_{-j})_j - λ w_j}; throws NotSelected if β̂_j <= 0.
SelectionEvent event_single_feature(const Eigen::Ref<const Eigen::MatrixXd>& M, const Eigen::Ref<const Eigen::VectorXd>& beta,
                                    Index j, double lambda, const Eigen::Ref<const Eigen::VectorXd>& w);

Eigen::VectorXd eta_hsic(Index j, Index p);
/// Row of M_SS⁻¹ belonging to j, scattered into the S positions.
Eigen::VectorXd eta_partial(const Eigen::Ref<const Eigen::MatrixXd>& M, std::span<const Index> S, Index j);

struct TruncationResult {
    Eigen::VectorXd eta;
    Eigen::VectorXd C;
    Eigen::VectorXd Z;
    double lower = 0.0;
    double upper = 0.0;
    double observed = 0.0;  // ηᵀH, clamped into [lower, upper]
    double variance = 0.0;  // ηᵀΣη
};

/// Throws DegenerateDirection (ηᵀΣη <= 0), EmptyInterval (V⁻ >= V⁺) and
/// OutsideInterval (observed more than `slack` outside [V⁻, V⁺]).
TruncationResult truncation_points(const SelectionEvent& event, const Eigen::Ref<const Eigen::VectorXd>& eta,
                                   const Eigen::Ref<const Eigen::MatrixXd>& Sigma, const Eigen::Ref<const Eigen::VectorXd>& H,
                                   double slack = 1e-8);

struct TruncatedGaussian {
    double mean = 0.0;
    double variance = 1.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    void validate() const;
};

/// CDF of N(mean, variance) truncated to [lower, upper]. x is clamped into
/// the interval. `degenerate` is set when the normalizer underflows even in
/// log space; the result is then 0 or 1 by tail side.
double trunc_gauss_cdf(double x, const TruncatedGaussian& tg, bool* degenerate = nullptr);

enum class TestSide { OneSided, TwoSided };

/// OneSided: 1 - F(observed); TwoSided: 2 min(F, 1 - F). F uses tg.mean.
double p_value(const TruncatedGaussian& tg, double observed, TestSide side);

struct ConfidenceInterval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool bracketed = true;  // false if a finite endpoint could not be bracketed
};

/// Inverts the pivot in the mean by bisection: [δ_α, ∞) one-sided,
/// [δ_{α/2}, δ_{1-α/2}] two-sided.
ConfidenceInterval confidence_interval(const TruncationResult& trunc, double alpha, TestSide side);

enum class TargetKind { Hsic, Partial };

struct InferenceResult {
    Index feature = 0;
    TargetKind target = TargetKind::Hsic;
    TestSide side = TestSide::TwoSided;
    double p_value = 1.0;
    ConfidenceInterval ci;
    TruncationResult truncation;
};

namespace detail {

/// log Φ(z), accurate far into the lower tail.
double log_ndtr(double z);
/// Both evaluation branches of the truncated CDF on standardized endpoints
/// (za <= zx <= zb). Exposed for cross-checking in tests.
double trunc_cdf_direct(double zx, double za, double zb);
double trunc_cdf_log(double zx, double za, double zb, bool* degenerate = nullptr);
/// Branch switch: log space when all three points lie beyond |z| > 6 on one side.
inline constexpr double kTailSwitch = 6.0;

}  // namespace detail

}  // namespace hsic_psi
