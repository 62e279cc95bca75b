/**
 * @file hsic.hpp
 * @brief HSIC point estimators (biased, unbiased, block, incomplete
 *        U-statistic), covariance of the estimate vector and the
 *        positive-definite projection of the feature dependency matrix.
 */
#pragma once

#include "hsic_psi/dataset.hpp"
#include "hsic_psi/kernels.hpp"
#include "hsic_psi/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hsic_psi {

using Quadruple = std::array<Index, 4>;

enum class EstimatorKind { Biased, Unbiased, Block, Incomplete };

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::Unbiased;
    int block_size = 10;      // Block
    int size_ratio = 1;       // Incomplete: m = size_ratio * n subsets
    std::uint64_t seed = 0;   // Incomplete subset draws

    static EstimatorSpec biased() { return {EstimatorKind::Biased}; }
    static EstimatorSpec unbiased() { return {EstimatorKind::Unbiased}; }
    static EstimatorSpec block(int b) { return {EstimatorKind::Block, b}; }
    static EstimatorSpec incomplete(int l, std::uint64_t seed = 0) { return {EstimatorKind::Incomplete, 10, l, seed}; }

    bool has_summands() const { return kind == EstimatorKind::Block || kind == EstimatorKind::Incomplete; }
    void validate() const;
    /// "unbiased", "biased", "block:10", "incomplete:1"
    std::string to_string() const;
    static EstimatorSpec parse(const std::string& text);
};

/// tr(K Γ L Γ) / (n-1)^2 on uncentered Gram matrices.
double hsic_biased(const Eigen::Ref<const Eigen::MatrixXd>& K, const Eigen::Ref<const Eigen::MatrixXd>& L);
double hsic_biased(const GramMatrix& K, const GramMatrix& L);

/// Unbiased (U-statistic) estimator; requires n >= 4.
double hsic_unbiased(const Eigen::Ref<const Eigen::MatrixXd>& K, const Eigen::Ref<const Eigen::MatrixXd>& L);
double hsic_unbiased(const GramMatrix& K, const GramMatrix& L);

/// Degree-4 kernel h: the symmetrized sum over all 24 orderings of the
/// quadruple of K_st (L_st + L_uv - 2 L_su), divided by 24.
double ustat_kernel_h(const Eigen::Ref<const Eigen::MatrixXd>& K, const Eigen::Ref<const Eigen::MatrixXd>& L,
                      const Quadruple& q);

/// Mean of unbiased estimates over consecutive blocks of size B. The
/// trailing n mod B samples are dropped. Per-block estimates go to
/// `summands` when given.
double hsic_block(const ColumnKernel& kx, const ColumnKernel& ky, int block_size,
                  std::vector<double>* summands = nullptr);

/// Mean of h over m = l * n 4-subsets drawn uniformly with replacement.
double hsic_incomplete(const ColumnKernel& kx, const ColumnKernel& ky, int size_ratio, Rng& rng,
                       std::vector<double>* summands = nullptr);
/// Same estimator over an explicitly given multiset of subsets.
double hsic_incomplete(const ColumnKernel& kx, const ColumnKernel& ky, std::span<const Quadruple> subsets,
                       std::vector<double>* summands = nullptr);

/// Draws one 4-subset of {0..n-1} uniformly (Floyd's algorithm), sorted.
Quadruple draw_quadruple(Index n, Rng& rng);

/// Single-pair estimate with any estimator kind; `stream` seeds Incomplete.
double hsic_pair(const ColumnKernel& kx, const ColumnKernel& ky, const EstimatorSpec& spec, std::uint64_t stream,
                 std::vector<double>* summands = nullptr);

struct HsicVector {
    Eigen::VectorXd values;
    // summand_count x p; column j holds the summands of feature j. Empty for
    // the biased and unbiased estimators.
    Eigen::MatrixXd summands;
    // CLT rate unit: n/B for Block, m for Incomplete.
    double scale = 0.0;
    EstimatorSpec spec;

    Index size() const { return values.size(); }
};

struct DependencyMatrix {
    Eigen::MatrixXd values;
    bool pd_projected = false;
    double floor = 0.0;
};

enum class CovMethod { Empirical, Oas };

struct CovarianceEstimate {
    Eigen::MatrixXd values;
    CovMethod method = CovMethod::Oas;
    Index sample_count = 0;
    double shrinkage = 0.0;
};

/// Fits one kernel per feature column using the dataset's kernel specs.
std::vector<ColumnKernel> fit_feature_kernels(const Dataset& data);
ColumnKernel fit_response_kernel(const Dataset& data);

/// Feature-response estimates. Incomplete draws use an independent stream
/// per feature, seeded from (spec.seed, feature id).
HsicVector estimate_H(const Dataset& data, const EstimatorSpec& spec);
HsicVector estimate_H(std::span<const ColumnKernel> features, const ColumnKernel& response,
                      std::span<const Index> feature_ids, const EstimatorSpec& spec);

/// Symmetric matrix of pairwise feature estimates, each pair computed once.
DependencyMatrix estimate_M(const Dataset& data, const EstimatorSpec& spec);
DependencyMatrix estimate_M(std::span<const ColumnKernel> features, std::span<const Index> feature_ids,
                            const EstimatorSpec& spec);

/// Default floor: 1e-6 * max(largest eigenvalue, 1).
double default_pd_floor(const Eigen::Ref<const Eigen::MatrixXd>& M);

/// Clips eigenvalues below `floor` up to `floor`. Throws NotSymmetric.
DependencyMatrix project_pd(const DependencyMatrix& M, double floor);
DependencyMatrix project_pd(const DependencyMatrix& M);

/// Covariance of H (not of a single summand): summand covariance divided by
/// the summand count. OAS shrinks toward (tr(S)/p) I; p = 1 falls back to
/// the empirical variance.
CovarianceEstimate estimate_cov(const HsicVector& H, CovMethod method);
CovarianceEstimate estimate_cov(const Eigen::Ref<const Eigen::MatrixXd>& summands, CovMethod method);

/// OAS shrinkage weight for a p x p covariance S from `count` observations.
double oas_shrinkage(const Eigen::Ref<const Eigen::MatrixXd>& S, Index count);

}  // namespace hsic_psi
