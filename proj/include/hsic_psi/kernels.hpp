/**
 * @file kernels.hpp
 * @brief Gram matrices for the Gaussian and normalized-delta kernels,
 *        median-heuristic bandwidths and double-centering.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace hsic_psi {

using Index = Eigen::Index;

enum class KernelKind { Gaussian, NormalizedDelta };

struct KernelSpec {
    KernelKind kind = KernelKind::Gaussian;
    // Gaussian only; std::nullopt selects the median heuristic.
    std::optional<double> bandwidth;

    static KernelSpec gaussian(double sigma);
    static KernelSpec median_heuristic() { return {}; }
    static KernelSpec normalized_delta() { return {KernelKind::NormalizedDelta, std::nullopt}; }

    void validate() const;
};

struct GramMatrix {
    Eigen::MatrixXd values;
    bool centered = false;

    Index size() const { return values.rows(); }
};

/// Median of all pairwise Euclidean distances between the rows of `samples`.
/// Even counts average the two middle elements. Throws AllIdentical when
/// every distance is zero.
double median_bandwidth(const Eigen::Ref<const Eigen::MatrixXd>& samples);
double median_bandwidth(std::span<const double> samples);

/// Gram matrix over the rows of `samples`. For NormalizedDelta each row must
/// be a single label value; label counts come from this sample.
GramMatrix gram(const Eigen::Ref<const Eigen::MatrixXd>& samples, const KernelSpec& spec);
GramMatrix gram(std::span<const double> samples, const KernelSpec& spec);

/// Returns Γ G Γ with Γ = I - 11ᵀ/n.
GramMatrix center(const GramMatrix& g);

/**
 * A kernel bound to one scalar sample (a feature column or the response).
 *
 * Fitting resolves the data-dependent parts once: the median-heuristic
 * bandwidth for Gaussian kernels and the per-label counts for the
 * normalized delta kernel. Entries can then be evaluated for arbitrary index
 * subsets, which the block and incomplete estimators need without ever
 * materializing the full n x n matrix.
 */
class ColumnKernel {
public:
    static ColumnKernel fit(Eigen::VectorXd samples, const KernelSpec& spec);

    Index size() const { return values_.size(); }
    KernelKind kind() const { return kind_; }
    /// Resolved Gaussian bandwidth (0 for the delta kernel).
    double bandwidth() const { return bandwidth_; }

    double operator()(Index i, Index j) const {
        if (kind_ == KernelKind::Gaussian) {
            const double d = values_[i] - values_[j];
            return std::exp(d * d * neg_inv_two_sigma_sq_);
        }
        return codes_[i] == codes_[j] ? inv_counts_[codes_[i]] : 0.0;
    }

    Eigen::MatrixXd gram() const;
    Eigen::MatrixXd gram(std::span<const Index> rows) const;
    /// Gram over the consecutive rows [first, first + count).
    Eigen::MatrixXd gram_block(Index first, Index count) const;

private:
    ColumnKernel() = default;

    KernelKind kind_ = KernelKind::Gaussian;
    Eigen::VectorXd values_;
    double bandwidth_ = 0.0;
    double neg_inv_two_sigma_sq_ = 0.0;
    std::vector<int> codes_;
    std::vector<double> inv_counts_;
};

}  // namespace hsic_psi
