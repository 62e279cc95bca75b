#pragma once

#include "hsic_psi/kernels.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace hsic_psi {

/**
 * n x p covariates plus a response.
 *
 * Categorical responses are stored as integer codes in `y` with the original
 * labels in `response_labels` (code k maps to response_labels[k]).
 * `feature_ids` and `row_ids` track positions in the originating data set so
 * that subsets produced by splitting and screening stay traceable.
 */
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    bool categorical_response = false;
    std::vector<std::string> response_labels;
    std::vector<std::string> feature_names;
    std::vector<KernelSpec> feature_kernels;
    std::vector<Index> feature_ids;
    std::vector<Index> row_ids;

    Index rows() const { return X.rows(); }
    Index features() const { return X.cols(); }

    KernelSpec response_kernel() const {
        return categorical_response ? KernelSpec::normalized_delta() : KernelSpec::median_heuristic();
    }

    /// Fills defaults for missing names, kernels and ids; then validates.
    static Dataset make(Eigen::MatrixXd X, Eigen::VectorXd y, bool categorical_response = false);

    void validate() const;

    Dataset subset_rows(std::span<const Index> rows) const;
    Dataset subset_features(std::span<const Index> columns) const;
};

}  // namespace hsic_psi
