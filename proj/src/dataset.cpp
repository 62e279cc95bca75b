#include "hsic_psi/dataset.hpp"

#include "hsic_psi/error.hpp"

#include <numeric>

namespace hsic_psi {

Dataset Dataset::make(Eigen::MatrixXd X, Eigen::VectorXd y, bool categorical_response) {
    Dataset d;
    d.X = std::move(X);
    d.y = std::move(y);
    d.categorical_response = categorical_response;
    const Index p = d.X.cols();
    for (Index j = 0; j < p; ++j) d.feature_names.push_back("X" + std::to_string(j + 1));
    d.feature_kernels.assign(static_cast<std::size_t>(p), KernelSpec::median_heuristic());
    d.feature_ids.resize(static_cast<std::size_t>(p));
    std::iota(d.feature_ids.begin(), d.feature_ids.end(), Index{0});
    d.row_ids.resize(static_cast<std::size_t>(d.X.rows()));
    std::iota(d.row_ids.begin(), d.row_ids.end(), Index{0});
    d.validate();
    return d;
}

void Dataset::validate() const {
    const auto p = static_cast<std::size_t>(X.cols());
    if (X.rows() != y.size()) {
        throw Error(ErrorCode::SizeMismatch, "covariate and response row counts differ");
    }
    if (feature_names.size() != p || feature_kernels.size() != p || feature_ids.size() != p) {
        throw Error(ErrorCode::SizeMismatch, "per-feature metadata does not match the column count");
    }
    if (row_ids.size() != static_cast<std::size_t>(X.rows())) {
        throw Error(ErrorCode::SizeMismatch, "row ids do not match the row count");
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw Error(ErrorCode::NonFinite, "data contains NaN or infinite values");
    }
}

Dataset Dataset::subset_rows(std::span<const Index> rows) const {
    Dataset d = *this;
    const auto m = static_cast<Index>(rows.size());
    d.X.resize(m, X.cols());
    d.y.resize(m);
    d.row_ids.resize(rows.size());
    for (Index i = 0; i < m; ++i) {
        const Index r = rows[static_cast<std::size_t>(i)];
        if (r < 0 || r >= X.rows()) throw Error(ErrorCode::IndexOutOfRange, "row index out of range");
        d.X.row(i) = X.row(r);
        d.y[i] = y[r];
        d.row_ids[static_cast<std::size_t>(i)] = row_ids[static_cast<std::size_t>(r)];
    }
    return d;
}

Dataset Dataset::subset_features(std::span<const Index> columns) const {
    Dataset d;
    d.y = y;
    d.categorical_response = categorical_response;
    d.response_labels = response_labels;
    d.row_ids = row_ids;
    d.X.resize(X.rows(), static_cast<Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const Index c = columns[k];
        if (c < 0 || c >= X.cols()) throw Error(ErrorCode::IndexOutOfRange, "feature index out of range");
        const auto cs = static_cast<std::size_t>(c);
        d.X.col(static_cast<Index>(k)) = X.col(c);
        d.feature_names.push_back(feature_names[cs]);
        d.feature_kernels.push_back(feature_kernels[cs]);
        d.feature_ids.push_back(feature_ids[cs]);
    }
    return d;
}

}  // namespace hsic_psi
