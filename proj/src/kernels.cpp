#include "hsic_psi/kernels.hpp"

#include "hsic_psi/error.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace hsic_psi {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
    if (!samples.allFinite()) {
        throw Error(ErrorCode::NonFinite, "kernel input contains NaN or infinite values");
    }
}

double median_in_place(std::vector<double>& v) {
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double median_of_distances(std::vector<double> dists) {
    if (dists.empty()) {
        throw Error(ErrorCode::TooFewSamples, "median heuristic needs at least 2 samples");
    }
    const bool any_positive = std::any_of(dists.begin(), dists.end(), [](double d) { return d > 0.0; });
    if (!any_positive) {
        throw Error(ErrorCode::AllIdentical, "all samples are identical, bandwidth undefined");
    }
    double med = median_in_place(dists);
    if (med > 0.0) return med;
    // More than half of the pairs coincide (discrete data); fall back to the
    // median of the non-zero distances so the bandwidth stays positive.
    std::erase_if(dists, [](double d) { return d <= 0.0; });
    return median_in_place(dists);
}

std::vector<int> encode_labels(const Eigen::VectorXd& values, std::vector<double>& inv_counts) {
    std::map<double, int> code_of;
    for (Index i = 0; i < values.size(); ++i) code_of.emplace(values[i], 0);
    int next = 0;
    for (auto& [label, code] : code_of) code = next++;
    std::vector<int> codes(static_cast<std::size_t>(values.size()));
    std::vector<double> counts(code_of.size(), 0.0);
    for (Index i = 0; i < values.size(); ++i) {
        const int c = code_of.at(values[i]);
        codes[static_cast<std::size_t>(i)] = c;
        counts[static_cast<std::size_t>(c)] += 1.0;
    }
    inv_counts.resize(counts.size());
    std::transform(counts.begin(), counts.end(), inv_counts.begin(), [](double c) { return 1.0 / c; });
    return codes;
}

}  // namespace

KernelSpec KernelSpec::gaussian(double sigma) {
    KernelSpec spec{KernelKind::Gaussian, sigma};
    spec.validate();
    return spec;
}

void KernelSpec::validate() const {
    if (kind == KernelKind::NormalizedDelta && bandwidth) {
        throw Error(ErrorCode::InvalidArgument, "normalized delta kernel takes no bandwidth");
    }
    if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
        throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive and finite");
    }
}

double median_bandwidth(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
    require_finite(samples);
    const Index n = samples.rows();
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            dists.push_back((samples.row(i) - samples.row(j)).norm());
        }
    }
    return median_of_distances(std::move(dists));
}

double median_bandwidth(std::span<const double> samples) {
    const Eigen::Map<const Eigen::VectorXd> col(samples.data(), static_cast<Index>(samples.size()));
    require_finite(col);
    const auto n = samples.size();
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) dists.push_back(std::abs(samples[i] - samples[j]));
    }
    return median_of_distances(std::move(dists));
}

GramMatrix gram(const Eigen::Ref<const Eigen::MatrixXd>& samples, const KernelSpec& spec) {
    spec.validate();
    require_finite(samples);
    const Index n = samples.rows();
    GramMatrix g{Eigen::MatrixXd(n, n), false};
    if (spec.kind == KernelKind::Gaussian) {
        const double sigma = spec.bandwidth ? *spec.bandwidth : median_bandwidth(samples);
        const double scale = -1.0 / (2.0 * sigma * sigma);
        for (Index i = 0; i < n; ++i) {
            g.values(i, i) = 1.0;
            for (Index j = i + 1; j < n; ++j) {
                const double v = std::exp(scale * (samples.row(i) - samples.row(j)).squaredNorm());
                g.values(i, j) = v;
                g.values(j, i) = v;
            }
        }
        return g;
    }
    if (samples.cols() != 1) {
        throw Error(ErrorCode::SizeMismatch, "normalized delta kernel expects one label per sample");
    }
    std::vector<double> inv_counts;
    const auto codes = encode_labels(samples.col(0), inv_counts);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            const auto ci = codes[static_cast<std::size_t>(i)];
            g.values(i, j) = ci == codes[static_cast<std::size_t>(j)] ? inv_counts[static_cast<std::size_t>(ci)] : 0.0;
        }
    }
    return g;
}

GramMatrix gram(std::span<const double> samples, const KernelSpec& spec) {
    const Eigen::Map<const Eigen::MatrixXd> col(samples.data(), static_cast<Index>(samples.size()), 1);
    return gram(col, spec);
}

GramMatrix center(const GramMatrix& g) {
    const Eigen::MatrixXd& v = g.values;
    if (v.rows() != v.cols()) {
        throw Error(ErrorCode::SizeMismatch, "Gram matrix must be square");
    }
    // Γ G Γ = G - row means - column means + grand mean
    const Eigen::VectorXd row_mean = v.rowwise().mean();
    const Eigen::RowVectorXd col_mean = v.colwise().mean();
    const double grand = v.mean();
    Eigen::MatrixXd c = v;
    c.colwise() -= row_mean;
    c.rowwise() -= col_mean;
    c.array() += grand;
    return {std::move(c), true};
}

ColumnKernel ColumnKernel::fit(Eigen::VectorXd samples, const KernelSpec& spec) {
    spec.validate();
    require_finite(samples);
    ColumnKernel k;
    k.kind_ = spec.kind;
    if (spec.kind == KernelKind::Gaussian) {
        k.bandwidth_ = spec.bandwidth
                           ? *spec.bandwidth
                           : median_bandwidth(std::span<const double>(samples.data(), static_cast<std::size_t>(samples.size())));
        k.neg_inv_two_sigma_sq_ = -1.0 / (2.0 * k.bandwidth_ * k.bandwidth_);
    } else {
        k.codes_ = encode_labels(samples, k.inv_counts_);
    }
    k.values_ = std::move(samples);
    return k;
}

Eigen::MatrixXd ColumnKernel::gram() const {
    return gram_block(0, size());
}

Eigen::MatrixXd ColumnKernel::gram(std::span<const Index> rows) const {
    const auto m = static_cast<Index>(rows.size());
    Eigen::MatrixXd g(m, m);
    for (Index a = 0; a < m; ++a) {
        g(a, a) = (*this)(rows[static_cast<std::size_t>(a)], rows[static_cast<std::size_t>(a)]);
        for (Index b = a + 1; b < m; ++b) {
            const double v = (*this)(rows[static_cast<std::size_t>(a)], rows[static_cast<std::size_t>(b)]);
            g(a, b) = v;
            g(b, a) = v;
        }
    }
    return g;
}

Eigen::MatrixXd ColumnKernel::gram_block(Index first, Index count) const {
    Eigen::MatrixXd g(count, count);
    for (Index a = 0; a < count; ++a) {
        g(a, a) = (*this)(first + a, first + a);
        for (Index b = a + 1; b < count; ++b) {
            const double v = (*this)(first + a, first + b);
            g(a, b) = v;
            g(b, a) = v;
        }
    }
    return g;
}

}  // namespace hsic_psi
