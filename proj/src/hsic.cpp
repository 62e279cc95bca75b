#include "hsic_psi/hsic.hpp"

#include "hsic_psi/error.hpp"

#include <algorithm>
#include <charconv>

namespace hsic_psi {

namespace {

void require_same_square(const Eigen::Ref<const Eigen::MatrixXd>& K, const Eigen::Ref<const Eigen::MatrixXd>& L) {
    if (K.rows() != K.cols() || L.rows() != L.cols() || K.rows() != L.rows()) {
        throw Error(ErrorCode::SizeMismatch, "Gram matrices must be square and of equal size");
    }
}

// Pieces of the unbiased estimator that depend on one Gram matrix only:
// the zero-diagonal matrix, its row sums and its total sum.
struct UnbiasedParts {
    Eigen::MatrixXd tilde;
    Eigen::VectorXd row_sums;
    double total = 0.0;

    explicit UnbiasedParts(const Eigen::Ref<const Eigen::MatrixXd>& G) : tilde(G) {
        tilde.diagonal().setZero();
        row_sums = tilde.rowwise().sum();
        total = row_sums.sum();
    }
};

double unbiased_from_parts(const UnbiasedParts& k, const UnbiasedParts& l) {
    const auto n = static_cast<double>(k.tilde.rows());
    const double trace_term = k.tilde.cwiseProduct(l.tilde).sum();
    const double sums_term = k.total * l.total / ((n - 1.0) * (n - 2.0));
    const double cross_term = 2.0 / (n - 2.0) * k.row_sums.dot(l.row_sums);
    return (trace_term + sums_term - cross_term) / (n * (n - 3.0));
}

double h_on_quadruple(const ColumnKernel& kx, const ColumnKernel& ky, const Quadruple& q) {
    Eigen::Matrix4d K;
    Eigen::Matrix4d L;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            K(a, b) = kx(q[static_cast<std::size_t>(a)], q[static_cast<std::size_t>(b)]);
            L(a, b) = ky(q[static_cast<std::size_t>(a)], q[static_cast<std::size_t>(b)]);
        }
    }
    return ustat_kernel_h(K, L, {0, 1, 2, 3});
}

void require_same_length(const ColumnKernel& kx, const ColumnKernel& ky) {
    if (kx.size() != ky.size()) throw Error(ErrorCode::SizeMismatch, "kernel samples differ in length");
}

int parse_int(std::string_view s) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::InvalidArgument, "expected an integer, got '" + std::string(s) + "'");
    }
    return value;
}

}  // namespace

void EstimatorSpec::validate() const {
    if (kind == EstimatorKind::Block && block_size < 4) {
        throw Error(ErrorCode::BlockTooSmall, "block size must be at least 4");
    }
    if (kind == EstimatorKind::Incomplete && size_ratio < 1) {
        throw Error(ErrorCode::InvalidArgument, "incomplete size ratio must be >= 1");
    }
}

std::string EstimatorSpec::to_string() const {
    switch (kind) {
        case EstimatorKind::Biased: return "biased";
        case EstimatorKind::Unbiased: return "unbiased";
        case EstimatorKind::Block: return "block:" + std::to_string(block_size);
        case EstimatorKind::Incomplete: return "incomplete:" + std::to_string(size_ratio);
    }
    return "unknown";
}

EstimatorSpec EstimatorSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    EstimatorSpec spec;
    if (head == "biased") {
        spec = biased();
    } else if (head == "unbiased") {
        spec = unbiased();
    } else if (head == "block") {
        spec = block(arg.empty() ? 10 : parse_int(arg));
    } else if (head == "incomplete") {
        spec = incomplete(arg.empty() ? 1 : parse_int(arg));
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + text + "'");
    }
    spec.validate();
    return spec;
}

double hsic_biased(const Eigen::Ref<const Eigen::MatrixXd>& K, const Eigen::Ref<const Eigen::MatrixXd>& L) {
    require_same_square(K, L);
    const Index n = K.rows();
    if (n < 2) throw Error(ErrorCode::TooFewSamples, "biased HSIC needs n >= 2");
    const auto Kc = center({K, false}).values;
    const auto Lc = center({L, false}).values;
    // tr(KΓLΓ) = <ΓKΓ, ΓLΓ> because Γ is symmetric and idempotent.
    const double nm1 = static_cast<double>(n - 1);
    return Kc.cwiseProduct(Lc).sum() / (nm1 * nm1);
}

double hsic_biased(const GramMatrix& K, const GramMatrix& L) {
    return hsic_biased(K.values, L.values);
}

double hsic_unbiased(const Eigen::Ref<const Eigen::MatrixXd>& K, const Eigen::Ref<const Eigen::MatrixXd>& L) {
    require_same_square(K, L);
    if (K.rows() < 4) throw Error(ErrorCode::TooFewSamples, "unbiased HSIC needs n >= 4");
    return unbiased_from_parts(UnbiasedParts(K), UnbiasedParts(L));
}

double hsic_unbiased(const GramMatrix& K, const GramMatrix& L) {
    return hsic_unbiased(K.values, L.values);
}

double ustat_kernel_h(const Eigen::Ref<const Eigen::MatrixXd>& K, const Eigen::Ref<const Eigen::MatrixXd>& L,
                      const Quadruple& q) {
    require_same_square(K, L);
    for (std::size_t a = 0; a < 4; ++a) {
        if (q[a] < 0 || q[a] >= K.rows()) throw Error(ErrorCode::IndexOutOfRange, "quadruple index out of range");
        for (std::size_t b = a + 1; b < 4; ++b) {
            if (q[a] == q[b]) throw Error(ErrorCode::DuplicateIndex, "quadruple indices must be distinct");
        }
    }
    std::array<Index, 4> perm = q;
    std::sort(perm.begin(), perm.end());
    double sum = 0.0;
    do {
        const auto [s, t, u, v] = perm;
        sum += K(s, t) * (L(s, t) + L(u, v) - 2.0 * L(s, u));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum / 24.0;
}

double hsic_block(const ColumnKernel& kx, const ColumnKernel& ky, int block_size, std::vector<double>* summands) {
    require_same_length(kx, ky);
    if (block_size < 4) throw Error(ErrorCode::BlockTooSmall, "block size must be at least 4");
    const Index blocks = kx.size() / block_size;
    if (blocks < 1) {
        throw Error(ErrorCode::BlockTooSmall, "fewer samples than one block of size " + std::to_string(block_size));
    }
    if (summands) summands->clear();
    double sum = 0.0;
    for (Index b = 0; b < blocks; ++b) {
        const Index first = b * block_size;
        const double est = hsic_unbiased(kx.gram_block(first, block_size), ky.gram_block(first, block_size));
        sum += est;
        if (summands) summands->push_back(est);
    }
    return sum / static_cast<double>(blocks);
}

Quadruple draw_quadruple(Index n, Rng& rng) {
    // Floyd: uniform k-subset of {0..n-1} with k = 4.
    Quadruple out{};
    std::size_t filled = 0;
    for (Index j = n - 4; j < n; ++j) {
        std::uniform_int_distribution<Index> pick(0, j);
        const Index t = pick(rng);
        const bool seen = std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(filled), t) !=
                          out.begin() + static_cast<std::ptrdiff_t>(filled);
        out[filled++] = seen ? j : t;
    }
    std::sort(out.begin(), out.end());
    return out;
}

double hsic_incomplete(const ColumnKernel& kx, const ColumnKernel& ky, int size_ratio, Rng& rng,
                       std::vector<double>* summands) {
    require_same_length(kx, ky);
    const Index n = kx.size();
    if (n < 4) throw Error(ErrorCode::TooFewSamples, "incomplete HSIC needs n >= 4");
    if (size_ratio < 1) throw Error(ErrorCode::InvalidArgument, "incomplete size ratio must be >= 1");
    const Index m = static_cast<Index>(size_ratio) * n;
    std::vector<Quadruple> subsets(static_cast<std::size_t>(m));
    for (auto& q : subsets) q = draw_quadruple(n, rng);
    return hsic_incomplete(kx, ky, subsets, summands);
}

double hsic_incomplete(const ColumnKernel& kx, const ColumnKernel& ky, std::span<const Quadruple> subsets,
                       std::vector<double>* summands) {
    require_same_length(kx, ky);
    if (kx.size() < 4) throw Error(ErrorCode::TooFewSamples, "incomplete HSIC needs n >= 4");
    if (subsets.empty()) throw Error(ErrorCode::InvalidArgument, "no subsets given");
    if (summands) summands->clear();
    double sum = 0.0;
    for (const auto& q : subsets) {
        for (std::size_t a = 0; a < 4; ++a) {
            if (q[a] < 0 || q[a] >= kx.size()) throw Error(ErrorCode::IndexOutOfRange, "subset index out of range");
            for (std::size_t b = a + 1; b < 4; ++b) {
                if (q[a] == q[b]) throw Error(ErrorCode::DuplicateIndex, "subset indices must be distinct");
            }
        }
        const double h = h_on_quadruple(kx, ky, q);
        sum += h;
        if (summands) summands->push_back(h);
    }
    return sum / static_cast<double>(subsets.size());
}

double hsic_pair(const ColumnKernel& kx, const ColumnKernel& ky, const EstimatorSpec& spec, std::uint64_t stream,
                 std::vector<double>* summands) {
    switch (spec.kind) {
        case EstimatorKind::Biased:
            return hsic_biased(kx.gram(), ky.gram());
        case EstimatorKind::Unbiased:
            return hsic_unbiased(kx.gram(), ky.gram());
        case EstimatorKind::Block:
            return hsic_block(kx, ky, spec.block_size, summands);
        case EstimatorKind::Incomplete: {
            Rng rng(stream);
            return hsic_incomplete(kx, ky, spec.size_ratio, rng, summands);
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown estimator kind");
}

std::vector<ColumnKernel> fit_feature_kernels(const Dataset& data) {
    std::vector<ColumnKernel> out;
    out.reserve(static_cast<std::size_t>(data.features()));
    for (Index j = 0; j < data.features(); ++j) {
        out.push_back(ColumnKernel::fit(data.X.col(j), data.feature_kernels[static_cast<std::size_t>(j)]));
    }
    return out;
}

ColumnKernel fit_response_kernel(const Dataset& data) {
    return ColumnKernel::fit(data.y, data.response_kernel());
}

HsicVector estimate_H(const Dataset& data, const EstimatorSpec& spec) {
    const auto features = fit_feature_kernels(data);
    return estimate_H(features, fit_response_kernel(data), data.feature_ids, spec);
}

HsicVector estimate_H(std::span<const ColumnKernel> features, const ColumnKernel& response,
                      std::span<const Index> feature_ids, const EstimatorSpec& spec) {
    spec.validate();
    if (feature_ids.size() != features.size()) {
        throw Error(ErrorCode::SizeMismatch, "feature ids do not match the feature count");
    }
    const auto p = static_cast<Index>(features.size());
    HsicVector out;
    out.spec = spec;
    out.values.resize(p);
    const Index n = response.size();

    if (!spec.has_summands()) {
        // Full-sample estimators share the response Gram across features.
        const Eigen::MatrixXd L = response.gram();
        if (spec.kind == EstimatorKind::Unbiased) {
            if (n < 4) throw Error(ErrorCode::TooFewSamples, "unbiased HSIC needs n >= 4");
            const UnbiasedParts lp(L);
            for (Index j = 0; j < p; ++j) {
                out.values[j] = unbiased_from_parts(UnbiasedParts(features[static_cast<std::size_t>(j)].gram()), lp);
            }
        } else {
            for (Index j = 0; j < p; ++j) out.values[j] = hsic_biased(features[static_cast<std::size_t>(j)].gram(), L);
        }
        out.scale = static_cast<double>(n);
        return out;
    }

    std::vector<double> summands;
    for (Index j = 0; j < p; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const auto stream = derive_seed(spec.seed, static_cast<std::uint64_t>(feature_ids[js]));
        out.values[j] = hsic_pair(features[js], response, spec, stream, &summands);
        if (j == 0) out.summands.resize(static_cast<Index>(summands.size()), p);
        out.summands.col(j) = Eigen::Map<const Eigen::VectorXd>(summands.data(), static_cast<Index>(summands.size()));
    }
    out.scale = static_cast<double>(out.summands.rows());
    return out;
}

DependencyMatrix estimate_M(const Dataset& data, const EstimatorSpec& spec) {
    const auto features = fit_feature_kernels(data);
    return estimate_M(features, data.feature_ids, spec);
}

DependencyMatrix estimate_M(std::span<const ColumnKernel> features, std::span<const Index> feature_ids,
                            const EstimatorSpec& spec) {
    spec.validate();
    if (feature_ids.size() != features.size()) {
        throw Error(ErrorCode::SizeMismatch, "feature ids do not match the feature count");
    }
    const auto p = static_cast<Index>(features.size());
    DependencyMatrix out;
    out.values.resize(p, p);

    if (spec.kind == EstimatorKind::Unbiased) {
        // Precompute per-feature pieces once; each pair is then O(n^2).
        std::vector<UnbiasedParts> parts;
        parts.reserve(static_cast<std::size_t>(p));
        for (const auto& k : features) {
            if (k.size() < 4) throw Error(ErrorCode::TooFewSamples, "unbiased HSIC needs n >= 4");
            parts.emplace_back(k.gram());
        }
        for (Index s = 0; s < p; ++s) {
            for (Index r = s; r < p; ++r) {
                const double v = unbiased_from_parts(parts[static_cast<std::size_t>(s)], parts[static_cast<std::size_t>(r)]);
                out.values(s, r) = v;
                out.values(r, s) = v;
            }
        }
        return out;
    }
    if (spec.kind == EstimatorKind::Biased) {
        std::vector<Eigen::MatrixXd> grams;
        for (const auto& k : features) grams.push_back(k.gram());
        for (Index s = 0; s < p; ++s) {
            for (Index r = s; r < p; ++r) {
                const double v = hsic_biased(grams[static_cast<std::size_t>(s)], grams[static_cast<std::size_t>(r)]);
                out.values(s, r) = v;
                out.values(r, s) = v;
            }
        }
        return out;
    }
    for (Index s = 0; s < p; ++s) {
        for (Index r = s; r < p; ++r) {
            const auto stream = derive_seed(spec.seed, static_cast<std::uint64_t>(feature_ids[static_cast<std::size_t>(s)]),
                                            static_cast<std::uint64_t>(feature_ids[static_cast<std::size_t>(r)]));
            const double v = hsic_pair(features[static_cast<std::size_t>(s)], features[static_cast<std::size_t>(r)], spec, stream);
            out.values(s, r) = v;
            out.values(r, s) = v;
        }
    }
    return out;
}

double default_pd_floor(const Eigen::Ref<const Eigen::MatrixXd>& M) {
    if (M.size() == 0) return 1e-6;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    return 1e-6 * std::max(eig.eigenvalues().maxCoeff(), 1.0);
}

DependencyMatrix project_pd(const DependencyMatrix& M, double floor) {
    const Eigen::MatrixXd& v = M.values;
    if (v.rows() != v.cols()) throw Error(ErrorCode::SizeMismatch, "matrix must be square");
    if (!(floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "eigenvalue floor must be positive");
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error(ErrorCode::NotSymmetric, "matrix is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
    Eigen::VectorXd lambda = eig.eigenvalues();
    DependencyMatrix out{v, true, floor};
    if (lambda.minCoeff() >= floor) return out;
    lambda = lambda.cwiseMax(floor);
    const Eigen::MatrixXd& Q = eig.eigenvectors();
    out.values = Q * lambda.asDiagonal() * Q.transpose();
    out.values = 0.5 * (out.values + out.values.transpose()).eval();
    return out;
}

DependencyMatrix project_pd(const DependencyMatrix& M) {
    return project_pd(M, default_pd_floor(M.values));
}

double oas_shrinkage(const Eigen::Ref<const Eigen::MatrixXd>& S, Index count) {
    const auto p = static_cast<double>(S.rows());
    const auto c = static_cast<double>(count);
    const double tr = S.trace();
    const double tr_sq = S.cwiseProduct(S).sum();  // tr(S^2) for symmetric S
    const double num = (1.0 - 2.0 / p) * tr_sq + tr * tr;
    const double den = (c + 1.0 - 2.0 / p) * (tr_sq - tr * tr / p);
    if (den <= 0.0) return 1.0;
    return std::min(1.0, num / den);
}

CovarianceEstimate estimate_cov(const HsicVector& H, CovMethod method) {
    return estimate_cov(H.summands, method);
}

CovarianceEstimate estimate_cov(const Eigen::Ref<const Eigen::MatrixXd>& summands, CovMethod method) {
    const Index c = summands.rows();
    const Index p = summands.cols();
    if (c < 2) throw Error(ErrorCode::TooFewSummands, "covariance needs at least 2 summands per feature");
    const Eigen::MatrixXd centered = summands.rowwise() - summands.colwise().mean();
    Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(c - 1);
    S = 0.5 * (S + S.transpose()).eval();

    CovarianceEstimate out;
    out.method = method;
    out.sample_count = c;
    if (method == CovMethod::Oas && p > 1) {
        const double rho = oas_shrinkage(S, c);
        const double mu = S.trace() / static_cast<double>(p);
        S *= (1.0 - rho);
        S.diagonal().array() += rho * mu;
        out.shrinkage = rho;
    }
    out.values = S / static_cast<double>(c);
    return out;
}

}  // namespace hsic_psi
