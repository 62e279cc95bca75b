#include "hsic_psi/pipeline.hpp"

#include "hsic_psi/error.hpp"
#include "hsic_psi/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace hsic_psi {

namespace {

double parse_double(const std::string& s) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::InvalidArgument, "expected a number, got '" + s + "'");
    }
    return value;
}

EstimatorSpec seeded(EstimatorSpec spec, std::uint64_t master, std::string_view stage) {
    spec.seed = derive_seed(derive_seed(master, stage), spec.seed);
    return spec;
}

Index min_fold_rows(const PipelineConfig& c) {
    Index rows = 4;
    for (const auto& spec : {c.screen_estimator, c.h_estimator, c.m_estimator}) {
        if (spec.kind == EstimatorKind::Block) rows = std::max<Index>(rows, spec.block_size);
    }
    return rows;
}

ColumnKernel fit_lenient(const Eigen::VectorXd& column, const KernelSpec& spec) {
    try {
        return ColumnKernel::fit(column, spec);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::AllIdentical) throw;
        return ColumnKernel::fit(column, KernelSpec::gaussian(1.0));
    }
}

ColumnKernel fit_response_lenient(const Dataset& data) { return fit_lenient(data.y, data.response_kernel()); }

std::vector<Index> pick(std::span<const Index> from, std::span<const Index> positions) {
    std::vector<Index> out;
    out.reserve(positions.size());
    for (Index k : positions) out.push_back(from[static_cast<std::size_t>(k)]);
    return out;
}

std::vector<ColumnKernel> pick(const std::vector<ColumnKernel>& from, std::span<const Index> positions) {
    std::vector<ColumnKernel> out;
    out.reserve(positions.size());
    for (Index k : positions) out.push_back(from[static_cast<std::size_t>(k)]);
    return out;
}

struct Hyper {
    double lambda = 0.0;
    std::vector<double> grid;
    Eigen::VectorXd w;
};

Hyper select_hyper(const HsicVector& H1, const DependencyMatrix& M1, const PipelineConfig& config) {
    const Index p = H1.size();
    const auto chol = cholesky_reformulate(M1.values, H1.values);
    Hyper out;
    out.w = config.adaptive_gamma ? adaptive_weights(chol.U, chol.y, *config.adaptive_gamma)
                                  : Eigen::VectorXd::Ones(p);
    if (config.lambda.kind == LambdaSelection::Kind::Fixed) {
        out.lambda = config.lambda.value;
        return out;
    }
    double top = lambda_max(H1.values, out.w);
    if (!(top > 0.0)) {
        for (Index j = 0; j < p; ++j) {
            if (out.w[j] > 0.0) top = std::max(top, std::abs(H1.values[j]) / out.w[j]);
        }
    }
    if (!(top > 0.0)) top = 1.0;
    out.grid = lambda_grid(top);
    const int folds = static_cast<int>(std::min<Index>(config.lambda.folds, p));
    if (config.lambda.kind == LambdaSelection::Kind::Aic || folds < 2) {
        out.lambda = aic_lambda(chol.U, chol.y, out.w, out.grid);
    } else {
        out.lambda = cv_lambda(chol.U, chol.y, out.w, out.grid, folds, derive_seed(config.seed, "cv-shuffle"));
    }
    return out;
}

InferenceResult infer_feature(Index k, const std::vector<Index>& S, const HsicVector& H2, const DependencyMatrix& M2,
                              const CovarianceEstimate& cov, const LassoSolution& sol, double lambda,
                              const Eigen::VectorXd& w, const PipelineConfig& config) {
    const Index p = H2.size();
    InferenceResult r;
    r.target = config.target;
    r.side = config.side;
    SelectionEvent event;
    Eigen::VectorXd eta;
    if (config.target == TargetKind::Hsic) {
        eta = eta_hsic(k, p);
        event = config.hsic_full_event ? event_full_model(M2.values, S, lambda, w)
                                       : event_single_feature(M2.values, sol.beta, k, lambda, w);
    } else {
        eta = eta_partial(M2.values, S, k);
        event = event_full_model(M2.values, S, lambda, w);
    }
    r.truncation = truncation_points(event, eta, cov.values, H2.values);
    const TruncatedGaussian null{0.0, r.truncation.variance, r.truncation.lower, r.truncation.upper};
    r.p_value = p_value(null, r.truncation.observed, config.side);
    // alpha = 1 rejects everything; the interval is then the whole line.
    if (config.alpha < 1.0) r.ci = confidence_interval(r.truncation, config.alpha, config.side);
    return r;
}

}  // namespace

std::string LambdaSelection::to_string() const {
    switch (kind) {
        case Kind::Cv: return "cv:" + std::to_string(folds);
        case Kind::Aic: return "aic";
        case Kind::Fixed: {
            char buf[32];
            const auto res = std::to_chars(buf, buf + sizeof buf, value);
            return "fixed:" + std::string(buf, res.ptr);
        }
    }
    return "cv:10";
}

LambdaSelection LambdaSelection::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (head == "aic" && arg.empty()) return aic();
    if (head == "cv") {
        if (arg.empty()) return cv();
        const double f = parse_double(arg);
        if (f != std::floor(f) || f < 2) throw Error(ErrorCode::InvalidArgument, "cv needs an integer fold count >= 2");
        return cv(static_cast<int>(f));
    }
    if (head == "fixed" && !arg.empty()) return fixed(parse_double(arg));
    throw Error(ErrorCode::InvalidArgument, "unknown lambda selection '" + text + "'");
}

void PipelineConfig::validate() const {
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
    if (screen_count < 1) throw Error(ErrorCode::InvalidArgument, "screen count must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
    screen_estimator.validate();
    h_estimator.validate();
    m_estimator.validate();
    if (!h_estimator.has_summands()) {
        throw Error(ErrorCode::InvalidArgument, "the H estimator must be block or incomplete (its covariance is needed)");
    }
    if (lambda.kind == LambdaSelection::Kind::Fixed && !(lambda.value >= 0.0 && std::isfinite(lambda.value))) {
        throw Error(ErrorCode::InvalidArgument, "fixed lambda must be finite and >= 0");
    }
    if (lambda.kind == LambdaSelection::Kind::Cv && lambda.folds < 2) {
        throw Error(ErrorCode::DegenerateFolds, "cross-validation needs at least 2 folds");
    }
    if (adaptive_gamma && !(*adaptive_gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "adaptive gamma must be positive");
}

FoldSplit split_rows(Index n, double split_ratio, std::uint64_t seed, Index min_rows) {
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
    const auto first = static_cast<Index>(std::ceil(split_ratio * static_cast<double>(n)));
    if (first < min_rows || n - first < min_rows) {
        throw Error(ErrorCode::FoldTooSmall, "folds of " + std::to_string(first) + " and " + std::to_string(n - first) +
                                                 " rows; each needs at least " + std::to_string(min_rows));
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed);
    // Fisher-Yates with an explicit uniform draw so the permutation does not
    // depend on the standard library's shuffle.
    for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick_index(0, i - 1);
        std::swap(order[i - 1], order[pick_index(rng)]);
    }
    FoldSplit out;
    out.fold1.assign(order.begin(), order.begin() + first);
    out.fold2.assign(order.begin() + first, order.end());
    std::sort(out.fold1.begin(), out.fold1.end());
    std::sort(out.fold2.begin(), out.fold2.end());
    return out;
}

std::vector<Index> screen(const Eigen::Ref<const Eigen::VectorXd>& H, Index count) {
    const Index p = H.size();
    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return H[a] > H[b]; });
    order.resize(static_cast<std::size_t>(std::min(count, p)));
    return order;
}

std::vector<ColumnKernel> fit_kernels_lenient(const Dataset& data) {
    std::vector<ColumnKernel> out;
    out.reserve(static_cast<std::size_t>(data.features()));
    for (Index j = 0; j < data.features(); ++j) {
        out.push_back(fit_lenient(data.X.col(j), data.feature_kernels[static_cast<std::size_t>(j)]));
    }
    return out;
}

RunReport run_psi(const Dataset& data, const PipelineConfig& config) {
    config.validate();
    data.validate();
    const auto folds = split_rows(data.rows(), config.split_ratio, derive_seed(config.seed, "split"), min_fold_rows(config));
    RunReport report = run_on_folds(data.subset_rows(folds.fold1), data.subset_rows(folds.fold2), config);
    report.rows = data.rows();
    return report;
}

RunReport run_on_folds(const Dataset& fold1, const Dataset& fold2, const PipelineConfig& config) {
    config.validate();
    fold1.validate();
    fold2.validate();
    if (fold1.features() != fold2.features()) throw Error(ErrorCode::SizeMismatch, "folds have different feature counts");

    RunReport report;
    report.config = config;
    report.rows = fold1.rows() + fold2.rows();
    report.features = fold1.features();
    report.fold1_rows = fold1.row_ids;
    report.fold2_rows = fold2.row_ids;

    // Fold 1: screening and hyper-parameters.
    const auto k1 = fit_kernels_lenient(fold1);
    const auto r1 = fit_response_lenient(fold1);
    const auto H1_all = estimate_H(k1, r1, fold1.feature_ids, seeded(config.screen_estimator, config.seed, "fold1-h"));
    report.provenance.screen_rows = fold1.row_ids;
    const auto screened = screen(H1_all.values, config.screen_count);
    report.screened = pick(fold1.feature_ids, screened);

    HsicVector H1;
    H1.values = H1_all.values(screened);
    H1.spec = H1_all.spec;
    const auto k1s = pick(k1, screened);
    const auto ids1 = pick(fold1.feature_ids, screened);
    const EstimatorSpec m1_spec = config.fold1_match_fold2 ? config.m_estimator : config.screen_estimator;
    const auto M1 = project_pd(estimate_M(k1s, ids1, seeded(m1_spec, config.seed, "fold1-m")));
    const auto hyper = select_hyper(H1, M1, config);
    report.provenance.lambda_rows = fold1.row_ids;
    report.lambda = hyper.lambda;
    report.lambda_grid = hyper.grid;
    report.weights = hyper.w;

    // Fold 2: selection and inference on the screened features only.
    const Dataset f2 = fold2.subset_features(screened);
    const auto k2 = fit_kernels_lenient(f2);
    const auto r2 = fit_response_lenient(f2);
    const auto H2 = estimate_H(k2, r2, f2.feature_ids, seeded(config.h_estimator, config.seed, "fold2-h"));
    report.provenance.h_rows = f2.row_ids;
    const auto M2 = project_pd(estimate_M(k2, f2.feature_ids, seeded(config.m_estimator, config.seed, "fold2-m")));
    report.provenance.m_rows = f2.row_ids;
    report.pd_projected = M2.pd_projected;
    const auto cov = estimate_cov(H2, config.cov_method);
    report.provenance.cov_rows = f2.row_ids;

    const auto sol = solve(LassoProblem{H2.values, M2.values, hyper.lambda, hyper.w});
    report.beta = sol.beta;
    report.empty_selection = sol.active.empty();
    if (report.empty_selection) return report;
    if (hyper.lambda == 0.0) {
        // Without a penalty the selection event is undefined; report the
        // selection without tests.
        for (Index k : sol.active) {
            FeatureReport fr;
            fr.feature = f2.feature_ids[static_cast<std::size_t>(k)];
            fr.name = f2.feature_names[static_cast<std::size_t>(k)];
            fr.beta = sol.beta[k];
            fr.diagnostic = std::string(to_string(ErrorCode::LambdaZero)) + ": selection event is undefined at lambda = 0";
            report.selected.push_back(fr.feature);
            report.results.push_back(std::move(fr));
        }
        return report;
    }

    for (Index k : sol.active) {
        FeatureReport fr;
        fr.feature = f2.feature_ids[static_cast<std::size_t>(k)];
        fr.name = f2.feature_names[static_cast<std::size_t>(k)];
        fr.beta = sol.beta[k];
        report.selected.push_back(fr.feature);
        try {
            auto inf = infer_feature(k, sol.active, H2, M2, cov, sol, hyper.lambda, hyper.w, config);
            inf.feature = fr.feature;
            fr.significant = inf.p_value <= config.alpha;
            fr.inference = std::move(inf);
        } catch (const Error& e) {
            fr.diagnostic = e.what();
        }
        if (fr.significant) report.significant.push_back(fr.feature);
        report.results.push_back(std::move(fr));
    }
    return report;
}

}  // namespace hsic_psi
