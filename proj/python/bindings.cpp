#include "hsic_psi/error.hpp"
#include "hsic_psi/hsic.hpp"
#include "hsic_psi/io.hpp"
#include "hsic_psi/nnlasso.hpp"
#include "hsic_psi/pipeline.hpp"
#include "hsic_psi/report.hpp"
#include "hsic_psi/selective.hpp"
#include "hsic_psi/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <numeric>

namespace py = pybind11;
using namespace hsic_psi;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& X, std::optional<Eigen::VectorXd> y, bool categorical) {
    // estimate_M only needs features; a placeholder response keeps validation happy.
    Eigen::VectorXd response = y ? *y : Eigen::VectorXd::LinSpaced(X.rows(), 0.0, 1.0);
    return Dataset::make(X, response, categorical);
}

SelectionEvent event_from(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    std::vector<Index> ordering(static_cast<std::size_t>(A.cols()));
    std::iota(ordering.begin(), ordering.end(), Index{0});
    return {A, b, ordering};
}

py::dict truncation_dict(const TruncationResult& t) {
    py::dict d;
    d["lower"] = t.lower;
    d["upper"] = t.upper;
    d["observed"] = t.observed;
    d["variance"] = t.variance;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "HSIC-Lasso feature selection with post-selection inference";

    static py::exception<Error> error_type(m, "HsicPsiError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error_type.ptr(), e.what());
        }
    });

    m.def(
        "gram",
        [](const Eigen::VectorXd& x, const std::string& kernel) { return gram(std::span<const double>(x.data(), x.size()), parse_kernel_spec(kernel)).values; },
        py::arg("x"), py::arg("kernel") = "median");
    m.def(
        "median_bandwidth", [](const Eigen::VectorXd& x) { return median_bandwidth(std::span<const double>(x.data(), x.size())); },
        py::arg("x"));
    m.def(
        "hsic_biased", [](const Eigen::MatrixXd& K, const Eigen::MatrixXd& L) { return hsic_biased(K, L); }, py::arg("K"),
        py::arg("L"));
    m.def(
        "hsic_unbiased", [](const Eigen::MatrixXd& K, const Eigen::MatrixXd& L) { return hsic_unbiased(K, L); },
        py::arg("K"), py::arg("L"));

    m.def(
        "estimate_H",
        [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::string& estimator, bool categorical) {
            const auto H = estimate_H(make_dataset(X, y, categorical), EstimatorSpec::parse(estimator));
            return py::make_tuple(H.values, H.summands);
        },
        py::arg("X"), py::arg("y"), py::arg("estimator") = "unbiased", py::arg("categorical") = false,
        "Returns (H, summands); summands is empty for the biased and unbiased estimators.");
    m.def(
        "estimate_M",
        [](const Eigen::MatrixXd& X, const std::string& estimator, bool project) {
            auto M = estimate_M(make_dataset(X, std::nullopt, false), EstimatorSpec::parse(estimator));
            return project ? project_pd(M).values : M.values;
        },
        py::arg("X"), py::arg("estimator") = "unbiased", py::arg("project") = true);
    m.def(
        "estimate_cov",
        [](const Eigen::MatrixXd& summands, const std::string& method) {
            return estimate_cov(summands, parse_cov_method(method)).values;
        },
        py::arg("summands"), py::arg("method") = "oas");

    m.def(
        "solve",
        [](const Eigen::VectorXd& H, const Eigen::MatrixXd& M, double lam, std::optional<Eigen::VectorXd> w) {
            const LassoProblem problem{H, M, lam, w ? *w : Eigen::VectorXd::Ones(H.size())};
            const auto sol = solve(problem);
            return py::make_tuple(sol.beta, sol.kkt_residual);
        },
        py::arg("H"), py::arg("M"), py::arg("lam"), py::arg("w") = py::none(),
        "Non-negative weighted HSIC-Lasso. Returns (beta, kkt_residual).");
    m.def(
        "lambda_max",
        [](const Eigen::VectorXd& H, std::optional<Eigen::VectorXd> w) {
            return lambda_max(H, w ? *w : Eigen::VectorXd::Ones(H.size()));
        },
        py::arg("H"), py::arg("w") = py::none());

    m.def(
        "event_full_model",
        [](const Eigen::MatrixXd& M, const std::vector<Index>& S, double lam, const Eigen::VectorXd& w) {
            const auto ev = event_full_model(M, S, lam, w);
            return py::make_tuple(ev.constraint_matrix(), ev.b);
        },
        py::arg("M"), py::arg("S"), py::arg("lam"), py::arg("w"), "Returns (A, b) in the original feature order.");
    m.def(
        "event_single_feature",
        [](const Eigen::MatrixXd& M, const Eigen::VectorXd& beta, Index j, double lam, const Eigen::VectorXd& w) {
            const auto ev = event_single_feature(M, beta, j, lam, w);
            return py::make_tuple(ev.constraint_matrix(), ev.b);
        },
        py::arg("M"), py::arg("beta"), py::arg("j"), py::arg("lam"), py::arg("w"));
    m.def(
        "truncation_points",
        [](const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& eta, const Eigen::MatrixXd& Sigma,
           const Eigen::VectorXd& H) { return truncation_dict(truncation_points(event_from(A, b), eta, Sigma, H)); },
        py::arg("A"), py::arg("b"), py::arg("eta"), py::arg("Sigma"), py::arg("H"));
    m.def(
        "trunc_gauss_cdf",
        [](double x, double mean, double variance, double lower, double upper) {
            return trunc_gauss_cdf(x, {mean, variance, lower, upper});
        },
        py::arg("x"), py::arg("mean"), py::arg("variance"), py::arg("lower"), py::arg("upper"));
    m.def(
        "p_value",
        [](double observed, double variance, double lower, double upper, const std::string& side) {
            return p_value({0.0, variance, lower, upper}, observed, parse_side(side));
        },
        py::arg("observed"), py::arg("variance"), py::arg("lower"), py::arg("upper"), py::arg("side") = "two");
    m.def(
        "confidence_interval",
        [](double observed, double variance, double lower, double upper, double alpha, const std::string& side) {
            TruncationResult t;
            t.observed = observed;
            t.variance = variance;
            t.lower = lower;
            t.upper = upper;
            const auto ci = confidence_interval(t, alpha, parse_side(side));
            return py::make_tuple(ci.lo, ci.hi);
        },
        py::arg("observed"), py::arg("variance"), py::arg("lower"), py::arg("upper"), py::arg("alpha") = 0.05,
        py::arg("side") = "two");

    m.def(
        "run_psi_json",
        [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, bool categorical, double split_ratio, Index screen_count,
           double alpha, const std::string& target, const std::string& side, const std::string& h_estimator,
           const std::string& m_estimator, const std::string& cov, const std::string& lambda_selection,
           std::optional<double> adaptive_gamma, bool hsic_full_event, std::uint64_t seed) {
            PipelineConfig c;
            c.split_ratio = split_ratio;
            c.screen_count = screen_count;
            c.alpha = alpha;
            c.target = parse_target(target);
            c.side = parse_side(side);
            c.h_estimator = EstimatorSpec::parse(h_estimator);
            c.m_estimator = EstimatorSpec::parse(m_estimator);
            c.cov_method = parse_cov_method(cov);
            c.lambda = LambdaSelection::parse(lambda_selection);
            c.adaptive_gamma = adaptive_gamma;
            c.hsic_full_event = hsic_full_event;
            c.seed = seed;
            std::string out;
            {
                py::gil_scoped_release release;
                out = emit_json(run_psi(Dataset::make(X, y, categorical), c));
            }
            return out;
        },
        py::arg("X"), py::arg("y"), py::arg("categorical") = false, py::arg("split_ratio") = 0.25,
        py::arg("screen_count") = 50, py::arg("alpha") = 0.05, py::arg("target") = "hsic", py::arg("side") = "two",
        py::arg("h_estimator") = "block:10", py::arg("m_estimator") = "block:10", py::arg("cov") = "oas",
        py::arg("lambda_selection") = "cv:10", py::arg("adaptive_gamma") = py::none(),
        py::arg("hsic_full_event") = false, py::arg("seed") = 0);

    m.def(
        "simulate",
        [](const std::string& model, Index n, double theta, const std::string& cov, std::uint64_t seed) {
            const auto d = generate({parse_model(model), n, theta, parse_cov_form(cov), seed});
            return py::make_tuple(d.X, d.y);
        },
        py::arg("model"), py::arg("n") = 400, py::arg("theta") = 1.0, py::arg("cov") = "identity", py::arg("seed") = 0);
}
