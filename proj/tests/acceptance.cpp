// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance --cli <path to hsic-psi> [--only N]

#include "hsic_psi/error.hpp"
#include "hsic_psi/experiments.hpp"
#include "hsic_psi/hsic.hpp"
#include "hsic_psi/nnlasso.hpp"
#include "hsic_psi/selective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>
#include <string>

using namespace hsic_psi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXd random_pd(std::mt19937_64& rng, Index p) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd G(p + 3, p);
    for (auto& v : G.reshaped()) v = nd(rng);
    return G.transpose() * G / static_cast<double>(p) + 0.1 * Eigen::MatrixXd::Identity(p, p);
}

Eigen::VectorXd uniform_vec(std::mt19937_64& rng, Index p, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(p);
    for (auto& x : v) x = u(rng);
    return v;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

// Fixed three-constraint polyhedron shared by criteria 3 and 6.
struct Polyhedron {
    Eigen::Matrix3d Sigma;
    Eigen::Vector3d mu;
    Eigen::Vector3d eta;
    SelectionEvent event;

    Polyhedron() {
        Sigma << 1.0, 0.3, -0.2, 0.3, 1.0, 0.4, -0.2, 0.4, 1.0;
        mu << 0.2, -0.1, 0.4;
        eta << 0.6, -0.3, 1.0;
        Eigen::Matrix3d A;
        A << -1, 0, 0, 0.5, -1, 0.2, 1, 1, 1;
        event = SelectionEvent{A, Eigen::Vector3d(-0.3, 0.5, 2.5), {0, 1, 2}};
    }
};

double ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
        d = std::max(d, u[i] - static_cast<double>(i) / n);
    }
    return d;
}

Outcome type_one_error() {
    Outcome out{true, ""};
    for (auto model : {Model::M1, Model::M2}) {
        for (auto cov : {CovForm::Identity, CovForm::Decaying}) {
            for (const auto& est : {EstimatorSpec::block(10), EstimatorSpec::incomplete(1)}) {
                PipelineConfig config;
                config.side = TestSide::OneSided;
                config.h_estimator = est;
                config.seed = 2024;
                const auto r = type_one_error_experiment(config, {model, 400, 1.0, cov, 0}, 100);
                const auto& s = r.points[0].summary;
                const bool ok = s.tests > 0 && s.rate >= 0.0 && s.rate <= 0.12;
                out.pass = out.pass && ok;
                out.detail += "\n    " + to_string(model) + " " + to_string(cov) + " " + est.to_string() + ": " +
                              std::to_string(s.rejections) + "/" + std::to_string(s.tests) + " = " + fmt(s.rate) +
                              (ok ? "" : "  <-- outside [0, 0.12]");
            }
        }
    }
    return out;
}

Outcome power_curve() {
    PipelineConfig config;
    config.side = TestSide::OneSided;
    config.seed = 2024;
    const std::vector<double> thetas{0.0, 1.0, 2.33};
    const auto r = power_experiment(config, {Model::M1Prime, 800, 1.0, CovForm::Identity, 0}, thetas, 50);
    std::vector<double> rates;
    Outcome out;
    for (const auto& p : r.points) {
        rates.push_back(p.summary.rate);
        out.detail += "theta=" + fmt(p.theta) + ": " + std::to_string(p.summary.rejections) + "/" +
                      std::to_string(p.summary.tests) + " = " + fmt(p.summary.rate) + "; ";
    }
    out.pass = std::is_sorted(rates.begin(), rates.end()) && rates.back() >= 0.5;
    return out;
}

Outcome pivot_uniformity() {
    const Polyhedron poly;
    const Eigen::LLT<Eigen::Matrix3d> chol(poly.Sigma);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    std::vector<double> pivots;
    while (pivots.size() < 5000) {
        Eigen::Vector3d z;
        for (auto& v : z) v = nd(rng);
        const Eigen::Vector3d Y = poly.mu + chol.matrixL() * z;
        if (!poly.event.contains(Y, 0.0)) continue;
        const auto t = truncation_points(poly.event, poly.eta, poly.Sigma, Y);
        pivots.push_back(trunc_gauss_cdf(t.observed, {poly.eta.dot(poly.mu), t.variance, t.lower, t.upper}));
    }
    const double d = ks_uniform(pivots);
    const double critical = 1.63 / std::sqrt(5000.0);
    return {d < critical, "KS D = " + fmt(d) + " (critical " + fmt(critical) + ")"};
}

Outcome solver_correctness() {
    std::mt19937_64 rng(41);
    double worst_soft = 0.0, worst_gap = 0.0, worst_kkt = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Index p = 1 + i % 10;
        LassoProblem pr{uniform_vec(rng, p, -1.0, 2.0), Eigen::MatrixXd::Identity(p, p),
                        uniform_vec(rng, 1, 0.0, 1.0)[0], uniform_vec(rng, p, 0.0, 2.0)};
        const auto sol = solve(pr);
        const Eigen::VectorXd expected = (pr.H - pr.lambda * pr.w).cwiseMax(0.0);
        worst_soft = std::max(worst_soft, (sol.beta - expected).cwiseAbs().maxCoeff());
        worst_kkt = std::max(worst_kkt, kkt_check(sol, pr));
    }
    for (int i = 0; i < 100; ++i) {
        LassoProblem pr{uniform_vec(rng, 5, -0.5, 1.0), random_pd(rng, 5), 0.0, uniform_vec(rng, 5, 0.1, 2.0)};
        pr.lambda = uniform_vec(rng, 1, 0.05, 0.8)[0] * lambda_max(pr.H, pr.w);
        const auto sol = solve(pr);
        // Projected gradient oracle.
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pr.M);
        const double step = 1.0 / eig.eigenvalues().maxCoeff();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(5);
        for (int it = 0; it < 200000; ++it) {
            const Eigen::VectorXd next = (b - step * (pr.M * b - pr.H + pr.lambda * pr.w)).cwiseMax(0.0);
            const double change = (next - b).cwiseAbs().maxCoeff();
            b = next;
            if (change < 1e-15) break;
        }
        worst_gap = std::max(worst_gap, std::abs(pr.objective(sol.beta) - pr.objective(b)));
        worst_kkt = std::max(worst_kkt, kkt_check(sol, pr));
    }
    const bool pass = worst_soft <= 1e-8 && worst_gap <= 1e-6 && worst_kkt <= 1e-6;
    return {pass, "soft-threshold max error " + fmt(worst_soft) + ", objective gap " + fmt(worst_gap) +
                      ", KKT residual " + fmt(worst_kkt)};
}

Outcome ustat_oracles() {
    std::mt19937_64 rng(51);
    std::normal_distribution<double> nd;
    Eigen::VectorXd x(6), y(6);
    for (Index i = 0; i < 6; ++i) {
        x[i] = nd(rng);
        y[i] = x[i] * x[i] + 0.5 * nd(rng);
    }
    const auto kx = ColumnKernel::fit(x, KernelSpec::median_heuristic());
    const auto ky = ColumnKernel::fit(y, KernelSpec::median_heuristic());
    const double unbiased = hsic_unbiased(kx.gram(), ky.gram());
    std::vector<Quadruple> all;
    for (Index a = 0; a < 6; ++a)
        for (Index b = a + 1; b < 6; ++b)
            for (Index c = b + 1; c < 6; ++c)
                for (Index d = c + 1; d < 6; ++d) all.push_back({a, b, c, d});
    const double e1 = std::abs(hsic_incomplete(kx, ky, all) - unbiased);
    const double e2 = std::abs(hsic_block(kx, ky, 6) - unbiased);
    const Eigen::MatrixXd K4 = kx.gram().topLeftCorner(4, 4), L4 = ky.gram().topLeftCorner(4, 4);
    const double e3 = std::abs(ustat_kernel_h(K4, L4, {0, 1, 2, 3}) - hsic_unbiased(K4, L4));
    return {e1 <= 1e-12 && e2 <= 1e-12 && e3 <= 1e-12,
            "exhaustive incomplete " + fmt(e1) + ", block B=n " + fmt(e2) + ", h on 4 points " + fmt(e3)};
}

Outcome lemma_identity() {
    const Polyhedron poly;
    const Eigen::LLT<Eigen::Matrix3d> chol(poly.Sigma);
    std::mt19937_64 rng(61);
    std::normal_distribution<double> nd;
    long accepted = 0, draws = 0, disagreements = 0;
    const double slack = 1e-8;
    while (accepted < 10000) {
        Eigen::Vector3d z;
        for (auto& v : z) v = nd(rng);
        const Eigen::Vector3d Y = poly.mu + chol.matrixL() * z;
        ++draws;
        const Eigen::Vector3d AY = poly.event.constraint_matrix() * Y;
        const bool in_event = ((AY - poly.event.b).array() <= 0.0).all();
        const bool near_boundary = ((AY - poly.event.b).cwiseAbs().array() <= slack).any();
        accepted += in_event;
        bool in_interval = false;
        double lo = 0.0, hi = 0.0;
        try {
            const auto t = truncation_points(poly.event, poly.eta, poly.Sigma, Y, kInf);
            lo = t.lower;
            hi = t.upper;
            const double x = poly.eta.dot(Y);
            in_interval = lo <= x && x <= hi;
            if (!near_boundary && (std::abs(x - lo) <= slack || std::abs(x - hi) <= slack)) continue;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyInterval) throw;
        }
        if (in_event != in_interval && !near_boundary) ++disagreements;
    }
    return {disagreements == 0, std::to_string(disagreements) + " disagreements over " + std::to_string(draws) +
                                    " draws (" + std::to_string(accepted) + " accepted)"};
}

Outcome cdf_robustness() {
    bool finite = true, monotone = true;
    for (double a = -41.0; a <= 40.0; a += 0.5) {
        for (double width : {1e-3, 0.1, 1.0, kInf}) {
            const TruncatedGaussian tg{0.0, 1.0, a, a + width};
            double prev = 0.0;
            const double span = std::isinf(width) ? 5.0 : width;
            for (int k = 0; k <= 200; ++k) {
                const double x = a + span * k / 200.0;
                const double f = trunc_gauss_cdf(x, tg);
                finite = finite && std::isfinite(f) && f >= 0.0 && f <= 1.0;
                monotone = monotone && f >= prev;
                prev = f;
            }
        }
    }
    double worst = 0.0;
    for (double za = -12.0; za <= 12.0; za += 0.25) {
        for (double width : {0.05, 0.5, 2.0, 5.0}) {
            const double zb = za + width;
            if (!(za >= 3.0 || zb <= -3.0)) continue;
            for (double frac : {0.01, 0.25, 0.5, 0.75, 0.99}) {
                const double zx = za + frac * width;
                worst = std::max(worst, std::abs(detail::trunc_cdf_direct(zx, za, zb) - detail::trunc_cdf_log(zx, za, zb)));
            }
        }
    }
    return {finite && monotone && worst <= 1e-12, std::string(finite ? "finite" : "NON-FINITE") + ", " +
                                                      (monotone ? "monotone" : "NOT MONOTONE") +
                                                      ", branch disagreement " + fmt(worst)};
}

Outcome ci_duality() {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const double alpha = 0.05;
    int exceptions = 0;
    for (int i = 0; i < 200; ++i) {
        TruncationResult t;
        t.variance = std::exp(u(rng));
        const double sd = std::sqrt(t.variance);
        t.lower = sd * u(rng);
        t.upper = (i % 3 == 0) ? kInf : t.lower + sd * (0.2 + std::abs(u(rng)));
        t.observed = t.lower + (std::isinf(t.upper) ? sd * std::abs(u(rng)) : (t.upper - t.lower) * (0.5 + u(rng) / 6.5));
        const double p = p_value({0.0, t.variance, t.lower, t.upper}, t.observed, TestSide::TwoSided);
        const auto ci = confidence_interval(t, alpha, TestSide::TwoSided);
        const bool excludes = ci.lo > 0.0 || ci.hi < 0.0;
        if (excludes != (p < alpha)) ++exceptions;
    }
    return {exceptions == 0, std::to_string(exceptions) + " exceptions over 200 instances"};
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome determinism(const std::string& cli) {
    if (cli.empty()) return {false, "no --cli path given"};
    const auto dir = std::filesystem::temp_directory_path() / ("hsic_psi_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const std::vector<std::pair<std::string, std::string>> runs{
        {"type1", "type1 --model M2 --cov decaying --n 200 --reps 4 --seed 99"},
        {"power", "power --model M1p --n 200 --thetas 0,2.33 --reps 3 --seed 99 --h-estimator incomplete:1"},
    };
    bool pass = true;
    std::string detail;
    for (const auto& [name, args] : runs) {
        std::string outputs[2];
        for (int k = 0; k < 2; ++k) {
            const auto file = dir / (name + std::to_string(k) + ".json");
            const std::string cmd = "\"" + cli + "\" " + args + " --output \"" + file.string() + "\"";
            if (std::system(cmd.c_str()) != 0) {
                pass = false;
                detail += name + ": command failed; ";
            }
            outputs[k] = read_file(file);
        }
        const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
        pass = pass && same;
        detail += name + (same ? " identical (" + std::to_string(outputs[0].size()) + " bytes); " : " DIFFER; ");
    }
    std::filesystem::remove_all(dir);
    return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc) cli = argv[++i];
        if (a == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"type-I error of the HSIC target on null features in [0, 0.12]", type_one_error},
        {"power for X1 nondecreasing in theta, >= 0.5 at theta = 2.33", power_curve},
        {"pivot uniform on the selection event (KS < 1.63/sqrt(5000))", pivot_uniformity},
        {"solver: soft-threshold <= 1e-8, oracle gap <= 1e-6, KKT <= 1e-6", solver_correctness},
        {"U-statistic oracles agree within 1e-12", ustat_oracles},
        {"polyhedron and truncation interval agree on 10000 accepted draws", lemma_identity},
        {"truncated CDF finite and monotone to 40 sd, branches agree within 1e-12", cdf_robustness},
        {"two-sided CI excludes 0 iff p < alpha on 200 instances", ci_duality},
        {"type1 and power reports byte-identical across runs", [&] { return determinism(cli); }},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int number = static_cast<int>(k) + 1;
        if (only && only != number) continue;
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << ": " << criteria[k].first << " -- "
                  << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
