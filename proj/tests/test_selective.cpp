#include "doctest.h"

#include "hsic_psi/error.hpp"
#include "hsic_psi/nnlasso.hpp"
#include "hsic_psi/selective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace hsic_psi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool throws_code(ErrorCode code, auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

Eigen::MatrixXd random_pd(std::mt19937_64& rng, Index p) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd G(p + 3, p);
    for (auto& v : G.reshaped()) v = nd(rng);
    return G.transpose() * G / static_cast<double>(p) + 0.1 * Eigen::MatrixXd::Identity(p, p);
}

Eigen::VectorXd random_vec(std::mt19937_64& rng, Index p, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(p);
    for (auto& x : v) x = u(rng);
    return v;
}

double ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - u[i]));
        d = std::max(d, std::abs(u[i] - static_cast<double>(i) / n));
    }
    return d;
}

// Truncated normal CDF in extended precision, used as an oracle in the tails.
double cdf_long(double x, double mean, double sd, double a, double b) {
    auto Q = [](long double z) { return 0.5L * std::erfc(z / std::numbers::sqrt2_v<long double>); };
    const long double za = (a - mean) / sd, zb = (b - mean) / sd, zx = (x - mean) / sd;
    return static_cast<double>((Q(za) - Q(zx)) / (Q(za) - Q(zb)));
}

// Composite Simpson rule for the half-normal density on [0, x].
double simpson_half_normal(double x) {
    const int n = 20000;
    const double h = x / n;
    auto f = [](double t) { return 2.0 * std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
    double s = f(0.0) + f(x);
    for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("full-model event on a small example") {
    const std::vector<Index> S{0};
    const auto ev = event_full_model(Eigen::Matrix2d::Identity(), S, 1.0, Eigen::Vector2d(1.0, 1.0));
    Eigen::Matrix2d A;
    A << -1, 0, 0, 1;
    CHECK((ev.A - A).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((ev.b - Eigen::Vector2d(-1.0, 1.0)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(ev.contains(Eigen::Vector2d(2.0, 0.5)));
    CHECK(!ev.contains(Eigen::Vector2d(0.5, 0.5)));
    CHECK(!ev.contains(Eigen::Vector2d(2.0, 1.5)));

    // Ordering puts S first; constraint_matrix maps back.
    const std::vector<Index> S2{1};
    const auto ev2 = event_full_model(Eigen::Matrix2d::Identity(), S2, 1.0, Eigen::Vector2d(1.0, 1.0));
    CHECK(ev2.ordering == std::vector<Index>{1, 0});
    CHECK(ev2.contains(Eigen::Vector2d(0.5, 2.0)));

    CHECK(throws_code(ErrorCode::LambdaZero, [&] { event_full_model(Eigen::Matrix2d::Identity(), S, 0.0, Eigen::Vector2d(1, 1)); }));
    const std::vector<Index> dup{0, 0};
    CHECK(throws_code(ErrorCode::DuplicateIndex, [&] { event_full_model(Eigen::Matrix2d::Identity(), dup, 1.0, Eigen::Vector2d(1, 1)); }));
    const std::vector<Index> bad{2};
    CHECK(throws_code(ErrorCode::IndexOutOfRange, [&] { event_full_model(Eigen::Matrix2d::Identity(), bad, 1.0, Eigen::Vector2d(1, 1)); }));
}

TEST_CASE("full-model event agrees with the solver") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Index p = 3 + trial % 6;
        const Eigen::MatrixXd M = random_pd(rng, p);
        const Eigen::VectorXd w = random_vec(rng, p, 0.5, 1.5);
        const Eigen::VectorXd H = random_vec(rng, p, -0.3, 1.0);
        const double lambda = 0.3 * lambda_max(H, w);
        if (!(lambda > 0.0)) continue;
        const auto sol = solve(LassoProblem{H, M, lambda, w});
        if (sol.active.empty()) continue;
        const auto ev = event_full_model(M, sol.active, lambda, w);
        CHECK(((ev.constraint_matrix() * H - ev.b).array() <= 1e-8).all());

        // Perturbed responses: membership in the polyhedron matches re-solving,
        // away from the boundary.
        for (int k = 0; k < 20; ++k) {
            Eigen::VectorXd H2 = H;
            for (auto& v : H2) v += 0.05 * nd(rng);
            const Eigen::VectorXd slack = ev.constraint_matrix() * H2 - ev.b;
            if (slack.cwiseAbs().minCoeff() < 1e-6) continue;
            const auto sol2 = solve(LassoProblem{H2, M, lambda, w});
            CHECK(ev.contains(H2, 0.0) == (sol2.active == sol.active));
            ++checked;
        }
    }
    CHECK(checked > 200);
}

TEST_CASE("diagonal M gives a threshold at lambda w") {
    const Eigen::Vector3d d(2.0, 0.5, 1.0);
    const Eigen::MatrixXd M = d.asDiagonal();
    const Eigen::Vector3d w(1.0, 2.0, 0.5);
    const Eigen::Vector3d H(1.0, 0.3, 0.8);
    const double lambda = 0.2;
    const auto sol = solve(LassoProblem{H, M, lambda, w});
    REQUIRE(sol.active == std::vector<Index>{0, 2});
    const auto ev = event_full_model(M, sol.active, lambda, w);
    const Eigen::MatrixXd Sigma = Eigen::Vector3d(0.01, 0.02, 0.03).asDiagonal();
    for (Index j : sol.active) {
        const auto t = truncation_points(ev, eta_hsic(j, 3), Sigma, H);
        CHECK(t.lower == doctest::Approx(lambda * w[j]).epsilon(1e-12));
        CHECK(t.upper == kInf);
    }
}

TEST_CASE("single-feature event") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Index p = 5;
        const Eigen::MatrixXd M = random_pd(rng, p);
        const Eigen::VectorXd w = random_vec(rng, p, 0.5, 1.5);
        const Eigen::VectorXd H = random_vec(rng, p, 0.1, 1.0);
        const double lambda = 0.2 * lambda_max(H, w);
        const auto sol = solve(LassoProblem{H, M, lambda, w});
        const Eigen::MatrixXd G = random_pd(rng, p) * 0.01;
        for (Index j : sol.active) {
            const auto ev = event_single_feature(M, sol.beta, j, lambda, w);
            CHECK(ev.contains(H));
            const Eigen::VectorXd eta = eta_hsic(j, p);
            const auto t = truncation_points(ev, eta, G, H);
            Eigen::VectorXd beta_minus = sol.beta;
            beta_minus[j] = 0.0;
            const double closed = (M.row(j).dot(beta_minus) + lambda * w[j] - t.Z[j]) / t.C[j];
            CHECK(t.lower == doctest::Approx(closed).epsilon(1e-12));
            CHECK(t.upper == kInf);
        }
        for (Index j = 0; j < p; ++j) {
            if (sol.beta[j] > 0.0) continue;
            CHECK(throws_code(ErrorCode::NotSelected, [&] { event_single_feature(M, sol.beta, j, lambda, w); }));
        }
    }
}

TEST_CASE("test directions") {
    CHECK(eta_hsic(2, 4) == Eigen::Vector4d(0, 0, 1, 0));
    CHECK(throws_code(ErrorCode::IndexOutOfRange, [] { eta_hsic(4, 4); }));

    Eigen::Matrix3d M;
    M << 2, 0.5, 0.2, 0.5, 1, 0.1, 0.2, 0.1, 1.5;
    const std::vector<Index> S{2, 0};
    const auto eta = eta_partial(M, S, 0);
    // Row of inv(M_SS) for feature 0, where M_SS is ordered (2, 0).
    Eigen::Matrix2d Mss;
    Mss << 1.5, 0.2, 0.2, 2.0;
    const Eigen::Matrix2d inv = Mss.inverse();
    CHECK(eta[0] == doctest::Approx(inv(1, 1)));
    CHECK(eta[2] == doctest::Approx(inv(1, 0)));
    CHECK(eta[1] == 0.0);
    // ηᵀ H equals the unpenalized coefficient of feature 0 on S.
    const Eigen::Vector3d H(0.7, 0.3, 0.4);
    const Eigen::Vector2d coef = Mss.ldlt().solve(Eigen::Vector2d(H[2], H[0]));
    CHECK(eta.dot(H) == doctest::Approx(coef[1]));
    CHECK(throws_code(ErrorCode::IndexOutOfRange, [&] { eta_partial(M, S, 1); }));
}

TEST_CASE("truncation points on a half-line") {
    // {H_0 >= 1}: A = [-1, 0], b = -1, identity covariance.
    SelectionEvent ev{Eigen::RowVector2d(-1.0, 0.0), Eigen::VectorXd::Constant(1, -1.0), {0, 1}};
    const auto t = truncation_points(ev, Eigen::Vector2d(1.0, 0.0), Eigen::Matrix2d::Identity(), Eigen::Vector2d(1.5, 0.3));
    CHECK(t.lower == doctest::Approx(1.0));
    CHECK(t.upper == kInf);
    CHECK(t.observed == doctest::Approx(1.5));
    CHECK(t.variance == doctest::Approx(1.0));
    CHECK((t.Z - Eigen::Vector2d(0.0, 0.3)).cwiseAbs().maxCoeff() < 1e-15);

    // Correlated covariance: the bound moves with the nuisance direction.
    Eigen::Matrix2d Sigma;
    Sigma << 1.0, 0.5, 0.5, 1.0;
    SelectionEvent ev2{Eigen::RowVector2d(0.0, -1.0), Eigen::VectorXd::Constant(1, -1.0), {0, 1}};
    const Eigen::Vector2d H(0.4, 1.2);
    const auto t2 = truncation_points(ev2, Eigen::Vector2d(1.0, 0.0), Sigma, H);
    // H_1 = Z_1 + 0.5 x >= 1 with Z_1 = 1.2 - 0.5 * 0.4 = 1.0, so x >= 0.
    CHECK(t2.lower == doctest::Approx(0.0).scale(1.0));
    CHECK(t2.upper == kInf);

    CHECK(throws_code(ErrorCode::OutsideInterval,
                      [&] { truncation_points(ev, Eigen::Vector2d(1, 0), Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.5, 0)); }));
    CHECK(throws_code(ErrorCode::DegenerateDirection,
                      [&] { truncation_points(ev, Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity(), Eigen::Vector2d(1.5, 0)); }));
    SelectionEvent empty{Eigen::Matrix2d{{-1.0, 0.0}, {1.0, 0.0}}, Eigen::Vector2d(-2.0, 1.0), {0, 1}};
    CHECK(throws_code(ErrorCode::EmptyInterval,
                      [&] { truncation_points(empty, Eigen::Vector2d(1, 0), Eigen::Matrix2d::Identity(), Eigen::Vector2d(1.5, 0)); }));
}

TEST_CASE("conditional pivot is uniform on the selection event") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const Index p = 3;
    Eigen::Matrix3d Sigma;
    Sigma << 1.0, 0.3, -0.2, 0.3, 1.0, 0.4, -0.2, 0.4, 1.0;
    const Eigen::LLT<Eigen::Matrix3d> chol(Sigma);
    const Eigen::Vector3d mu(0.2, -0.1, 0.4);
    Eigen::Matrix<double, 4, 3> A;
    A << -1, 0, 0, 0.5, -1, 0.2, 0, 0.3, 1, 1, 1, 1;
    const Eigen::Vector4d b(-0.3, 0.5, 1.0, 2.5);
    SelectionEvent ev{A, b, {0, 1, 2}};
    const Eigen::Vector3d eta(0.6, -0.3, 1.0);

    std::vector<double> pivots;
    while (pivots.size() < 10000) {
        Eigen::Vector3d z;
        for (auto& v : z) v = nd(rng);
        const Eigen::Vector3d H = mu + chol.matrixL() * z;
        if (!ev.contains(H, 0.0)) continue;
        const auto t = truncation_points(ev, eta, Sigma, H);
        pivots.push_back(trunc_gauss_cdf(t.observed, {eta.dot(mu), t.variance, t.lower, t.upper}));
    }
    (void)p;
    const double d = ks_uniform(pivots);
    INFO("KS D = ", d);
    CHECK(d < 1.63 / std::sqrt(10000.0));
}

TEST_CASE("truncated Gaussian CDF") {
    const TruncatedGaussian half{0.0, 1.0, 0.0, kInf};
    const double median = 0.6744897501960817;
    CHECK(trunc_gauss_cdf(median, half) == doctest::Approx(0.5).epsilon(1e-14));
    for (double x : {0.1, 0.5, 1.0, 2.0, 3.5}) CHECK(std::abs(trunc_gauss_cdf(x, half) - simpson_half_normal(x)) < 1e-12);
    CHECK(trunc_gauss_cdf(-1.0, half) == 0.0);
    CHECK(trunc_gauss_cdf(0.0, half) == 0.0);
    CHECK(trunc_gauss_cdf(kInf, half) == 1.0);

    const TruncatedGaussian full{1.0, 4.0, -kInf, kInf};
    CHECK(trunc_gauss_cdf(1.0, full) == doctest::Approx(0.5));
    CHECK(trunc_gauss_cdf(1.0 + 2.0 * 1.959963984540054, full) == doctest::Approx(0.975).epsilon(1e-12));

    CHECK(throws_code(ErrorCode::EmptyInterval, [] { trunc_gauss_cdf(0.0, {0.0, 1.0, 1.0, 1.0}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument, [] { trunc_gauss_cdf(0.0, {0.0, 0.0, -1.0, 1.0}); }));

    // Monotone in x, and decreasing in the mean.
    const TruncatedGaussian box{0.3, 0.5, -1.0, 2.0};
    double prev = 0.0;
    for (double x = -1.0; x <= 2.0; x += 0.01) {
        const double f = trunc_gauss_cdf(x, box);
        CHECK(f >= prev);
        prev = f;
    }
    double last = 1.0;
    for (double m = -5.0; m <= 5.0; m += 0.1) {
        const double f = trunc_gauss_cdf(0.5, {m, 0.5, -1.0, 2.0});
        CHECK(f <= last + 1e-15);
        last = f;
    }
}

TEST_CASE("far-tail truncation stays finite and accurate") {
    for (double a : {6.5, 10.0, 20.0, 40.0}) {
        const TruncatedGaussian tg{0.0, 1.0, a, a + 1.0};
        for (double frac : {0.001, 0.01, 0.1, 0.5}) {
            const double x = a + frac;
            bool degenerate = true;
            const double f = trunc_gauss_cdf(x, tg, &degenerate);
            CHECK(!degenerate);
            CHECK(std::isfinite(f));
            CHECK(std::abs(f - cdf_long(x, 0.0, 1.0, a, a + 1.0)) <= 1e-10);
        }
        // Mirror image in the lower tail.
        const TruncatedGaussian low{0.0, 1.0, -a - 1.0, -a};
        CHECK(trunc_gauss_cdf(-a - 0.5, low) == doctest::Approx(1.0 - trunc_gauss_cdf(a + 0.5, tg)).epsilon(1e-10));
    }
    // Beyond extended precision too: still a valid probability.
    const TruncatedGaussian extreme{0.0, 1.0, 200.0, kInf};
    const double f = trunc_gauss_cdf(200.01, extreme);
    CHECK(f > 0.8);
    CHECK(f < 0.9);
    CHECK(detail::log_ndtr(-40.0) == doctest::Approx(static_cast<double>(std::log(0.5L * std::erfc(40.0L / std::numbers::sqrt2_v<long double>)))).epsilon(1e-12));
}

TEST_CASE("direct and log branches agree where both are valid") {
    double worst = 0.0;
    for (double za = -8.0; za <= 8.0; za += 0.5) {
        for (double width : {0.1, 0.5, 2.0, 5.0}) {
            const double zb = za + width;
            if (!(za >= 3.0 || zb <= -3.0)) continue;
            for (double frac : {0.05, 0.3, 0.7, 0.95}) {
                const double zx = za + frac * width;
                const double d = detail::trunc_cdf_direct(zx, za, zb);
                const double l = detail::trunc_cdf_log(zx, za, zb);
                worst = std::max(worst, std::abs(d - l));
            }
        }
    }
    INFO("worst disagreement ", worst);
    CHECK(worst <= 1e-12);
}

TEST_CASE("p-values are uniform under the null") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    const TruncatedGaussian tg{0.0, 2.0, 0.5, 3.0};
    std::vector<double> one, two;
    while (one.size() < 5000) {
        const double x = std::sqrt(tg.variance) * nd(rng);
        if (x < tg.lower || x > tg.upper) continue;
        one.push_back(p_value(tg, x, TestSide::OneSided));
        two.push_back(p_value(tg, x, TestSide::TwoSided));
    }
    const double thr = 1.63 / std::sqrt(5000.0);
    CHECK(ks_uniform(one) < thr);
    CHECK(ks_uniform(two) < thr);
}

TEST_CASE("confidence intervals") {
    TruncationResult classical;
    classical.variance = 4.0;
    classical.observed = 1.0;
    classical.lower = -kInf;
    classical.upper = kInf;
    const auto ci = confidence_interval(classical, 0.05, TestSide::TwoSided);
    CHECK(ci.bracketed);
    CHECK(ci.lo == doctest::Approx(1.0 - 2.0 * 1.959963984540054).epsilon(1e-9));
    CHECK(ci.hi == doctest::Approx(1.0 + 2.0 * 1.959963984540054).epsilon(1e-9));
    const auto one = confidence_interval(classical, 0.05, TestSide::OneSided);
    CHECK(one.lo == doctest::Approx(1.0 - 2.0 * 1.6448536269514722).epsilon(1e-9));
    CHECK(one.hi == kInf);

    TruncationResult t;
    t.variance = 1.0;
    t.observed = 1.3;
    t.lower = 1.0;
    t.upper = kInf;
    const auto med = confidence_interval(t, 0.5, TestSide::OneSided);
    CHECK(trunc_gauss_cdf(t.observed, {med.lo, 1.0, t.lower, t.upper}) == doctest::Approx(0.5).epsilon(1e-9));

    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { confidence_interval(t, 1.0, TestSide::TwoSided); }));
}

TEST_CASE("interval and p-value agree on excluding zero") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    int agree = 0;
    for (int i = 0; i < 200; ++i) {
        TruncationResult t;
        t.variance = std::exp(u(rng));
        const double sd = std::sqrt(t.variance);
        t.lower = sd * u(rng);
        t.upper = (i % 3 == 0) ? kInf : t.lower + sd * (0.2 + std::abs(u(rng)));
        t.observed = t.lower + (std::isinf(t.upper) ? sd * std::abs(u(rng)) : (t.upper - t.lower) * (0.5 + u(rng) / 6.5));
        for (auto side : {TestSide::OneSided, TestSide::TwoSided}) {
            const double p = p_value({0.0, t.variance, t.lower, t.upper}, t.observed, side);
            const auto ci = confidence_interval(t, 0.1, side);
            if (std::abs(p - 0.1) < 1e-6) continue;
            const bool covers = ci.lo <= 0.0 && 0.0 <= ci.hi;
            CHECK((p >= 0.1) == covers);
            agree += (p >= 0.1) == covers;
        }
    }
    CHECK(agree >= 390);
}

TEST_CASE("p-value at the truncation endpoints") {
    const TruncatedGaussian tg{0.0, 2.0, -0.5, 1.5};
    CHECK(p_value(tg, -0.5, TestSide::OneSided) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p_value(tg, 1.5, TestSide::OneSided) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(p_value(tg, -0.5, TestSide::TwoSided) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("polyhedron membership matches the truncation interval") {
    Eigen::Matrix3d Sigma;
    Sigma << 2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 1.5;
    Eigen::Matrix3d A;
    A << -1, 0.4, 0, 0.2, -1, 0, -0.3, 0.5, 1;
    const SelectionEvent event{A, Eigen::Vector3d(0.2, 0.1, 1.0), {0, 1, 2}};
    const Eigen::Vector3d eta(1.0, 0.5, -0.2);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    int checked = 0;
    for (int i = 0; i < 5000; ++i) {
        const Eigen::Vector3d Y(1.5 * nd(rng), 1.5 * nd(rng), 1.5 * nd(rng));
        const Eigen::Vector3d r = A * Y - event.b;
        if ((r.cwiseAbs().array() < 1e-8).any()) continue;
        const bool inside = (r.array() <= 0.0).all();
        bool in_interval = false;
        try {
            const auto t = truncation_points(event, eta, Sigma, Y, kInf);
            const double x = eta.dot(Y);
            in_interval = t.lower <= x && x <= t.upper;
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::EmptyInterval);
        }
        CHECK(inside == in_interval);
        ++checked;
    }
    CHECK(checked > 4900);
}

TEST_CASE("interval endpoints reproduce their target probabilities") {
    TruncationResult t;
    t.variance = 0.7;
    t.lower = -0.4;
    t.upper = 2.0;
    t.observed = 0.9;
    const double alpha = 0.1;
    const auto two = confidence_interval(t, alpha, TestSide::TwoSided);
    const auto cdf_at = [&](double mean) { return trunc_gauss_cdf(t.observed, {mean, t.variance, t.lower, t.upper}); };
    CHECK(std::abs(cdf_at(two.lo) - (1.0 - alpha / 2)) <= 1e-6);
    CHECK(std::abs(cdf_at(two.hi) - alpha / 2) <= 1e-6);
    const auto one = confidence_interval(t, alpha, TestSide::OneSided);
    CHECK(std::abs(cdf_at(one.lo) - (1.0 - alpha)) <= 1e-6);
    CHECK(std::isinf(one.hi));
}
