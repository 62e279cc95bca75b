#include "hsic_psi/selective.hpp"

#include "hsic_psi/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace hsic_psi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd inverse_pd(const Eigen::MatrixXd& M) {
    const Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPD, "M_SS is not positive definite");
    return llt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
}

std::vector<Index> complement(std::span<const Index> S, Index p) {
    std::vector<bool> in(static_cast<std::size_t>(p), false);
    for (Index s : S) {
        if (s < 0 || s >= p) throw Error(ErrorCode::IndexOutOfRange, "selected index out of range");
        if (in[static_cast<std::size_t>(s)]) throw Error(ErrorCode::DuplicateIndex, "selected set has duplicates");
        in[static_cast<std::size_t>(s)] = true;
    }
    std::vector<Index> out;
    for (Index j = 0; j < p; ++j) {
        if (!in[static_cast<std::size_t>(j)]) out.push_back(j);
    }
    return out;
}

// Upper-tail probability Q(z) = 1 - Φ(z).
double upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }
double lower_tail(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// log(e^a - e^b) for a >= b.
double log_diff_exp(double a, double b) {
    if (b == -kInf) return a;
    return a + std::log1p(-std::exp(b - a));
}

double boundary_value(double zx, double za, double zb) {
    // All mass sits at the endpoint nearest the mean.
    if (za >= 0.0) return zx > za ? 1.0 : 0.0;
    return zx < zb ? 0.0 : 1.0;
}

}  // namespace

namespace detail {

double log_ndtr(double z) {
    if (z > 6.0) return std::log1p(-upper_tail(z));
    if (z >= -20.0) return std::log(lower_tail(z));
    if (z == -kInf) return -kInf;
    // Asymptotic expansion of the Mills ratio; at |z| >= 20 the truncated
    // series is accurate to double precision.
    const double z2 = z * z;
    double term = 1.0;
    double series = 1.0;
    for (int k = 1; k <= 12; ++k) {
        term *= -static_cast<double>(2 * k - 1) / z2;
        series += term;
    }
    return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double trunc_cdf_direct(double zx, double za, double zb) {
    double num = 0.0;
    double den = 0.0;
    if (za >= 0.0) {
        num = upper_tail(za) - upper_tail(zx);
        den = upper_tail(za) - upper_tail(zb);
    } else {
        num = lower_tail(zx) - lower_tail(za);
        den = lower_tail(zb) - lower_tail(za);
    }
    if (!(den > 0.0)) return boundary_value(zx, za, zb);
    return std::clamp(num / den, 0.0, 1.0);
}

double trunc_cdf_log(double zx, double za, double zb, bool* degenerate) {
    double log_num = 0.0;
    double log_den = 0.0;
    if (za >= 0.0) {
        // log Q(z) = log Φ(-z)
        const double la = log_ndtr(-za);
        log_num = log_diff_exp(la, log_ndtr(-zx));
        log_den = log_diff_exp(la, log_ndtr(-zb));
    } else {
        const double la = log_ndtr(za);
        log_num = log_diff_exp(log_ndtr(zx), la);
        log_den = log_diff_exp(log_ndtr(zb), la);
    }
    if (!(log_den > -kInf) || std::isnan(log_den)) {
        if (degenerate) *degenerate = true;
        return boundary_value(zx, za, zb);
    }
    if (degenerate) *degenerate = false;
    if (log_num == -kInf) return 0.0;
    return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

}  // namespace detail

Eigen::MatrixXd SelectionEvent::constraint_matrix() const {
    Eigen::MatrixXd out(A.rows(), A.cols());
    for (std::size_t k = 0; k < ordering.size(); ++k) out.col(ordering[k]) = A.col(static_cast<Index>(k));
    return out;
}

bool SelectionEvent::contains(const Eigen::Ref<const Eigen::VectorXd>& H, double slack) const {
    return ((constraint_matrix() * H - b).array() <= slack).all();
}

SelectionEvent event_full_model(const Eigen::Ref<const Eigen::MatrixXd>& M, std::span<const Index> S, double lambda,
                                const Eigen::Ref<const Eigen::VectorXd>& w) {
    const Index p = M.rows();
    if (M.cols() != p || w.size() != p) throw Error(ErrorCode::SizeMismatch, "M must be p x p and w of length p");
    if (lambda == 0.0) throw Error(ErrorCode::LambdaZero, "selection event is undefined at lambda = 0");
    if (S.empty()) throw Error(ErrorCode::InvalidArgument, "selected set is empty");
    const auto Sc = complement(S, p);
    const std::vector<Index> Sv(S.begin(), S.end());
    const auto k = static_cast<Index>(Sv.size());

    const Eigen::MatrixXd Minv = inverse_pd(M(Sv, Sv));
    const Eigen::MatrixXd cross = M(Sc, Sv) * Minv;  // M_{SᶜS} M_SS⁻¹

    SelectionEvent ev;
    ev.ordering = Sv;
    ev.ordering.insert(ev.ordering.end(), Sc.begin(), Sc.end());
    ev.A = Eigen::MatrixXd::Zero(p, p);
    ev.b.resize(p);
    // β_S = M_SS⁻¹(H_S - λ w_S) >= 0
    ev.A.topLeftCorner(k, k) = -Minv / lambda;
    ev.b.head(k) = -Minv * w(Sv);
    // u_Sᶜ = -H_Sᶜ + M_{SᶜS} β_S + λ w_Sᶜ >= 0
    const Index r = p - k;
    if (r > 0) {
        ev.A.bottomLeftCorner(r, k) = -cross / lambda;
        ev.A.bottomRightCorner(r, r) = Eigen::MatrixXd::Identity(r, r) / lambda;
        ev.b.tail(r) = w(Sc) - cross * w(Sv);
    }
    return ev;
}

SelectionEvent event_single_feature(const Eigen::Ref<const Eigen::MatrixXd>& M, const Eigen::Ref<const Eigen::VectorXd>& beta,
                                    Index j, double lambda, const Eigen::Ref<const Eigen::VectorXd>& w) {
    const Index p = M.rows();
    if (M.cols() != p || beta.size() != p || w.size() != p) throw Error(ErrorCode::SizeMismatch, "dimension mismatch");
    if (j < 0 || j >= p) throw Error(ErrorCode::IndexOutOfRange, "feature index out of range");
    if (!(beta[j] > 0.0)) throw Error(ErrorCode::NotSelected, "feature " + std::to_string(j) + " is not selected");
    Eigen::VectorXd beta_minus = beta;
    beta_minus[j] = 0.0;
    SelectionEvent ev;
    ev.A = Eigen::MatrixXd::Zero(1, p);
    ev.A(0, j) = -1.0;
    ev.b = Eigen::VectorXd::Constant(1, -M.row(j).dot(beta_minus) - lambda * w[j]);
    ev.ordering.resize(static_cast<std::size_t>(p));
    std::iota(ev.ordering.begin(), ev.ordering.end(), Index{0});
    return ev;
}

Eigen::VectorXd eta_hsic(Index j, Index p) {
    if (j < 0 || j >= p) throw Error(ErrorCode::IndexOutOfRange, "feature index out of range");
    return Eigen::VectorXd::Unit(p, j);
}

Eigen::VectorXd eta_partial(const Eigen::Ref<const Eigen::MatrixXd>& M, std::span<const Index> S, Index j) {
    const Index p = M.rows();
    const auto pos = std::find(S.begin(), S.end(), j);
    if (j < 0 || j >= p || pos == S.end()) throw Error(ErrorCode::IndexOutOfRange, "feature is not in the selected set");
    const std::vector<Index> Sv(S.begin(), S.end());
    const Eigen::MatrixXd Minv = inverse_pd(M(Sv, Sv));
    const Index a = pos - S.begin();
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(p);
    for (std::size_t b = 0; b < Sv.size(); ++b) eta[Sv[b]] = Minv(a, static_cast<Index>(b));
    return eta;
}

TruncationResult truncation_points(const SelectionEvent& event, const Eigen::Ref<const Eigen::VectorXd>& eta,
                                   const Eigen::Ref<const Eigen::MatrixXd>& Sigma, const Eigen::Ref<const Eigen::VectorXd>& H,
                                   double slack) {
    const Index p = H.size();
    if (eta.size() != p || Sigma.rows() != p || Sigma.cols() != p || event.A.cols() != p ||
        event.A.rows() != event.b.size()) {
        throw Error(ErrorCode::SizeMismatch, "dimension mismatch in truncation_points");
    }
    TruncationResult out;
    out.eta = eta;
    const Eigen::VectorXd sigma_eta = Sigma * eta;
    out.variance = eta.dot(sigma_eta);
    if (!(out.variance > 0.0)) throw Error(ErrorCode::DegenerateDirection, "eta' Sigma eta is not positive");
    out.C = sigma_eta / out.variance;
    out.observed = eta.dot(H);
    out.Z = H - out.C * out.observed;

    const Eigen::MatrixXd A = event.constraint_matrix();
    const Eigen::VectorXd AC = A * out.C;
    const Eigen::VectorXd AZ = A * out.Z;
    const double c_norm = out.C.cwiseAbs().maxCoeff();
    out.lower = -kInf;
    out.upper = kInf;
    for (Index r = 0; r < A.rows(); ++r) {
        const double tiny = 1e-14 * A.row(r).cwiseAbs().maxCoeff() * c_norm;
        const double ratio = (event.b[r] - AZ[r]) / AC[r];
        if (AC[r] < -tiny) {
            out.lower = std::max(out.lower, ratio);
        } else if (AC[r] > tiny) {
            out.upper = std::min(out.upper, ratio);
        }
    }
    if (!(out.lower < out.upper)) {
        throw Error(ErrorCode::EmptyInterval, "truncation interval is empty");
    }
    if (out.observed < out.lower - slack || out.observed > out.upper + slack) {
        throw Error(ErrorCode::OutsideInterval, "observed target lies outside the truncation interval");
    }
    out.observed = std::clamp(out.observed, out.lower, out.upper);
    return out;
}

void TruncatedGaussian::validate() const {
    if (!(variance > 0.0) || !std::isfinite(variance)) throw Error(ErrorCode::InvalidArgument, "variance must be positive");
    if (!(lower < upper)) throw Error(ErrorCode::EmptyInterval, "truncation requires lower < upper");
    if (!std::isfinite(mean)) throw Error(ErrorCode::NonFinite, "mean must be finite");
}

double trunc_gauss_cdf(double x, const TruncatedGaussian& tg, bool* degenerate) {
    tg.validate();
    if (degenerate) *degenerate = false;
    x = std::clamp(x, tg.lower, tg.upper);
    if (x <= tg.lower) return 0.0;
    if (x >= tg.upper) return 1.0;
    const double sd = std::sqrt(tg.variance);
    const double za = (tg.lower - tg.mean) / sd;
    const double zb = (tg.upper - tg.mean) / sd;
    const double zx = (x - tg.mean) / sd;
    const bool far_tail = za >= detail::kTailSwitch || zb <= -detail::kTailSwitch;
    if (far_tail) return detail::trunc_cdf_log(zx, za, zb, degenerate);
    return detail::trunc_cdf_direct(zx, za, zb);
}

double p_value(const TruncatedGaussian& tg, double observed, TestSide side) {
    const double F = trunc_gauss_cdf(observed, tg);
    if (side == TestSide::OneSided) return std::clamp(1.0 - F, 0.0, 1.0);
    return std::clamp(2.0 * std::min(F, 1.0 - F), 0.0, 1.0);
}

namespace {

// Solves 1 - F_δ(observed) = target for δ; the left side increases in δ.
double invert_pivot(const TruncationResult& t, double target, double lo, double hi, bool& bracketed) {
    auto survival = [&](double delta) {
        return 1.0 - trunc_gauss_cdf(t.observed, {delta, t.variance, t.lower, t.upper});
    };
    if (survival(lo) > target) {
        bracketed = false;
        return -kInf;
    }
    if (survival(hi) < target) {
        bracketed = false;
        return kInf;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (survival(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ConfidenceInterval confidence_interval(const TruncationResult& trunc, double alpha, TestSide side) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    if (!(trunc.variance > 0.0)) throw Error(ErrorCode::DegenerateDirection, "variance must be positive");
    const double sd = std::sqrt(trunc.variance);
    // The bracket always covers 0 so the interval and the p-value agree on
    // whether 0 is excluded.
    const double lo = std::min(trunc.observed, 0.0) - 20.0 * sd;
    const double hi = std::max(trunc.observed, 0.0) + 20.0 * sd;
    ConfidenceInterval ci;
    bool ok = true;
    if (side == TestSide::OneSided) {
        ci.lo = invert_pivot(trunc, alpha, lo, hi, ok);
        ci.hi = kInf;
    } else {
        ci.lo = invert_pivot(trunc, alpha / 2.0, lo, hi, ok);
        bool ok_hi = true;
        ci.hi = invert_pivot(trunc, 1.0 - alpha / 2.0, lo, hi, ok_hi);
        ok = ok && ok_hi;
    }
    ci.bracketed = ok;
    return ci;
}

}  // namespace hsic_psi
