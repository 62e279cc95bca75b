#include "hsic_psi/synthetic.hpp"

#include "hsic_psi/error.hpp"
#include "hsic_psi/rng.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

namespace hsic_psi {

namespace {

constexpr long kMonteCarloDraws = 1'000'000;

bool has_theta(Model m) { return m == Model::M1Prime || m == Model::M3 || m == Model::M4; }

// Signal part of Y from the first ten covariates.
double signal(Model model, double theta, const double* x) {
    double rest = 0.0;
    for (int i = 1; i < 10; ++i) rest += x[i];
    switch (model) {
        case Model::M1: return x[0] + rest;
        case Model::M1Prime: return theta * x[0] + rest;
        case Model::M2: {
            double s = 0.0;
            for (int i = 0; i < 5; ++i) s += x[i] * x[i + 5];
            return s;
        }
        case Model::M3: return theta * x[0] + rest;
        case Model::M4: return theta * (x[0] - x[0] * x[0] * x[0]) + rest;
    }
    return 0.0;
}

double monte_carlo_variance(Model model, double theta, CovForm cov) {
    const Eigen::MatrixXd L = covariance_matrix(cov, kInfluentialFeatures).llt().matrixL();
    const std::uint64_t seed = derive_seed(derive_seed(derive_seed(0x5eedULL, static_cast<std::uint64_t>(model)),
                                                       std::bit_cast<std::uint64_t>(theta)),
                                           static_cast<std::uint64_t>(cov));
    Rng rng(seed);
    std::normal_distribution<double> nd;
    Eigen::Matrix<double, kInfluentialFeatures, 1> z, x;
    // Welford's update keeps the million-term sum stable.
    double mean = 0.0, m2 = 0.0;
    for (long k = 1; k <= kMonteCarloDraws; ++k) {
        for (auto& v : z) v = nd(rng);
        x.noalias() = L * z;
        const double s = signal(model, theta, x.data());
        const double d = s - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (s - mean);
    }
    return m2 / static_cast<double>(kMonteCarloDraws - 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n < 40) throw Error(ErrorCode::InvalidArgument, "synthetic data needs n >= 40");
    if (!std::isfinite(theta)) throw Error(ErrorCode::NonFinite, "theta must be finite");
}

std::string to_string(Model m) {
    switch (m) {
        case Model::M1: return "M1";
        case Model::M1Prime: return "M1'";
        case Model::M2: return "M2";
        case Model::M3: return "M3";
        case Model::M4: return "M4";
    }
    return "M1";
}

Model parse_model(const std::string& text) {
    const auto t = lower(text);
    if (t == "m1") return Model::M1;
    if (t == "m1'" || t == "m1p" || t == "m1prime") return Model::M1Prime;
    if (t == "m2") return Model::M2;
    if (t == "m3") return Model::M3;
    if (t == "m4") return Model::M4;
    throw Error(ErrorCode::InvalidArgument, "unknown model '" + text + "'");
}

std::string to_string(CovForm c) { return c == CovForm::Identity ? "identity" : "decaying"; }

CovForm parse_cov_form(const std::string& text) {
    const auto t = lower(text);
    if (t == "identity" || t == "id") return CovForm::Identity;
    if (t == "decaying") return CovForm::Decaying;
    throw Error(ErrorCode::InvalidArgument, "unknown covariance form '" + text + "'");
}

Eigen::MatrixXd covariance_matrix(CovForm cov, Index p) {
    if (cov == CovForm::Identity) return Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd out(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) out(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
    return out;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double signal_variance(Model model, double theta, CovForm cov) {
    if (!has_theta(model)) theta = 1.0;
    if (cov == CovForm::Identity) {
        switch (model) {
            case Model::M1: return 10.0;
            case Model::M1Prime: return theta * theta + 9.0;
            case Model::M2: return 5.0;
            case Model::M3: return theta * theta + 9.0;
            // E(X - X³)² = 1 - 2·3 + 15 = 10
            case Model::M4: return 10.0 * theta * theta + 9.0;
        }
    }
    static std::mutex mutex;
    static std::map<std::tuple<Model, double, CovForm>, double> cache;
    const std::lock_guard lock(mutex);
    const auto key = std::make_tuple(model, theta, cov);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
    const double v = monte_carlo_variance(model, theta, cov);
    cache.emplace(key, v);
    return v;
}

double noise_variance(const SyntheticSpec& spec) {
    if (spec.model == Model::M1 || spec.model == Model::M1Prime) return 0.0;
    return 0.2 * signal_variance(spec.model, spec.theta, spec.cov);
}

Dataset generate(const SyntheticSpec& spec) {
    spec.validate();
    const Index n = spec.n;
    const Index p = kSyntheticFeatures;
    Rng rng(derive_seed(spec.seed, "synthetic"));
    std::normal_distribution<double> nd;
    Eigen::MatrixXd Z(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) Z(i, j) = nd(rng);
    Eigen::MatrixXd X = Z;
    if (spec.cov != CovForm::Identity) {
        const Eigen::MatrixXd L = covariance_matrix(spec.cov, p).llt().matrixL();
        X = Z * L.transpose();
    }

    Eigen::VectorXd y(n);
    const bool binary = spec.model == Model::M1 || spec.model == Model::M1Prime;
    const double sigma = std::sqrt(noise_variance(spec));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::Matrix<double, kInfluentialFeatures, 1> row;
    for (Index i = 0; i < n; ++i) {
        row = X.row(i).head<kInfluentialFeatures>().transpose();
        const double s = signal(spec.model, spec.theta, row.data());
        if (binary) {
            y[i] = unif(rng) < stable_sigmoid(s) ? 1.0 : 0.0;
        } else {
            y[i] = s + sigma * nd(rng);
        }
    }
    Dataset d = Dataset::make(std::move(X), std::move(y), binary);
    if (binary) d.response_labels = {"0", "1"};
    return d;
}

}  // namespace hsic_psi
