/**
 * @file synthetic.hpp
 * @brief Simulation models with 50 Gaussian covariates, of which the first
 *        ten influence the response.
 *
 *   M1   Y ~ Bernoulli(g(X1 + ... + X10)), g logistic
 *   M1'  as M1 with X1 replaced by θ X1
 *   M2   Y = Σ_{i=1..5} X_i X_{i+5} + ε
 *   M3   Y = θ X1 + X2 + ... + X10 + ε
 *   M4   Y = θ (X1 - X1³) + X2 + ... + X10 + ε
 *
 * Noise variance is a fifth of the variance of the signal part.
 */
#pragma once

#include "hsic_psi/dataset.hpp"

#include <cstdint>
#include <string>

namespace hsic_psi {

inline constexpr Index kSyntheticFeatures = 50;
inline constexpr Index kInfluentialFeatures = 10;

enum class Model { M1, M1Prime, M2, M3, M4 };
enum class CovForm { Identity, Decaying };  // Decaying: 0.5^|i-j|

struct SyntheticSpec {
    Model model = Model::M1;
    Index n = 400;
    double theta = 1.0;  // M1', M3, M4
    CovForm cov = CovForm::Identity;
    std::uint64_t seed = 0;

    void validate() const;
};

std::string to_string(Model m);
Model parse_model(const std::string& text);  // "M1", "M1'", "M1p", "M2", ...
std::string to_string(CovForm c);
CovForm parse_cov_form(const std::string& text);  // "identity", "decaying"

Eigen::MatrixXd covariance_matrix(CovForm cov, Index p = kSyntheticFeatures);

/// logistic function without overflow for large |x|
double stable_sigmoid(double x);

/// Variance of the covariate-dependent part of Y. Closed form under the
/// identity covariance, otherwise a cached 10⁶-draw Monte Carlo estimate.
double signal_variance(Model model, double theta, CovForm cov);
/// 0.2 * signal variance; 0 for the binary models.
double noise_variance(const SyntheticSpec& spec);

Dataset generate(const SyntheticSpec& spec);

}  // namespace hsic_psi
