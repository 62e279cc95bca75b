/**
 * @file pipeline.hpp
 * @brief Two-fold post-selection inference: screening and hyper-parameter
 *        selection on the first fold, HSIC-Lasso selection and conditional
 *        tests on the second.
 */
#pragma once

#include "hsic_psi/dataset.hpp"
#include "hsic_psi/hsic.hpp"
#include "hsic_psi/nnlasso.hpp"
#include "hsic_psi/selective.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hsic_psi {

struct LambdaSelection {
    enum class Kind { Cv, Aic, Fixed };
    Kind kind = Kind::Cv;
    int folds = 10;
    double value = 0.0;  // Fixed

    static LambdaSelection cv(int folds = 10) { return {Kind::Cv, folds, 0.0}; }
    static LambdaSelection aic() { return {Kind::Aic, 10, 0.0}; }
    static LambdaSelection fixed(double lambda) { return {Kind::Fixed, 10, lambda}; }

    /// "cv:10", "aic", "fixed:0.01"
    std::string to_string() const;
    static LambdaSelection parse(const std::string& text);
};

struct PipelineConfig {
    double split_ratio = 0.25;
    Index screen_count = 50;  // no screening when p <= screen_count
    double alpha = 0.05;
    TargetKind target = TargetKind::Hsic;
    TestSide side = TestSide::TwoSided;
    EstimatorSpec screen_estimator = EstimatorSpec::unbiased();
    EstimatorSpec h_estimator = EstimatorSpec::block(10);
    EstimatorSpec m_estimator = EstimatorSpec::block(10);
    CovMethod cov_method = CovMethod::Oas;
    LambdaSelection lambda = LambdaSelection::cv(10);
    std::optional<double> adaptive_gamma;
    // Fold-1 M from the fold-2 M estimator instead of the screen estimator.
    bool fold1_match_fold2 = false;
    // Condition the HSIC target on the full selected set rather than on {j selected}.
    bool hsic_full_event = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct FoldSplit {
    std::vector<Index> fold1;
    std::vector<Index> fold2;
};

/// Seeded shuffle; the first ceil(s n) positions form fold 1. Throws
/// FoldTooSmall when either fold has fewer than `min_rows` rows.
FoldSplit split_rows(Index n, double split_ratio, std::uint64_t seed, Index min_rows = 4);

/// Indices of the `count` largest estimates, largest first; ties toward the lower index.
std::vector<Index> screen(const Eigen::Ref<const Eigen::VectorXd>& H, Index count);

/// Row ids that fed each stage.
struct Provenance {
    std::vector<Index> screen_rows;
    std::vector<Index> lambda_rows;
    std::vector<Index> h_rows;
    std::vector<Index> m_rows;
    std::vector<Index> cov_rows;
};

struct FeatureReport {
    Index feature = 0;  // column in the input data
    std::string name;
    double beta = 0.0;
    std::optional<InferenceResult> inference;
    std::string diagnostic;  // set when inference failed
    bool significant = false;
};

struct RunReport {
    PipelineConfig config;
    Index rows = 0;
    Index features = 0;
    std::vector<Index> fold1_rows;
    std::vector<Index> fold2_rows;
    std::vector<Index> screened;  // input columns, in screening order
    std::vector<double> lambda_grid;
    double lambda = 0.0;
    Eigen::VectorXd weights;  // over `screened`
    Eigen::VectorXd beta;     // over `screened`
    std::vector<Index> selected;
    std::vector<FeatureReport> results;
    std::vector<Index> significant;
    bool empty_selection = false;
    bool pd_projected = false;
    Provenance provenance;
};

/// Fits per-column kernels; a constant column with a median-heuristic
/// kernel gets bandwidth 1 instead of failing.
std::vector<ColumnKernel> fit_kernels_lenient(const Dataset& data);

RunReport run_psi(const Dataset& data, const PipelineConfig& config);
/// Same procedure on folds chosen by the caller.
RunReport run_on_folds(const Dataset& fold1, const Dataset& fold2, const PipelineConfig& config);

}  // namespace hsic_psi
