/**
 * @file experiments.hpp
 * @brief Monte Carlo harnesses for the type-I error on null features and
 *        the rejection ratio for X1 across a θ grid.
 */
#pragma once

#include "hsic_psi/pipeline.hpp"
#include "hsic_psi/synthetic.hpp"

#include <span>
#include <string>
#include <vector>

namespace hsic_psi {

inline constexpr int kExperimentFormatVersion = 1;

struct RateSummary {
    long rejections = 0;
    long tests = 0;
    double rate = 0.0;  // 0 when there are no tests
    // Wilson 95% interval; [0, 1] when there are no tests.
    double ci_lo = 0.0;
    double ci_hi = 1.0;
};

RateSummary summarize_rate(long rejections, long tests);

struct ReplicateRecord {
    int replicate = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t pipeline_seed = 0;
    long rejections = 0;
    long tests = 0;
    long selected = 0;
    std::string error;  // set when the run aborted
};

struct ExperimentPoint {
    double theta = 0.0;
    RateSummary summary;
    std::vector<ReplicateRecord> replicates;
};

struct ExperimentReport {
    std::string kind;  // "type1" or "power"
    SyntheticSpec model;
    PipelineConfig config;
    int reps = 0;
    std::vector<ExperimentPoint> points;
};

/// Seeds of replicate r: data and pipeline substreams of hash(seed, r).
std::uint64_t replicate_data_seed(std::uint64_t seed, int replicate);
std::uint64_t replicate_pipeline_seed(std::uint64_t seed, int replicate);

/// Counts tests and rejections among selected features 11-50. The master
/// seed is config.seed; model.seed is ignored.
ExperimentReport type_one_error_experiment(const PipelineConfig& config, const SyntheticSpec& model, int reps);

/// Rejection ratio of the target for X1 at each θ. Replicate r uses the
/// same seeds at every θ.
ExperimentReport power_experiment(const PipelineConfig& config, const SyntheticSpec& model, std::span<const double> thetas,
                                  int reps);

}  // namespace hsic_psi
