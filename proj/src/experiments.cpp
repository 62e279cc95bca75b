#include "hsic_psi/experiments.hpp"

#include "hsic_psi/error.hpp"
#include "hsic_psi/rng.hpp"

#include <algorithm>
#include <cmath>

namespace hsic_psi {

namespace {

using Counter = void (*)(const RunReport&, ReplicateRecord&);

void count_null_features(const RunReport& run, ReplicateRecord& rec) {
    for (const auto& f : run.results) {
        if (f.feature < kInfluentialFeatures || !f.inference) continue;
        ++rec.tests;
        if (f.significant) ++rec.rejections;
    }
}

void count_first_feature(const RunReport& run, ReplicateRecord& rec) {
    for (const auto& f : run.results) {
        if (f.feature != 0 || !f.inference) continue;
        ++rec.tests;
        if (f.significant) ++rec.rejections;
    }
}

ExperimentPoint run_point(const PipelineConfig& config, SyntheticSpec model, int reps, Counter count) {
    ExperimentPoint point;
    point.theta = model.theta;
    long rejections = 0, tests = 0;
    for (int r = 0; r < reps; ++r) {
        ReplicateRecord rec;
        rec.replicate = r;
        rec.data_seed = replicate_data_seed(config.seed, r);
        rec.pipeline_seed = replicate_pipeline_seed(config.seed, r);
        model.seed = rec.data_seed;
        PipelineConfig c = config;
        c.seed = rec.pipeline_seed;
        try {
            const auto run = run_psi(generate(model), c);
            rec.selected = static_cast<long>(run.selected.size());
            count(run, rec);
        } catch (const Error& e) {
            rec.error = e.what();
        }
        rejections += rec.rejections;
        tests += rec.tests;
        point.replicates.push_back(std::move(rec));
    }
    point.summary = summarize_rate(rejections, tests);
    return point;
}

}  // namespace

RateSummary summarize_rate(long rejections, long tests) {
    RateSummary s;
    s.rejections = rejections;
    s.tests = tests;
    if (tests == 0) return s;
    const double n = static_cast<double>(tests);
    const double phat = static_cast<double>(rejections) / n;
    const double z = 1.959963984540054;
    const double denom = 1.0 + z * z / n;
    const double centre = (phat + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom;
    s.rate = phat;
    s.ci_lo = std::max(0.0, centre - half);
    s.ci_hi = std::min(1.0, centre + half);
    return s;
}

std::uint64_t replicate_data_seed(std::uint64_t seed, int replicate) {
    return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(replicate)), "data");
}

std::uint64_t replicate_pipeline_seed(std::uint64_t seed, int replicate) {
    return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(replicate)), "pipeline");
}

ExperimentReport type_one_error_experiment(const PipelineConfig& config, const SyntheticSpec& model, int reps) {
    if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be >= 1");
    config.validate();
    model.validate();
    ExperimentReport report;
    report.kind = "type1";
    report.model = model;
    report.model.seed = config.seed;
    report.config = config;
    report.reps = reps;
    report.points.push_back(run_point(config, model, reps, count_null_features));
    return report;
}

ExperimentReport power_experiment(const PipelineConfig& config, const SyntheticSpec& model, std::span<const double> thetas,
                                  int reps) {
    if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be >= 1");
    if (thetas.empty()) throw Error(ErrorCode::InvalidArgument, "theta grid is empty");
    config.validate();
    model.validate();
    ExperimentReport report;
    report.kind = "power";
    report.model = model;
    report.model.seed = config.seed;
    report.config = config;
    report.reps = reps;
    for (double theta : thetas) {
        SyntheticSpec m = model;
        m.theta = theta;
        report.points.push_back(run_point(config, m, reps, count_first_feature));
    }
    return report;
}

}  // namespace hsic_psi
