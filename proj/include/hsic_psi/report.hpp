/**
 * @file report.hpp
 * @brief JSON and CSV emission of run and experiment reports.
 *
 * JSON has a fixed key order and a format version. Non-finite numbers are
 * written as the strings "Infinity", "-Infinity" and "NaN".
 */
#pragma once

#include "hsic_psi/experiments.hpp"
#include "hsic_psi/pipeline.hpp"

#include <string>

namespace hsic_psi {

inline constexpr int kReportFormatVersion = 1;

enum class ReportFormat { Json, Csv };
ReportFormat parse_report_format(const std::string& text);

std::string emit_json(const RunReport& report);
RunReport parse_run_report(const std::string& json);

/// One row per selected feature:
/// feature,target,p_value,ci_lo,ci_hi,selected,significant
std::string emit_csv(const RunReport& report);

std::string emit_json(const ExperimentReport& report);
ExperimentReport parse_experiment_report(const std::string& json);

/// One row per θ point: kind,model,theta,rejections,tests,rate,ci_lo,ci_hi
std::string emit_csv(const ExperimentReport& report);

std::string emit(const RunReport& report, ReportFormat format);
std::string emit(const ExperimentReport& report, ReportFormat format);

std::string to_string(TargetKind t);
TargetKind parse_target(const std::string& text);  // "hsic", "partial"
std::string to_string(TestSide s);
TestSide parse_side(const std::string& text);  // "one", "two"
std::string to_string(CovMethod m);
CovMethod parse_cov_method(const std::string& text);  // "oas", "empirical"

}  // namespace hsic_psi
