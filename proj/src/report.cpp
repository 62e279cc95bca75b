#include "hsic_psi/report.hpp"

#include "hsic_psi/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <limits>

namespace hsic_psi {

namespace {

using Json = nlohmann::ordered_json;

Json num(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
    return v;
}

double get_num(const Json& j) {
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "Infinity") return std::numeric_limits<double>::infinity();
        if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
        if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
        throw Error(ErrorCode::InvalidArgument, "expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

Json vec(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (double x : v) out.push_back(num(x));
    return out;
}

Eigen::VectorXd get_vec(const Json& j) {
    Eigen::VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = get_num(j[i]);
    return v;
}

Json doubles(const std::vector<double>& v) {
    Json out = Json::array();
    for (double x : v) out.push_back(num(x));
    return out;
}

std::vector<double> get_doubles(const Json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(get_num(x));
    return v;
}

std::string csv_num(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

Json config_json(const PipelineConfig& c) {
    Json j;
    j["split_ratio"] = num(c.split_ratio);
    j["screen_count"] = c.screen_count;
    j["alpha"] = num(c.alpha);
    j["target"] = to_string(c.target);
    j["side"] = to_string(c.side);
    j["screen_estimator"] = c.screen_estimator.to_string();
    j["h_estimator"] = c.h_estimator.to_string();
    j["m_estimator"] = c.m_estimator.to_string();
    j["cov_method"] = to_string(c.cov_method);
    j["lambda"] = c.lambda.to_string();
    j["adaptive_gamma"] = c.adaptive_gamma ? num(*c.adaptive_gamma) : Json(nullptr);
    j["fold1_match_fold2"] = c.fold1_match_fold2;
    j["hsic_full_event"] = c.hsic_full_event;
    j["seed"] = c.seed;
    j["estimator_seeds"] = {c.screen_estimator.seed, c.h_estimator.seed, c.m_estimator.seed};
    return j;
}

PipelineConfig config_from(const Json& j) {
    PipelineConfig c;
    c.split_ratio = get_num(j.at("split_ratio"));
    c.screen_count = j.at("screen_count").get<Index>();
    c.alpha = get_num(j.at("alpha"));
    c.target = parse_target(j.at("target").get<std::string>());
    c.side = parse_side(j.at("side").get<std::string>());
    c.screen_estimator = EstimatorSpec::parse(j.at("screen_estimator").get<std::string>());
    c.h_estimator = EstimatorSpec::parse(j.at("h_estimator").get<std::string>());
    c.m_estimator = EstimatorSpec::parse(j.at("m_estimator").get<std::string>());
    c.cov_method = parse_cov_method(j.at("cov_method").get<std::string>());
    c.lambda = LambdaSelection::parse(j.at("lambda").get<std::string>());
    if (!j.at("adaptive_gamma").is_null()) c.adaptive_gamma = get_num(j.at("adaptive_gamma"));
    c.fold1_match_fold2 = j.at("fold1_match_fold2").get<bool>();
    c.hsic_full_event = j.at("hsic_full_event").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& seeds = j.at("estimator_seeds");
    c.screen_estimator.seed = seeds.at(0).get<std::uint64_t>();
    c.h_estimator.seed = seeds.at(1).get<std::uint64_t>();
    c.m_estimator.seed = seeds.at(2).get<std::uint64_t>();
    return c;
}

Json feature_json(const FeatureReport& f) {
    Json j;
    j["feature"] = f.feature;
    j["name"] = f.name;
    j["beta"] = num(f.beta);
    j["significant"] = f.significant;
    if (f.inference) {
        const auto& r = *f.inference;
        const auto& t = r.truncation;
        Json inf;
        inf["target"] = to_string(r.target);
        inf["side"] = to_string(r.side);
        inf["p_value"] = num(r.p_value);
        inf["ci_lo"] = num(r.ci.lo);
        inf["ci_hi"] = num(r.ci.hi);
        inf["ci_bracketed"] = r.ci.bracketed;
        inf["observed"] = num(t.observed);
        inf["variance"] = num(t.variance);
        inf["lower"] = num(t.lower);
        inf["upper"] = num(t.upper);
        inf["eta"] = vec(t.eta);
        inf["C"] = vec(t.C);
        inf["Z"] = vec(t.Z);
        j["inference"] = std::move(inf);
    } else {
        j["inference"] = nullptr;
    }
    j["diagnostic"] = f.diagnostic;
    return j;
}

FeatureReport feature_from(const Json& j) {
    FeatureReport f;
    f.feature = j.at("feature").get<Index>();
    f.name = j.at("name").get<std::string>();
    f.beta = get_num(j.at("beta"));
    f.significant = j.at("significant").get<bool>();
    f.diagnostic = j.at("diagnostic").get<std::string>();
    const auto& inf = j.at("inference");
    if (!inf.is_null()) {
        InferenceResult r;
        r.feature = f.feature;
        r.target = parse_target(inf.at("target").get<std::string>());
        r.side = parse_side(inf.at("side").get<std::string>());
        r.p_value = get_num(inf.at("p_value"));
        r.ci.lo = get_num(inf.at("ci_lo"));
        r.ci.hi = get_num(inf.at("ci_hi"));
        r.ci.bracketed = inf.at("ci_bracketed").get<bool>();
        r.truncation.observed = get_num(inf.at("observed"));
        r.truncation.variance = get_num(inf.at("variance"));
        r.truncation.lower = get_num(inf.at("lower"));
        r.truncation.upper = get_num(inf.at("upper"));
        r.truncation.eta = get_vec(inf.at("eta"));
        r.truncation.C = get_vec(inf.at("C"));
        r.truncation.Z = get_vec(inf.at("Z"));
        f.inference = std::move(r);
    }
    return f;
}

Json model_json(const SyntheticSpec& m) {
    Json j;
    j["model"] = to_string(m.model);
    j["n"] = m.n;
    j["theta"] = num(m.theta);
    j["cov"] = to_string(m.cov);
    j["seed"] = m.seed;
    return j;
}

SyntheticSpec model_from(const Json& j) {
    SyntheticSpec m;
    m.model = parse_model(j.at("model").get<std::string>());
    m.n = j.at("n").get<Index>();
    m.theta = get_num(j.at("theta"));
    m.cov = parse_cov_form(j.at("cov").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
}

Json parse_checked(const std::string& text, const char* kind) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Ingestion, std::string("invalid ") + kind + " JSON: " + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != kReportFormatVersion) {
        throw Error(ErrorCode::Ingestion, std::string("unsupported ") + kind + " format version");
    }
    return j;
}

template <class F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Ingestion, std::string("malformed report: ") + e.what());
    }
}

}  // namespace

std::string to_string(TargetKind t) { return t == TargetKind::Hsic ? "hsic" : "partial"; }

TargetKind parse_target(const std::string& text) {
    if (text == "hsic") return TargetKind::Hsic;
    if (text == "partial") return TargetKind::Partial;
    throw Error(ErrorCode::InvalidArgument, "unknown target '" + text + "' (hsic, partial)");
}

std::string to_string(TestSide s) { return s == TestSide::OneSided ? "one" : "two"; }

TestSide parse_side(const std::string& text) {
    if (text == "one" || text == "one-sided") return TestSide::OneSided;
    if (text == "two" || text == "two-sided") return TestSide::TwoSided;
    throw Error(ErrorCode::InvalidArgument, "unknown test side '" + text + "' (one, two)");
}

std::string to_string(CovMethod m) { return m == CovMethod::Oas ? "oas" : "empirical"; }

CovMethod parse_cov_method(const std::string& text) {
    if (text == "oas") return CovMethod::Oas;
    if (text == "empirical") return CovMethod::Empirical;
    throw Error(ErrorCode::InvalidArgument, "unknown covariance method '" + text + "' (oas, empirical)");
}

ReportFormat parse_report_format(const std::string& text) {
    if (text == "json") return ReportFormat::Json;
    if (text == "csv") return ReportFormat::Csv;
    throw Error(ErrorCode::InvalidArgument, "unknown format '" + text + "' (json, csv)");
}

std::string emit_json(const RunReport& r) {
    Json j;
    j["format_version"] = kReportFormatVersion;
    j["kind"] = "run";
    j["config"] = config_json(r.config);
    j["rows"] = r.rows;
    j["features"] = r.features;
    j["fold1_rows"] = r.fold1_rows;
    j["fold2_rows"] = r.fold2_rows;
    j["screened"] = r.screened;
    j["lambda_grid"] = doubles(r.lambda_grid);
    j["lambda"] = num(r.lambda);
    j["weights"] = vec(r.weights);
    j["beta"] = vec(r.beta);
    j["selected"] = r.selected;
    j["significant"] = r.significant;
    j["empty_selection"] = r.empty_selection;
    j["pd_projected"] = r.pd_projected;
    Json results = Json::array();
    for (const auto& f : r.results) results.push_back(feature_json(f));
    j["results"] = std::move(results);
    Json prov;
    prov["screen_rows"] = r.provenance.screen_rows;
    prov["lambda_rows"] = r.provenance.lambda_rows;
    prov["h_rows"] = r.provenance.h_rows;
    prov["m_rows"] = r.provenance.m_rows;
    prov["cov_rows"] = r.provenance.cov_rows;
    j["provenance"] = std::move(prov);
    return j.dump(2) + "\n";
}

RunReport parse_run_report(const std::string& text) {
    const Json j = parse_checked(text, "run report");
    return guarded([&] {
        RunReport r;
        r.config = config_from(j.at("config"));
        r.rows = j.at("rows").get<Index>();
        r.features = j.at("features").get<Index>();
        r.fold1_rows = j.at("fold1_rows").get<std::vector<Index>>();
        r.fold2_rows = j.at("fold2_rows").get<std::vector<Index>>();
        r.screened = j.at("screened").get<std::vector<Index>>();
        r.lambda_grid = get_doubles(j.at("lambda_grid"));
        r.lambda = get_num(j.at("lambda"));
        r.weights = get_vec(j.at("weights"));
        r.beta = get_vec(j.at("beta"));
        r.selected = j.at("selected").get<std::vector<Index>>();
        r.significant = j.at("significant").get<std::vector<Index>>();
        r.empty_selection = j.at("empty_selection").get<bool>();
        r.pd_projected = j.at("pd_projected").get<bool>();
        for (const auto& f : j.at("results")) r.results.push_back(feature_from(f));
        const auto& prov = j.at("provenance");
        r.provenance.screen_rows = prov.at("screen_rows").get<std::vector<Index>>();
        r.provenance.lambda_rows = prov.at("lambda_rows").get<std::vector<Index>>();
        r.provenance.h_rows = prov.at("h_rows").get<std::vector<Index>>();
        r.provenance.m_rows = prov.at("m_rows").get<std::vector<Index>>();
        r.provenance.cov_rows = prov.at("cov_rows").get<std::vector<Index>>();
        return r;
    });
}

std::string emit_csv(const RunReport& r) {
    std::string out = "feature,target,p_value,ci_lo,ci_hi,selected,significant\n";
    for (const auto& f : r.results) {
        out += csv_field(f.name) + ',' + to_string(r.config.target) + ',';
        if (f.inference) {
            out += csv_num(f.inference->p_value) + ',' + csv_num(f.inference->ci.lo) + ',' + csv_num(f.inference->ci.hi);
        } else {
            out += ",,";
        }
        out += std::string(",true,") + (f.significant ? "true" : "false") + '\n';
    }
    return out;
}

std::string emit_json(const ExperimentReport& r) {
    Json j;
    j["format_version"] = kReportFormatVersion;
    j["kind"] = r.kind;
    j["model"] = model_json(r.model);
    j["config"] = config_json(r.config);
    j["reps"] = r.reps;
    Json points = Json::array();
    for (const auto& p : r.points) {
        Json pj;
        pj["theta"] = num(p.theta);
        pj["rejections"] = p.summary.rejections;
        pj["tests"] = p.summary.tests;
        pj["rate"] = num(p.summary.rate);
        pj["ci_lo"] = num(p.summary.ci_lo);
        pj["ci_hi"] = num(p.summary.ci_hi);
        Json reps = Json::array();
        for (const auto& rec : p.replicates) {
            Json rj;
            rj["replicate"] = rec.replicate;
            rj["data_seed"] = rec.data_seed;
            rj["pipeline_seed"] = rec.pipeline_seed;
            rj["selected"] = rec.selected;
            rj["tests"] = rec.tests;
            rj["rejections"] = rec.rejections;
            rj["error"] = rec.error;
            reps.push_back(std::move(rj));
        }
        pj["replicates"] = std::move(reps);
        points.push_back(std::move(pj));
    }
    j["points"] = std::move(points);
    return j.dump(2) + "\n";
}

ExperimentReport parse_experiment_report(const std::string& text) {
    const Json j = parse_checked(text, "experiment report");
    return guarded([&] {
        ExperimentReport r;
        r.kind = j.at("kind").get<std::string>();
        r.model = model_from(j.at("model"));
        r.config = config_from(j.at("config"));
        r.reps = j.at("reps").get<int>();
        for (const auto& pj : j.at("points")) {
            ExperimentPoint p;
            p.theta = get_num(pj.at("theta"));
            p.summary.rejections = pj.at("rejections").get<long>();
            p.summary.tests = pj.at("tests").get<long>();
            p.summary.rate = get_num(pj.at("rate"));
            p.summary.ci_lo = get_num(pj.at("ci_lo"));
            p.summary.ci_hi = get_num(pj.at("ci_hi"));
            for (const auto& rj : pj.at("replicates")) {
                ReplicateRecord rec;
                rec.replicate = rj.at("replicate").get<int>();
                rec.data_seed = rj.at("data_seed").get<std::uint64_t>();
                rec.pipeline_seed = rj.at("pipeline_seed").get<std::uint64_t>();
                rec.selected = rj.at("selected").get<long>();
                rec.tests = rj.at("tests").get<long>();
                rec.rejections = rj.at("rejections").get<long>();
                rec.error = rj.at("error").get<std::string>();
                p.replicates.push_back(std::move(rec));
            }
            r.points.push_back(std::move(p));
        }
        return r;
    });
}

std::string emit_csv(const ExperimentReport& r) {
    std::string out = "kind,model,theta,rejections,tests,rate,ci_lo,ci_hi\n";
    for (const auto& p : r.points) {
        out += r.kind + ',' + csv_field(to_string(r.model.model)) + ',' + csv_num(p.theta) + ',' +
               std::to_string(p.summary.rejections) + ',' + std::to_string(p.summary.tests) + ',' +
               csv_num(p.summary.rate) + ',' + csv_num(p.summary.ci_lo) + ',' + csv_num(p.summary.ci_hi) + '\n';
    }
    return out;
}

std::string emit(const RunReport& report, ReportFormat format) {
    return format == ReportFormat::Json ? emit_json(report) : emit_csv(report);
}

std::string emit(const ExperimentReport& report, ReportFormat format) {
    return format == ReportFormat::Json ? emit_json(report) : emit_csv(report);
}

}  // namespace hsic_psi
