// hsic-psi: command-line front end.
//
//   hsic-psi select   --input data.csv [--response y] [pipeline flags]
//   hsic-psi simulate --model M2 --n 400 [pipeline flags]
//   hsic-psi type1    --model M1 --cov identity --reps 100
//   hsic-psi power    --model M1p --thetas 0,1,2.33 --reps 50
//   hsic-psi bench    --n 400
//
// Exit codes: 0 success, 2 ingestion error, 3 numerical error.

#include "hsic_psi/error.hpp"
#include "hsic_psi/experiments.hpp"
#include "hsic_psi/io.hpp"
#include "hsic_psi/pipeline.hpp"
#include "hsic_psi/report.hpp"
#include "hsic_psi/synthetic.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace hsic_psi;

namespace {

constexpr int kExitIngestion = 2;
constexpr int kExitNumerical = 3;

struct PipelineFlags {
    double split_ratio = 0.25;
    long screen_count = 50;
    double alpha = 0.05;
    std::string target = "hsic";
    std::string side;  // subcommand default when empty
    std::string screen_estimator = "unbiased";
    std::string h_estimator = "block:10";
    std::string m_estimator = "block:10";
    std::string cov_method = "oas";
    std::string lambda = "cv:10";
    std::optional<double> adaptive_gamma;
    bool fold1_match_fold2 = false;
    bool hsic_full_event = false;
    std::uint64_t seed = 0;

    void attach(CLI::App& app) {
        app.add_option("--split-ratio", split_ratio, "Fraction of rows in the first fold")->capture_default_str();
        app.add_option("--screen-count", screen_count, "Number of features kept by screening")->capture_default_str();
        app.add_option("--alpha", alpha, "Significance level")->capture_default_str();
        app.add_option("--target", target, "Inference target: hsic or partial")->capture_default_str();
        app.add_option("--side", side, "Test side: one or two");
        app.add_option("--screen-estimator", screen_estimator, "Fold-1 estimator")->capture_default_str();
        app.add_option("--h-estimator", h_estimator, "Fold-2 H estimator: block:B or incomplete:l")->capture_default_str();
        app.add_option("--m-estimator", m_estimator, "Fold-2 M estimator")->capture_default_str();
        app.add_option("--cov-method", cov_method, "Covariance of H: oas or empirical")->capture_default_str();
        app.add_option("--lambda", lambda, "cv:K, aic or fixed:VALUE")->capture_default_str();
        app.add_option("--adaptive-gamma", adaptive_gamma, "Adaptive penalty exponent (off by default)");
        app.add_flag("--fold1-match-fold2", fold1_match_fold2, "Fold-1 M uses the fold-2 M estimator");
        app.add_flag("--hsic-full-event", hsic_full_event, "Condition the HSIC target on the full selected set");
        app.add_option("--seed", seed, "Master seed (default from HSIC_PSI_SEED, else 0)");
    }

    PipelineConfig build(TestSide default_side) const {
        PipelineConfig c;
        c.split_ratio = split_ratio;
        c.screen_count = screen_count;
        c.alpha = alpha;
        c.target = parse_target(target);
        c.side = side.empty() ? default_side : parse_side(side);
        c.screen_estimator = EstimatorSpec::parse(screen_estimator);
        c.h_estimator = EstimatorSpec::parse(h_estimator);
        c.m_estimator = EstimatorSpec::parse(m_estimator);
        c.cov_method = parse_cov_method(cov_method);
        c.lambda = LambdaSelection::parse(lambda);
        c.adaptive_gamma = adaptive_gamma;
        c.fold1_match_fold2 = fold1_match_fold2;
        c.hsic_full_event = hsic_full_event;
        c.seed = seed;
        c.validate();
        return c;
    }
};

struct OutputFlags {
    std::string output = "-";
    std::string format = "json";

    void attach(CLI::App& app) {
        app.add_option("-o,--output", output, "Output file, '-' for stdout")->capture_default_str();
        app.add_option("--format", format, "json or csv")->capture_default_str();
    }

    void write(const std::string& text) const {
        if (output == "-") {
            std::cout << text;
            return;
        }
        std::ofstream out(output, std::ios::binary);
        if (!out) throw Error(ErrorCode::Ingestion, "cannot write '" + output + "'");
        out << text;
    }
};

struct ModelFlags {
    std::string model = "M1";
    long n = 400;
    double theta = 1.0;
    std::string cov = "identity";

    void attach(CLI::App& app, bool with_theta) {
        app.add_option("--model", model, "M1, M1p, M2, M3 or M4")->capture_default_str();
        app.add_option("--n", n, "Sample size")->capture_default_str();
        if (with_theta) app.add_option("--theta", theta, "Signal strength of X1")->capture_default_str();
        app.add_option("--cov", cov, "identity or decaying")->capture_default_str();
    }

    SyntheticSpec build() const {
        SyntheticSpec s;
        s.model = parse_model(model);
        s.n = n;
        s.theta = theta;
        s.cov = parse_cov_form(cov);
        s.validate();
        return s;
    }
};

std::uint64_t env_seed() {
    const char* v = std::getenv("HSIC_PSI_SEED");
    if (!v || !*v) return 0;
    char* end = nullptr;
    const auto seed = std::strtoull(v, &end, 10);
    if (*end != '\0') throw Error(ErrorCode::InvalidArgument, "HSIC_PSI_SEED must be an unsigned integer");
    return seed;
}

template <class F>
double time_ms(F&& f) {
    const auto start = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string bench_report(const SyntheticSpec& spec, const PipelineConfig& config, int reps) {
    const Dataset data = generate(spec);
    const auto kernels = fit_kernels_lenient(data);
    const auto response = fit_response_kernel(data);
    std::string out = "{\n  \"n\": " + std::to_string(spec.n) + ",\n  \"p\": " + std::to_string(data.features()) +
                      ",\n  \"reps\": " + std::to_string(reps) + ",\n  \"timings_ms\": {\n";
    const std::pair<const char*, EstimatorSpec> estimators[] = {
        {"H unbiased", EstimatorSpec::unbiased()},
        {"H block:10", EstimatorSpec::block(10)},
        {"H incomplete:1", EstimatorSpec::incomplete(1)},
    };
    for (const auto& [name, est] : estimators) {
        const double ms = time_ms([&] {
            for (int r = 0; r < reps; ++r) estimate_H(kernels, response, data.feature_ids, est);
        });
        out += "    \"" + std::string(name) + "\": " + std::to_string(ms / reps) + ",\n";
    }
    const std::pair<const char*, EstimatorSpec> m_estimators[] = {
        {"M unbiased", EstimatorSpec::unbiased()},
        {"M block:10", EstimatorSpec::block(10)},
    };
    for (const auto& [name, est] : m_estimators) {
        const double ms = time_ms([&] {
            for (int r = 0; r < reps; ++r) estimate_M(kernels, data.feature_ids, est);
        });
        out += "    \"" + std::string(name) + "\": " + std::to_string(ms / reps) + ",\n";
    }
    const double ms = time_ms([&] {
        for (int r = 0; r < reps; ++r) run_psi(data, config);
    });
    out += "    \"pipeline\": " + std::to_string(ms / reps) + "\n  }\n}\n";
    return out;
}

std::vector<double> parse_thetas(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad theta '" + item + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Post-selection inference for HSIC-Lasso feature selection"};
    app.require_subcommand(1);

    PipelineFlags pipe;
    OutputFlags outf;
    ModelFlags model;

    auto* select = app.add_subcommand("select", "Run selection and inference on a CSV file");
    std::string input;
    std::string response;
    bool categorical = false;
    std::vector<std::string> kernel_overrides;
    select->add_option("-i,--input", input, "CSV file with a header row")->required();
    select->add_option("--response", response, "Response column (default: last)");
    select->add_flag("--categorical-response", categorical, "Treat the response as labels");
    select->add_option("--kernel", kernel_overrides, "Per-column kernel, NAME=gaussian|gaussian:SIGMA|delta");
    pipe.attach(*select);
    outf.attach(*select);

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic data set and run inference on it");
    std::string data_out;
    model.attach(*simulate, true);
    simulate->add_option("--data-out", data_out, "Also write the generated data as CSV");
    pipe.attach(*simulate);
    outf.attach(*simulate);

    auto* type1 = app.add_subcommand("type1", "Type-I error on null features 11-50");
    int reps = 100;
    model.attach(*type1, false);
    type1->add_option("--reps", reps, "Replicates")->capture_default_str();
    pipe.attach(*type1);
    outf.attach(*type1);

    auto* power = app.add_subcommand("power", "Rejection ratio for X1 across a theta grid");
    std::string thetas = "0,1,2.33";
    model.attach(*power, false);
    power->add_option("--thetas", thetas, "Comma-separated theta values")->capture_default_str();
    power->add_option("--reps", reps, "Replicates per theta")->capture_default_str();
    pipe.attach(*power);
    outf.attach(*power);

    auto* bench = app.add_subcommand("bench", "Time the estimators and one pipeline run");
    int bench_reps = 3;
    model.attach(*bench, true);
    bench->add_option("--reps", bench_reps, "Timed repetitions")->capture_default_str();
    pipe.attach(*bench);

    try {
        pipe.seed = env_seed();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    CLI11_PARSE(app, argc, argv);

    try {
        const auto format = parse_report_format(outf.format);
        if (*select) {
            IngestOptions opts;
            if (!response.empty()) opts.response = response;
            opts.categorical_response = categorical;
            for (const auto& kv : kernel_overrides) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--kernel expects NAME=KERNEL");
                opts.kernels[kv.substr(0, eq)] = parse_kernel_spec(kv.substr(eq + 1));
            }
            const Dataset data = ingest_csv(input, opts);
            outf.write(emit(run_psi(data, pipe.build(TestSide::TwoSided)), format));
        } else if (*simulate) {
            auto spec = model.build();
            const auto config = pipe.build(TestSide::TwoSided);
            spec.seed = derive_seed(config.seed, "data");
            const Dataset data = generate(spec);
            if (!data_out.empty()) {
                std::ofstream out(data_out, std::ios::binary);
                if (!out) throw Error(ErrorCode::Ingestion, "cannot write '" + data_out + "'");
                write_csv(out, data);
            }
            outf.write(emit(run_psi(data, config), format));
        } else if (*type1) {
            outf.write(emit(type_one_error_experiment(pipe.build(TestSide::OneSided), model.build(), reps), format));
        } else if (*power) {
            if (model.model == "M1") model.model = "M1p";
            const auto grid = parse_thetas(thetas);
            outf.write(emit(power_experiment(pipe.build(TestSide::OneSided), model.build(), grid, reps), format));
        } else if (*bench) {
            auto spec = model.build();
            const auto config = pipe.build(TestSide::TwoSided);
            spec.seed = config.seed;
            std::cout << bench_report(spec, config, bench_reps);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (e.code() == ErrorCode::Ingestion) return kExitIngestion;
        if (e.code() == ErrorCode::InvalidArgument) return 1;
        return kExitNumerical;
    }
    return 0;
}
