#include "hsic_psi/io.hpp"

#include "hsic_psi/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hsic_psi {

namespace {

Error ingestion(const std::string& what) { return Error(ErrorCode::Ingestion, what); }

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) return std::nullopt;
    const char* begin = t.data();
    if (*begin == '+') ++begin;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
    return value;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool quoted_field = false;
    bool any = false;  // current record has content
    char c = 0;
    long line = 1;
    // Skip a UTF-8 byte order mark.
    if (in.peek() == 0xEF) {
        char bom[3] = {};
        in.read(bom, 3);
        if (!(in.gcount() == 3 && bom[1] == '\xBB' && bom[2] == '\xBF')) {
            in.clear();
            in.seekg(0);
        }
    }
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || quoted_field) throw ingestion("line " + std::to_string(line) + ": stray quote in field");
                in_quotes = quoted_field = any = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                quoted_field = false;
                any = true;
                break;
            case '\r':
                if (in.peek() == '\n') break;
                [[fallthrough]];
            case '\n':
                ++line;
                if (any || !field.empty()) {
                    record.push_back(std::move(field));
                    records.push_back(std::move(record));
                }
                record.clear();
                field.clear();
                quoted_field = any = false;
                break;
            default:
                if (quoted_field) throw ingestion("line " + std::to_string(line) + ": text after closing quote");
                field += c;
                any = true;
        }
    }
    if (in_quotes) throw ingestion("unterminated quoted field at end of input");
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

KernelSpec parse_kernel_spec(const std::string& text) {
    if (text == "delta") return KernelSpec::normalized_delta();
    if (text == "gaussian" || text == "median") return KernelSpec::median_heuristic();
    if (text.starts_with("gaussian:")) {
        const auto sigma = parse_number(text.substr(9));
        if (!sigma || !(*sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "bad bandwidth in '" + text + "'");
        return KernelSpec::gaussian(*sigma);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + text + "' (gaussian, gaussian:<sigma>, delta)");
}

Dataset ingest_csv(std::istream& in, const IngestOptions& options) {
    const auto records = parse_csv(in);
    if (records.empty()) throw ingestion("empty input: a header row is required");
    const auto& header = records[0];
    const std::size_t cols = header.size();
    if (cols < 2) throw ingestion("need at least one feature column and a response column");
    for (std::size_t a = 0; a < cols; ++a) {
        for (std::size_t b = a + 1; b < cols; ++b) {
            if (header[a] == header[b]) throw ingestion("duplicate column name '" + header[a] + "'");
        }
    }

    std::size_t response = cols - 1;
    if (options.response) {
        const auto it = std::find(header.begin(), header.end(), *options.response);
        if (it == header.end()) throw ingestion("response column '" + *options.response + "' not found");
        response = static_cast<std::size_t>(it - header.begin());
    }
    for (const auto& [name, spec] : options.kernels) {
        if (std::find(header.begin(), header.end(), name) == header.end()) {
            throw ingestion("kernel override for unknown column '" + name + "'");
        }
    }

    const auto n = static_cast<Index>(records.size() - 1);
    const auto p = static_cast<Index>(cols - 1);
    if (n < 1) throw ingestion("no data rows");
    Eigen::MatrixXd X(n, p);
    std::vector<std::string> raw_response(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const auto& rec = records[static_cast<std::size_t>(i) + 1];
        const std::string where = "row " + std::to_string(i + 1);
        if (rec.size() != cols) {
            throw ingestion(where + ": expected " + std::to_string(cols) + " fields, found " + std::to_string(rec.size()));
        }
        Index j = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (c == response) {
                raw_response[static_cast<std::size_t>(i)] = rec[c];
                continue;
            }
            const std::string at = where + ", column '" + header[c] + "'";
            if (trim(rec[c]).empty()) throw ingestion(at + ": missing value");
            const auto v = parse_number(rec[c]);
            if (!v) throw ingestion(at + ": cannot parse '" + rec[c] + "' as a number");
            if (!std::isfinite(*v)) throw ingestion(at + ": non-finite value");
            X(i, j++) = *v;
        }
    }

    bool categorical = options.categorical_response;
    Eigen::VectorXd y(n);
    if (!categorical) {
        for (Index i = 0; i < n; ++i) {
            const auto& cell = raw_response[static_cast<std::size_t>(i)];
            if (trim(cell).empty()) {
                throw ingestion("row " + std::to_string(i + 1) + ", column '" + header[response] + "': missing value");
            }
            const auto v = parse_number(cell);
            if (!v || !std::isfinite(*v)) {
                categorical = true;
                break;
            }
            y[i] = *v;
        }
    }
    std::vector<std::string> labels;
    if (categorical) {
        for (Index i = 0; i < n; ++i) {
            const auto& cell = raw_response[static_cast<std::size_t>(i)];
            if (cell.empty()) {
                throw ingestion("row " + std::to_string(i + 1) + ", column '" + header[response] + "': missing value");
            }
            auto it = std::find(labels.begin(), labels.end(), cell);
            if (it == labels.end()) {
                labels.push_back(cell);
                it = labels.end() - 1;
            }
            y[i] = static_cast<double>(it - labels.begin());
        }
    }

    Dataset d = Dataset::make(std::move(X), std::move(y), categorical);
    d.response_labels = std::move(labels);
    Index j = 0;
    for (std::size_t c = 0; c < cols; ++c) {
        if (c == response) continue;
        const auto k = static_cast<std::size_t>(j++);
        d.feature_names[k] = header[c];
        if (const auto it = options.kernels.find(header[c]); it != options.kernels.end()) d.feature_kernels[k] = it->second;
    }
    d.validate();
    return d;
}

Dataset ingest_csv(const std::string& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ingestion("cannot open '" + path + "'");
    return ingest_csv(in, options);
}

void write_csv(std::ostream& out, const Dataset& data, const std::string& response_name) {
    for (const auto& name : data.feature_names) out << quote_if_needed(name) << ',';
    out << quote_if_needed(response_name) << '\n';
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index j = 0; j < data.features(); ++j) out << format_double(data.X(i, j)) << ',';
        if (data.categorical_response && !data.response_labels.empty()) {
            out << quote_if_needed(data.response_labels[static_cast<std::size_t>(data.y[i])]) << '\n';
        } else {
            out << format_double(data.y[i]) << '\n';
        }
    }
}

}  // namespace hsic_psi
