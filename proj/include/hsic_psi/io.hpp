/**
 * @file io.hpp
 * @brief CSV ingestion (RFC 4180, header row required).
 */
#pragma once

#include "hsic_psi/dataset.hpp"

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hsic_psi {

struct IngestOptions {
    std::optional<std::string> response;  // default: last column
    bool categorical_response = false;    // non-numeric responses are categorical regardless
    std::map<std::string, KernelSpec> kernels;  // per-column override
};

/// Splits CSV text into records. Quoted fields may contain commas, doubled
/// quotes and line breaks. Throws Ingestion on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

/// Errors carry ErrorCode::Ingestion and name the data row (1-based, header
/// excluded) and the column.
Dataset ingest_csv(std::istream& in, const IngestOptions& options = {});
Dataset ingest_csv(const std::string& path, const IngestOptions& options = {});

/// "gaussian", "gaussian:<sigma>", "delta"
KernelSpec parse_kernel_spec(const std::string& text);

/// Writes the data back with a header; the inverse of ingest_csv for numeric data.
void write_csv(std::ostream& out, const Dataset& data, const std::string& response_name = "y");

}  // namespace hsic_psi
