#include "hsic_psi/error.hpp"

namespace hsic_psi {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::AllIdentical: return "AllIdentical";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::SizeMismatch: return "SizeMismatch";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::DuplicateIndex: return "DuplicateIndex";
        case ErrorCode::BlockTooSmall: return "BlockTooSmall";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::TooFewSummands: return "TooFewSummands";
        case ErrorCode::NotPD: return "NotPD";
        case ErrorCode::DegenerateFolds: return "DegenerateFolds";
        case ErrorCode::LambdaZero: return "LambdaZero";
        case ErrorCode::NotSelected: return "NotSelected";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::DegenerateDirection: return "DegenerateDirection";
        case ErrorCode::EmptyInterval: return "EmptyInterval";
        case ErrorCode::OutsideInterval: return "OutsideInterval";
        case ErrorCode::FoldTooSmall: return "FoldTooSmall";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Ingestion: return "Ingestion";
    }
    return "Unknown";
}

}  // namespace hsic_psi
