#pragma once

#include <stdexcept>
#include <string>

namespace v2v {

enum class ErrorKind {
    dimension,
    unsupported_glyph,
    font_size,
    io,
    spec_validation,
    unknown_color,
    patch_size,
    tokenizer,
    capacity,
    layer,
    mode,
    numeric_failure,
    conditioning,
    length,
    labeling,
    degenerate_input,
    retrieval,
    range,
    completeness,
    bench_spec,
    unsupported_category,
    judge_parse,
    transport,
    usage,
    config,
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::unsupported_glyph: return "unsupported-glyph";
        case ErrorKind::font_size: return "font-size";
        case ErrorKind::io: return "io";
        case ErrorKind::spec_validation: return "spec-validation";
        case ErrorKind::unknown_color: return "unknown-color";
        case ErrorKind::patch_size: return "patch-size";
        case ErrorKind::tokenizer: return "tokenizer";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::layer: return "layer";
        case ErrorKind::mode: return "mode";
        case ErrorKind::numeric_failure: return "numeric-failure";
        case ErrorKind::conditioning: return "conditioning";
        case ErrorKind::length: return "length";
        case ErrorKind::labeling: return "labeling";
        case ErrorKind::degenerate_input: return "degenerate-input";
        case ErrorKind::retrieval: return "retrieval";
        case ErrorKind::range: return "range";
        case ErrorKind::completeness: return "completeness";
        case ErrorKind::bench_spec: return "bench-spec";
        case ErrorKind::unsupported_category: return "unsupported-category";
        case ErrorKind::judge_parse: return "judge-parse";
        case ErrorKind::transport: return "transport";
        case ErrorKind::usage: return "usage";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Library-wide exception type. kind() identifies the failure class so
/// callers (and tests) can branch without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace v2v
