// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace comi {

enum class ErrorKind {
    io,
    format,
    truncation,
    validation,
    shape,
    empty_query,
    empty_segment,
    empty_context,
    self_comparison,
    infeasible_budget,
    range,
    degenerate_labels,
    degenerate_set,
    infeasible_spec,
    enumeration_bound,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::validation: return "validation";
    case ErrorKind::shape: return "shape";
    case ErrorKind::empty_query: return "empty-query";
    case ErrorKind::empty_segment: return "empty-segment";
    case ErrorKind::empty_context: return "empty-context";
    case ErrorKind::self_comparison: return "self-comparison";
    case ErrorKind::infeasible_budget: return "infeasible-budget";
    case ErrorKind::range: return "range";
    case ErrorKind::degenerate_labels: return "degenerate-labels";
    case ErrorKind::degenerate_set: return "degenerate-set";
    case ErrorKind::infeasible_spec: return "infeasible-spec";
    case ErrorKind::enumeration_bound: return "enumeration-bound";
    }
    return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

}  // namespace comi
