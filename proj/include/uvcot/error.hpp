// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace uvcot {

enum class ErrorKind {
  invalid_argument,
  parse,          // malformed JSON / config syntax
  missing_field,
  invariant,      // value parsed but violates a type invariant
  dimension_mismatch,
  io,
  config,
  empty_result,
  // bbox grammar
  no_match,
  malformed_number,
  pixel_coordinates,
  // backends
  transport,
  http_status,
  generation_failure,
  score_parse,
  // datagen / trainer
  skipped_query,
  unresolvable_region,
  partial_iteration,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure in the library surfaces as an Error. `field()` carries the
/// JSON-style path of the offending value when one applies
/// (e.g. "winner.score", "context[2].bbox").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string field = {})
      : std::runtime_error(compose(kind, message, field)),
        kind_(kind),
        field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string compose(ErrorKind kind, const std::string& message,
                             const std::string& field) {
    std::string out = to_string(kind);
    if (!field.empty()) out += " at '" + field + "'";
    out += ": " + message;
    return out;
  }

  ErrorKind kind_;
  std::string field_;
};

}  // namespace uvcot
