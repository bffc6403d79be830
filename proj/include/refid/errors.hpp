#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refid {

enum class Errc {
  unknown_symbol,
  object_not_found,
  empty_image,
  dimension_mismatch,
  empty_selection,
  mass_overflow,
  unknown_environment,
  schema_error,
  dangling_env_ref,
  duplicate_id,
  too_few_groups,
  degenerate_cloud,
  io_error,
  non_finite_loss,
  placement_failure,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::unknown_symbol: return "UnknownSymbol";
    case Errc::object_not_found: return "ObjectNotFound";
    case Errc::empty_image: return "EmptyImage";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_selection: return "EmptySelection";
    case Errc::mass_overflow: return "MassOverflow";
    case Errc::unknown_environment: return "UnknownEnvironment";
    case Errc::schema_error: return "SchemaError";
    case Errc::dangling_env_ref: return "DanglingEnvRef";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::too_few_groups: return "TooFewGroups";
    case Errc::degenerate_cloud: return "DegenerateCloud";
    case Errc::io_error: return "IoError";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::placement_failure: return "PlacementFailure";
  }
  return "Error";
}

// Validation errors are caused by bad input; the rest are runtime failures.
inline bool is_validation(Errc c) {
  return c != Errc::non_finite_loss && c != Errc::placement_failure && c != Errc::io_error;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace refid
