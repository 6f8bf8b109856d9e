#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "photocool/config.hpp"
#include "photocool/model.hpp"

namespace photocool {

inline constexpr std::string_view tool_version = "1.0.0";

/// {"value": v, "unit": unit}. Values are stored unrounded; the serializer
/// emits the shortest round-tripping form.
nlohmann::json quantity(double value, std::string_view unit);

nlohmann::json to_json(const DerivedQuantities& d);

/// Tool version, config digest, params hash, seed (if any), RNG and PSD
/// conventions.
nlohmann::json provenance(const DeviceConfig& cfg, std::optional<std::uint64_t> seed = {});

/// Fixed-width two-column or multi-column text table.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  void print(std::ostream& out) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// %.6g formatting for human-readable tables.
std::string fmt(double v);

}  // namespace photocool
