#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "agn/ndarray.hpp"
#include "agn/param_store.hpp"
#include "agn/tape.hpp"

namespace agn {

enum class FieldKind { kCategorical, kNumeric };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  std::size_t dim = 1;      // embedding width; 1 for numeric
  std::size_t buckets = 1;  // hash buckets; categorical only
  double mean = 0.0;        // numeric standardization
  double scale = 1.0;

  static FieldSpec categorical(std::string name, std::size_t dim, std::size_t buckets) {
    return {std::move(name), FieldKind::kCategorical, dim, buckets, 0.0, 1.0};
  }
  static FieldSpec numeric(std::string name, double mean = 0.0, double scale = 1.0) {
    return {std::move(name), FieldKind::kNumeric, 1, 1, mean, scale};
  }
};

using FieldValue = std::variant<std::string, double>;
using FieldValues = std::map<std::string, FieldValue>;

class FeatureSpec {
 public:
  FeatureSpec() = default;
  explicit FeatureSpec(std::vector<FieldSpec> fields);

  const std::vector<FieldSpec>& fields() const noexcept { return fields_; }
  std::size_t total_dim() const noexcept { return total_dim_; }
  const FieldSpec* find(const std::string& name) const;
  std::uint64_t hash() const;

 private:
  std::vector<FieldSpec> fields_;
  std::size_t total_dim_ = 0;
};

// Stable bucket for a categorical value.
std::size_t feature_bucket(const FieldSpec& field, const std::string& value);

// Registers one embedding table per categorical field under "<prefix>.<field>".
void register_feature_params(ParamStore& store, const FeatureSpec& spec, const std::string& prefix);

// Encodes rows into an [N, total_dim] matrix. Categorical -> embedding row of the
// hashed id; numeric -> (value - mean) / scale; missing -> zeros. Unknown field
// names and kind mismatches throw ValueError.
Var encode_features(Tape& tape, const ParamStore& store, const FeatureSpec& spec,
                    const std::string& prefix, std::span<const FieldValues* const> rows);

// Single-row convenience returning the dense vector.
NDArray encode_features(const FieldValues& values, const FeatureSpec& spec,
                        const std::string& prefix, const ParamStore& store);

}  // namespace agn
