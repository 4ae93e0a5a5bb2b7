#include "agn/features.hpp"

#include <set>

#include "agn/error.hpp"
#include "agn/hash.hpp"
#include "agn/ops.hpp"

namespace agn {

FeatureSpec::FeatureSpec(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  std::set<std::string> names;
  for (const auto& f : fields_) {
    if (f.name.empty()) throw ValueError("feature field with empty name");
    if (!names.insert(f.name).second) throw ValueError("duplicate feature field " + f.name);
    if (f.kind == FieldKind::kCategorical && (f.dim == 0 || f.buckets == 0))
      throw ValueError("feature field " + f.name + " needs dim and buckets >= 1");
    if (f.kind == FieldKind::kNumeric && (f.dim != 1 || !(f.scale > 0.0)))
      throw ValueError("numeric field " + f.name + " needs dim 1 and positive scale");
    total_dim_ += f.dim;
  }
}

const FieldSpec* FeatureSpec::find(const std::string& name) const {
  for (const auto& f : fields_)
    if (f.name == name) return &f;
  return nullptr;
}

std::uint64_t FeatureSpec::hash() const {
  std::uint64_t h = fnv1a64("features");
  for (const auto& f : fields_) {
    h = fnv1a64(f.name, h);
    h = fnv1a64(f.kind == FieldKind::kCategorical ? "c" : "n", h);
    h = fnv1a64(std::to_string(f.dim) + "/" + std::to_string(f.buckets), h);
  }
  return h;
}

std::size_t feature_bucket(const FieldSpec& field, const std::string& value) {
  return static_cast<std::size_t>(fnv1a64(field.name + "=" + value) % field.buckets);
}

void register_feature_params(ParamStore& store, const FeatureSpec& spec, const std::string& prefix) {
  for (const auto& f : spec.fields())
    if (f.kind == FieldKind::kCategorical)
      store.add(prefix + "." + f.name, {f.buckets, f.dim}, Init::uniform(0.1));
}

Var encode_features(Tape& tape, const ParamStore& store, const FeatureSpec& spec,
                    const std::string& prefix, std::span<const FieldValues* const> rows) {
  if (rows.empty()) throw ValueError("encode_features: no rows");
  if (spec.fields().empty()) throw ValueError("encode_features: empty feature spec");
  const std::size_t n = rows.size();
  for (const FieldValues* r : rows)
    for (const auto& [name, _] : *r)
      if (!spec.find(name)) throw ValueError("unknown feature field " + name);

  std::vector<Var> parts;
  for (const auto& f : spec.fields()) {
    if (f.kind == FieldKind::kCategorical) {
      std::vector<std::size_t> idx(n, 0);
      NDArray present({n, 1}, 0.0);
      bool all_present = true;
      for (std::size_t i = 0; i < n; ++i) {
        auto it = rows[i]->find(f.name);
        if (it == rows[i]->end()) {
          all_present = false;
          continue;
        }
        const auto* s = std::get_if<std::string>(&it->second);
        if (!s) throw ValueError("categorical field " + f.name + " given a number");
        idx[i] = feature_bucket(f, *s);
        present[i] = 1.0;
      }
      Var emb = ops::embedding(tape.param(store, prefix + "." + f.name), idx);
      parts.push_back(all_present ? emb : ops::mul(emb, tape.constant(std::move(present))));
    } else {
      NDArray col({n, 1}, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        auto it = rows[i]->find(f.name);
        if (it == rows[i]->end()) continue;
        const auto* v = std::get_if<double>(&it->second);
        if (!v) throw ValueError("numeric field " + f.name + " given a string");
        col[i] = (*v - f.mean) / f.scale;
      }
      parts.push_back(tape.constant(std::move(col)));
    }
  }
  return parts.size() == 1 ? parts[0] : ops::concat(parts);
}

NDArray encode_features(const FieldValues& values, const FeatureSpec& spec,
                        const std::string& prefix, const ParamStore& store) {
  Tape tape(false);
  const FieldValues* row = &values;
  Var v = encode_features(tape, store, spec, prefix, std::span<const FieldValues* const>(&row, 1));
  return v.value().reshaped({spec.total_dim()});
}

}  // namespace agn
