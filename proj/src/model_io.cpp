#include "agn/model_io.hpp"

#include "agn/error.hpp"
#include "agn/fileio.hpp"

namespace agn {

namespace {

using Json = nlohmann::ordered_json;

Json parse(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

template <class F>
auto guarded(const std::string& what, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

}  // namespace

Json to_json(const ActionVocab& v) {
  Json j{{"actions", v.names()}};
  j["start"] = v.start() ? Json(v.name(*v.start())) : Json(nullptr);
  j["leave"] = v.leave() ? Json(v.name(*v.leave())) : Json(nullptr);
  return j;
}

ActionVocab vocab_from_json(const Json& j) {
  return guarded("vocab", [&] {
    auto opt = [&](const char* k) -> std::optional<std::string> {
      if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
      return j.at(k).get<std::string>();
    };
    return ActionVocab(j.at("actions").get<std::vector<std::string>>(), opt("start"), opt("leave"));
  });
}

Json to_json(const FeatureSpec& s) {
  Json a = Json::array();
  for (const FieldSpec& f : s.fields()) {
    if (f.kind == FieldKind::kCategorical)
      a.push_back(Json{{"name", f.name}, {"kind", "categorical"}, {"dim", f.dim}, {"buckets", f.buckets}});
    else
      a.push_back(Json{{"name", f.name}, {"kind", "numeric"}, {"mean", f.mean}, {"scale", f.scale}});
  }
  return a;
}

FeatureSpec feature_spec_from_json(const Json& j) {
  return guarded("feature spec", [&] {
    std::vector<FieldSpec> fields;
    for (const auto& f : j) {
      const std::string kind = f.at("kind").get<std::string>();
      if (kind == "categorical")
        fields.push_back(FieldSpec::categorical(f.at("name").get<std::string>(), f.at("dim").get<std::size_t>(),
                                                f.at("buckets").get<std::size_t>()));
      else if (kind == "numeric")
        fields.push_back(FieldSpec::numeric(f.at("name").get<std::string>(), f.at("mean").get<double>(),
                                            f.at("scale").get<double>()));
      else
        throw FormatError("unknown field kind '" + kind + "'");
    }
    return FeatureSpec(std::move(fields));
  });
}

Json to_json(const DatasetSchema& s) {
  return Json{{"vocab", to_json(s.vocab)}, {"user", to_json(s.user)}, {"item", to_json(s.item)}};
}

DatasetSchema schema_from_json(const Json& j) {
  return guarded("schema", [&] {
    DatasetSchema s;
    s.vocab = vocab_from_json(j.at("vocab"));
    s.user = feature_spec_from_json(j.at("user"));
    s.item = feature_spec_from_json(j.at("item"));
    return s;
  });
}

void write_schema(const std::string& path, const DatasetSchema& s) {
  write_file_atomic(path, to_json(s).dump(2) + "\n");
}

DatasetSchema read_schema(const std::string& path) { return schema_from_json(parse(path)); }

Json to_json(const ModelConfig& c) {
  return Json{{"vocab", to_json(c.vocab)},
              {"user", to_json(c.user_spec)},
              {"item", to_json(c.item_spec)},
              {"d_model", c.d_model},
              {"n_heads", c.n_heads},
              {"mlp_hidden", c.mlp_hidden},
              {"gate_hidden", c.gate_hidden},
              {"tower_hidden", c.tower_hidden},
              {"history_len", c.history_len},
              {"hse_mode", hse_mode_name(c.hse_mode)},
              {"use_cam", c.use_cam}};
}

ModelConfig model_config_from_json(const Json& j) {
  return guarded("model config", [&] {
    ModelConfig c;
    c.vocab = vocab_from_json(j.at("vocab"));
    c.user_spec = feature_spec_from_json(j.at("user"));
    c.item_spec = feature_spec_from_json(j.at("item"));
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
    c.gate_hidden = j.at("gate_hidden").get<std::size_t>();
    c.tower_hidden = j.at("tower_hidden").get<std::size_t>();
    c.history_len = j.at("history_len").get<std::size_t>();
    c.hse_mode = parse_hse_mode(j.at("hse_mode").get<std::string>());
    c.use_cam = j.at("use_cam").get<bool>();
    c.validate();
    return c;
  });
}

void write_model_config(const std::string& path, const ModelConfig& c) {
  write_file_atomic(path, to_json(c).dump(2) + "\n");
}

ModelConfig read_model_config(const std::string& path) { return model_config_from_json(parse(path)); }

}  // namespace agn
