#pragma once

#include <string>

#include <json.hpp>

#include "agn/domain.hpp"
#include "agn/features.hpp"
#include "agn/model.hpp"

namespace agn {

nlohmann::ordered_json to_json(const ActionVocab& v);
ActionVocab vocab_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json to_json(const FeatureSpec& s);
FeatureSpec feature_spec_from_json(const nlohmann::ordered_json& j);

// Vocabulary plus user and item feature specs; written next to every dataset.
struct DatasetSchema {
  ActionVocab vocab = ActionVocab::short_video();
  FeatureSpec user;
  FeatureSpec item;
};

nlohmann::ordered_json to_json(const DatasetSchema& s);
DatasetSchema schema_from_json(const nlohmann::ordered_json& j);
void write_schema(const std::string& path, const DatasetSchema& s);
DatasetSchema read_schema(const std::string& path);

nlohmann::ordered_json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);
void write_model_config(const std::string& path, const ModelConfig& c);
ModelConfig read_model_config(const std::string& path);

}  // namespace agn
