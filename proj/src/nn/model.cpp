#include "serprobe/nn/model.hpp"

namespace serprobe::nn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::dense: return "dense";
    case Variant::lstm: return "lstm";
    case Variant::fusion: return "fusion";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  if (text == "dense") return Variant::dense;
  if (text == "lstm") return Variant::lstm;
  if (text == "fusion") return Variant::fusion;
  throw ValidationError("model variant must be one of dense, lstm, fusion; got '" + text + "'");
}

void validate(const ModelConfig& c) {
  if (c.hidden < 1) throw ValidationError("model.hidden must be >= 1");
  if (c.num_classes < 2) throw ValidationError("model.num_classes must be >= 2");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ValidationError("model.dropout must be in [0, 1)");
  if (c.num_layers < 1) throw ValidationError("model.num_layers must be >= 1");
  if (c.input_dim < 1) throw ValidationError("model.input_dim must be >= 1");
  if (c.variant == Variant::fusion && c.aux_dim < 1) {
    throw ValidationError("model.aux_dim must be >= 1 for the fusion variant");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["variant"] = to_string(c.variant);
  j["hidden"] = c.hidden;
  j["num_classes"] = c.num_classes;
  j["dropout"] = c.dropout;
  j["num_layers"] = c.num_layers;
  j["input_dim"] = c.input_dim;
  j["aux_dim"] = c.aux_dim;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.hidden = j.at("hidden").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.num_layers = j.at("num_layers").get<int>();
  c.input_dim = j.at("input_dim").get<int>();
  c.aux_dim = j.value("aux_dim", 0);
  validate(c);
  return c;
}

}  // namespace serprobe::nn
