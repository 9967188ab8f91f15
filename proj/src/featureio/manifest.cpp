#include "serprobe/featureio/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "serprobe/detail/bytes.hpp"

namespace serprobe {

using nlohmann::json;

std::filesystem::path DatasetManifest::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void validate(const DatasetManifest& manifest) {
  if (manifest.label_names.empty()) throw ManifestError("manifest: label_names is empty");
  std::set<std::string> ids;
  for (const auto& e : manifest.entries) {
    if (e.utterance_id.empty()) throw ManifestError("manifest: entry with empty utterance_id");
    if (!ids.insert(e.utterance_id).second) {
      throw ManifestError("manifest: duplicate utterance_id '" + e.utterance_id + "'");
    }
    if (e.label_index < 0 || static_cast<std::size_t>(e.label_index) >= manifest.label_names.size()) {
      throw ManifestError("manifest: entry '" + e.utterance_id + "' has label_index " +
                          std::to_string(e.label_index) + " outside [0, " +
                          std::to_string(manifest.label_names.size()) + ")");
    }
    if (!e.label_name.empty() && e.label_name != manifest.label_names[e.label_index]) {
      throw ManifestError("manifest: entry '" + e.utterance_id + "' label_name '" + e.label_name +
                          "' disagrees with label_index " + std::to_string(e.label_index));
    }
  }
}

namespace {

template <typename T>
T field(const json& obj, const char* key, std::size_t line, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ManifestError("manifest line " + std::to_string(line) + ": field '" + key +
                        "' has the wrong type");
  }
}

std::string required_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ManifestError("manifest line " + std::to_string(line) + ": missing string field '" +
                        key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ManifestError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw ManifestError("manifest line " + std::to_string(lineno) + ": expected a JSON object");
    }
    if (!have_header) {
      auto it = obj.find("label_names");
      if (it == obj.end() || !it->is_array()) {
        throw ManifestError("manifest: first line must carry a \"label_names\" array");
      }
      m.label_names = it->get<std::vector<std::string>>();
      obj.erase("label_names");
      m.header_extra = obj;
      have_header = true;
      continue;
    }
    ManifestEntry e;
    e.utterance_id = required_string(obj, "utterance_id", lineno);
    e.speaker_id = required_string(obj, "speaker_id", lineno);
    e.session_id = field<std::string>(obj, "session_id", lineno, "");
    e.label_index = field<int>(obj, "label_index", lineno, -1);
    e.label_name = field<std::string>(obj, "label_name", lineno, "");
    if (e.label_index < 0 && !e.label_name.empty()) {
      for (std::size_t i = 0; i < m.label_names.size(); ++i) {
        if (m.label_names[i] == e.label_name) e.label_index = static_cast<int>(i);
      }
    }
    e.feature_path = field<std::string>(obj, "feature_path", lineno, "");
    e.aux_feature_path = field<std::string>(obj, "aux_feature_path", lineno, "");
    e.duration_s = field<double>(obj, "duration_s", lineno, 0.0);
    e.audio_path = field<std::string>(obj, "audio_path", lineno, "");
    m.entries.push_back(std::move(e));
  }
  if (!have_header) throw ManifestError("manifest: empty file");
  validate(m);
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::ostringstream out;
  json header = manifest.header_extra.is_object() ? manifest.header_extra : json::object();
  header["label_names"] = manifest.label_names;
  out << header.dump() << '\n';
  for (const auto& e : manifest.entries) {
    json obj;
    obj["utterance_id"] = e.utterance_id;
    obj["speaker_id"] = e.speaker_id;
    obj["session_id"] = e.session_id;
    obj["label_name"] = e.label_name;
    obj["label_index"] = e.label_index;
    obj["feature_path"] = e.feature_path;
    if (e.has_aux()) obj["aux_feature_path"] = e.aux_feature_path;
    obj["duration_s"] = e.duration_s;
    if (!e.audio_path.empty()) obj["audio_path"] = e.audio_path;
    out << obj.dump() << '\n';
  }
  return out.str();
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  const auto text = format_manifest(manifest);
  detail::write_file_bytes(path, std::vector<char>(text.begin(), text.end()));
}

void InMemoryFeatureStore::add(FeatureRecord features, std::optional<FeatureRecord> aux) {
  validate(features);
  features_.push_back(std::make_shared<const FeatureRecord>(std::move(features)));
  if (aux) {
    validate(*aux);
    aux_.push_back(std::make_shared<const FeatureRecord>(std::move(*aux)));
  } else {
    aux_.push_back(nullptr);
  }
}

std::shared_ptr<const FeatureRecord> InMemoryFeatureStore::features(std::size_t index) const {
  return features_.at(index);
}

std::shared_ptr<const FeatureRecord> InMemoryFeatureStore::aux(std::size_t index) const {
  return aux_.at(index);
}

FileFeatureStore::FileFeatureStore(DatasetManifest manifest) : manifest_(std::move(manifest)) {}

std::shared_ptr<const FeatureRecord> FileFeatureStore::load(std::size_t index,
                                                            const std::string& path) const {
  const auto& e = manifest_.entries.at(index);
  auto record = read_feature_file(manifest_.resolve(path));
  auto reconcile = [&](std::string& field, const std::string& expected, const char* name) {
    if (field.empty()) {
      field = expected;
    } else if (field != expected) {
      throw ManifestError(path + ": " + name + " '" + field + "' disagrees with manifest value '" +
                          expected + "'");
    }
  };
  reconcile(record.utterance_id, e.utterance_id, "utterance_id");
  reconcile(record.speaker_id, e.speaker_id, "speaker_id");
  reconcile(record.session_id, e.session_id, "session_id");
  record.label = e.label_index;
  return std::make_shared<const FeatureRecord>(std::move(record));
}

std::shared_ptr<const FeatureRecord> FileFeatureStore::features(std::size_t index) const {
  return load(index, manifest_.entries.at(index).feature_path);
}

std::shared_ptr<const FeatureRecord> FileFeatureStore::aux(std::size_t index) const {
  const auto& e = manifest_.entries.at(index);
  if (!e.has_aux()) return nullptr;
  return load(index, e.aux_feature_path);
}

Corpus open_corpus(const std::filesystem::path& manifest_path) {
  auto manifest = read_manifest(manifest_path);
  for (const auto& e : manifest.entries) {
    if (e.feature_path.empty()) {
      throw ManifestError("manifest: entry '" + e.utterance_id + "' has no feature_path");
    }
    for (const auto* path : {&e.feature_path, &e.aux_feature_path}) {
      if (path->empty()) continue;
      const auto resolved = manifest.resolve(*path);
      if (!std::filesystem::exists(resolved)) {
        throw ManifestError("manifest: feature file not found: " + resolved.string());
      }
      read_feature_header(resolved);
    }
  }
  Corpus corpus;
  corpus.manifest = manifest;
  corpus.store = std::make_shared<FileFeatureStore>(std::move(manifest));
  return corpus;
}

}  // namespace serprobe
