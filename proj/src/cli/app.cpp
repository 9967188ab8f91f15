#include "serprobe/cli/app.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "serprobe/dsp/spectrogram.hpp"
#include "serprobe/eval/report.hpp"
#include "serprobe/eval/synthetic.hpp"

namespace serprobe::cli {

using nlohmann::json;

namespace {

constexpr std::size_t kIemocapMaxFrames = 400;  // 8 s at 20 ms
constexpr std::size_t kRavdessMaxFrames = 250;  // 5 s at 20 ms
constexpr double kTrimSeconds = 15.0;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) {
      throw ValidationError((where.empty() ? key : where + "." + key) + ": unknown field");
    }
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  const std::string field = where.empty() ? key : where + "." + key;
  try {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ValidationError(field + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ValidationError(field + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ValidationError(field + ": expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ValidationError(field + ": expected a string");
    }
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(field + ": wrong type");
  }
}

template <typename Fn>
auto field_context(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(field + ": " + e.what());
  }
}

DatasetKind parse_dataset(const std::string& s) {
  if (s == "iemocap-like") return DatasetKind::iemocap_like;
  if (s == "ravdess-like") return DatasetKind::ravdess_like;
  if (s == "custom") return DatasetKind::custom;
  throw ValidationError("must be one of iemocap-like, ravdess-like, custom; got '" + s + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ValidationError("--seed-list: '" + item + "' is not a non-negative integer");
    }
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw ValidationError("--seed-list: no seeds given");
  return seeds;
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "", {"dataset", "manifest", "label", "model", "normalization", "protocol",
                     "max_frames", "train", "seeds", "jobs", "output_dir"});
  ExperimentConfig c;
  if (auto d = get_opt<std::string>(j, "dataset", "")) {
    c.dataset = field_context("dataset", [&] { return parse_dataset(*d); });
  }
  auto manifest = get_opt<std::string>(j, "manifest", "");
  if (!manifest) throw ValidationError("manifest: required field missing");
  c.manifest = resolve(base_dir, *manifest);
  c.output_dir = resolve(base_dir, get_opt<std::string>(j, "output_dir", "").value_or("out"));

  auto& spec = c.spec;
  spec.train.log_progress = true;
  spec.label = get_opt<std::string>(j, "label", "").value_or("experiment");
  switch (c.dataset) {
    case DatasetKind::iemocap_like:
      spec.protocol.kind = eval::Protocol::loso_session;
      spec.train.max_frames = kIemocapMaxFrames;
      break;
    case DatasetKind::ravdess_like:
      spec.protocol.kind = eval::Protocol::fixed_actor_split;
      spec.train.max_frames = kRavdessMaxFrames;
      break;
    case DatasetKind::custom:
      spec.train.max_frames = kIemocapMaxFrames;
      break;
  }

  if (auto it = j.find("model"); it != j.end()) {
    check_keys(*it, "model", {"variant", "hidden", "dropout"});
    if (auto v = get_opt<std::string>(*it, "variant", "model")) {
      spec.model.variant = field_context("model.variant", [&] { return nn::parse_variant(*v); });
    }
    if (auto h = get_opt<int>(*it, "hidden", "model")) spec.model.hidden = *h;
    if (auto p = get_opt<double>(*it, "dropout", "model")) spec.model.dropout = *p;
    if (spec.model.hidden < 1) throw ValidationError("model.hidden: must be >= 1");
    if (!(spec.model.dropout >= 0.0 && spec.model.dropout < 1.0)) {
      throw ValidationError("model.dropout: must be in [0, 1)");
    }
  }
  if (auto n = get_opt<std::string>(j, "normalization", "")) {
    spec.norm = field_context("normalization", [&] { return parse_norm_mode(*n); });
  }
  if (auto it = j.find("protocol"); it != j.end()) {
    if (it->is_string()) {
      spec.protocol.kind = field_context("protocol", [&] { return eval::parse_protocol(it->get<std::string>()); });
    } else {
      check_keys(*it, "protocol", {"name", "folds", "seed"});
      if (auto name = get_opt<std::string>(*it, "name", "protocol")) {
        spec.protocol.kind = field_context("protocol.name", [&] { return eval::parse_protocol(*name); });
      }
      if (auto k = get_opt<int>(*it, "folds", "protocol")) spec.protocol.folds = *k;
      if (auto s = get_opt<std::uint64_t>(*it, "seed", "protocol")) spec.protocol.seed = *s;
    }
  }
  if (auto m = get_opt<long long>(j, "max_frames", "")) {
    if (*m < 1) throw ValidationError("max_frames: must be >= 1");
    spec.train.max_frames = static_cast<std::size_t>(*m);
  }
  if (auto it = j.find("train"); it != j.end()) {
    check_keys(*it, "train", {"batch_size", "learning_rate", "beta1", "beta2", "epsilon", "patience",
                              "max_epochs", "log_progress"});
    auto& t = spec.train;
    if (auto v = get_opt<long long>(*it, "batch_size", "train")) {
      if (*v < 1) throw ValidationError("train.batch_size: must be >= 1");
      t.batch_size = static_cast<std::size_t>(*v);
    }
    if (auto v = get_opt<double>(*it, "learning_rate", "train")) t.adam.learning_rate = *v;
    if (auto v = get_opt<double>(*it, "beta1", "train")) t.adam.beta1 = *v;
    if (auto v = get_opt<double>(*it, "beta2", "train")) t.adam.beta2 = *v;
    if (auto v = get_opt<double>(*it, "epsilon", "train")) t.adam.epsilon = *v;
    if (auto v = get_opt<int>(*it, "patience", "train")) t.patience = *v;
    if (auto v = get_opt<int>(*it, "max_epochs", "train")) t.max_epochs = *v;
    if (auto v = get_opt<bool>(*it, "log_progress", "train")) t.log_progress = *v;
  }
  if (auto it = j.find("seeds"); it != j.end()) {
    if (!it->is_array() || it->empty()) throw ValidationError("seeds: expected a non-empty array");
    spec.seeds.clear();
    for (const auto& s : *it) {
      if (!s.is_number_unsigned()) throw ValidationError("seeds: entries must be non-negative integers");
      spec.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (auto v = get_opt<int>(j, "jobs", "")) {
    if (*v < 1) throw ValidationError("jobs: must be >= 1");
    spec.jobs = *v;
  }
  optim::validate(spec.train);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("--config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError("--config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

namespace {

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string audio_dir;
  std::string manifest;
  std::string out;
};

int cmd_extract_spectrogram(const ExtractArgs& args, std::ostream& out, std::ostream& err) {
  DatasetManifest manifest;
  try {
    manifest = read_manifest(args.manifest);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  }
  const std::filesystem::path out_dir(args.out);
  DatasetManifest result = manifest;
  result.base_dir = out_dir;
  result.entries.clear();
  std::vector<std::string> failures;
  for (const auto& e : manifest.entries) {
    std::filesystem::path audio;
    if (!e.audio_path.empty()) {
      audio = manifest.resolve(e.audio_path);
    } else if (!args.audio_dir.empty()) {
      audio = std::filesystem::path(args.audio_dir) / (e.utterance_id + ".wav");
    } else {
      failures.push_back(e.utterance_id + ": no audio_path in manifest and no --audio-dir");
      continue;
    }
    try {
      const Waveform wave = trim_waveform(read_wav(audio), kTrimSeconds);
      const auto spec = magnitude_spectrogram(wave);
      if (spec.rows() < 2) throw AudioError("audio too short for a 20 ms frame");
      const auto aligned = downsample_avg2(spec);
      FeatureRecord r = make_record(e.utterance_id, e.speaker_id, e.session_id, e.label_index, 1,
                                    static_cast<std::uint32_t>(aligned.rows()),
                                    static_cast<std::uint32_t>(aligned.cols()));
      r.layer(0) = aligned;
      ManifestEntry copy = e;
      copy.feature_path = "features/" + e.utterance_id + ".serf";
      copy.duration_s = wave.duration_s();
      if (!copy.audio_path.empty()) copy.audio_path = std::filesystem::absolute(audio).lexically_normal().string();
      write_feature_file(r, out_dir / copy.feature_path);
      result.entries.push_back(std::move(copy));
    } catch (const Error& ex) {
      failures.push_back(e.utterance_id + ": " + ex.what());
    }
  }
  write_manifest(result, out_dir / "manifest.jsonl");
  out << "extracted " << result.entries.size() << " of " << manifest.entries.size()
      << " utterances into " << out_dir.string() << '\n';
  for (const auto& f : failures) err << "failed: " << f << '\n';
  return failures.empty() ? kSuccess : kRuntimeError;
}

// ---------------------------------------------------------------------------

struct TrainEvalArgs {
  std::string config;
  std::string out;
  int jobs = 1;
  std::string seed_list;
  std::string norm;
  std::string model;
  std::string protocol;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  int patience = 4;
  double dropout = 0.2;
  int hidden = 128;
  std::size_t max_frames = 0;
  int max_epochs = 100;
  bool quiet = false;
};

int cmd_train_eval(const TrainEvalArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  Corpus corpus;
  try {
    cfg = load_experiment_config(a.config);
    auto& spec = cfg.spec;
    auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
    if (given("--out")) cfg.output_dir = a.out;
    if (given("--jobs")) {
      if (a.jobs < 1) throw ValidationError("--jobs: must be >= 1");
      spec.jobs = a.jobs;
    }
    if (given("--seed-list")) spec.seeds = parse_seed_list(a.seed_list);
    if (given("--norm")) spec.norm = parse_norm_mode(a.norm);
    if (given("--model")) spec.model.variant = nn::parse_variant(a.model);
    if (given("--protocol")) spec.protocol.kind = eval::parse_protocol(a.protocol);
    if (given("--batch-size")) spec.train.batch_size = a.batch_size;
    if (given("--lr")) spec.train.adam.learning_rate = a.learning_rate;
    if (given("--patience")) spec.train.patience = a.patience;
    if (given("--dropout")) spec.model.dropout = a.dropout;
    if (given("--hidden")) spec.model.hidden = a.hidden;
    if (given("--max-frames")) spec.train.max_frames = a.max_frames;
    if (given("--max-epochs")) spec.train.max_epochs = a.max_epochs;
    if (a.quiet) spec.train.log_progress = false;
    optim::validate(spec.train);
    corpus = open_corpus(cfg.manifest);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const CLI::Error& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const Error& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidationError;
  }
  try {
    const auto report = eval::run_experiment(corpus, cfg.spec);
    eval::write_artifacts(report, cfg.output_dir);
    const auto summary = eval::summarize(eval::to_json(report));
    out << eval::format_results_table(std::span<const eval::ReportSummary>(&summary, 1));
    out << "artifacts written to " << cfg.output_dir.string() << '\n';
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& run_dirs, std::ostream& out, std::ostream& err) {
  std::vector<eval::ReportSummary> rows;
  try {
    for (const auto& dir : run_dirs) rows.push_back(eval::summarize(eval::read_report(dir)));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  out << eval::format_results_table(rows) << '\n';
  for (const auto& r : rows) out << eval::format_weight_summary(r);
  return kSuccess;
}

int cmd_inspect(const std::vector<std::string>& files, std::ostream& out, std::ostream& err) {
  int status = kSuccess;
  for (const auto& f : files) {
    try {
      const auto h = read_feature_header(f);
      out << f << '\n'
          << "  version: " << h.version << '\n'
          << "  utterance_id: " << h.utterance_id << '\n'
          << "  speaker_id: " << h.speaker_id << '\n'
          << "  session_id: " << h.session_id << '\n'
          << "  label_index: " << h.label << '\n'
          << "  layers: " << h.num_layers << '\n'
          << "  frames: " << h.num_frames << '\n'
          << "  dim: " << h.dim << '\n'
          << "  payload_bytes: " << h.payload_bytes << '\n';
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      status = kRuntimeError;
    }
  }
  return status;
}

int cmd_synth(const eval::SyntheticCorpusSpec& spec, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  try {
    const auto path = eval::write_synthetic_corpus(spec, out_dir);
    out << "wrote " << spec.num_speakers * spec.utterances_per_speaker << " utterances, manifest "
        << path.string() << '\n';
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speech emotion recognition over layer-stacked speech representations"};
  app.name("serprobe");
  app.require_subcommand(1);

  ExtractArgs extract;
  auto* ex = app.add_subcommand("extract-spectrogram",
                                "Magnitude spectrograms (25 ms Hann, 10 ms hop, 2:1 averaged onto "
                                "20 ms) from WAV audio trimmed to 15 s");
  ex->add_option("--audio-dir", extract.audio_dir, "Directory holding <utterance_id>.wav files");
  ex->add_option("--manifest", extract.manifest, "Input JSON-lines manifest")->required();
  ex->add_option("--out", extract.out, "Output directory for SERF files and manifest.jsonl")->required();

  TrainEvalArgs te;
  auto* tr = app.add_subcommand("train-eval", "Cross-validated training and evaluation from a config file");
  tr->add_option("--config", te.config, "Experiment configuration (JSON)")->required();
  tr->add_option("--out", te.out, "Output directory (overrides output_dir)");
  tr->add_option("--jobs", te.jobs, "Parallel fold x seed runs")->capture_default_str();
  tr->add_option("--seed-list", te.seed_list, "Comma-separated training seeds")->default_str("1,2,3,4,5");
  tr->add_option("--norm", te.norm, "Normalization")->check(CLI::IsMember({"speaker", "global"}))->default_str("speaker");
  tr->add_option("--model", te.model, "Downstream model")->check(CLI::IsMember({"dense", "lstm", "fusion"}))->default_str("dense");
  tr->add_option("--protocol", te.protocol, "Evaluation protocol")
      ->check(CLI::IsMember({"loso", "actor-split", "random-kfold"}))
      ->default_str("loso (iemocap-like), actor-split (ravdess-like)");
  tr->add_option("--batch-size", te.batch_size, "Utterances per batch")->capture_default_str();
  tr->add_option("--lr", te.learning_rate, "Adam learning rate")->capture_default_str();
  tr->add_option("--patience", te.patience, "Early-stopping patience in epochs (validation loss)")->capture_default_str();
  tr->add_option("--dropout", te.dropout, "Dropout probability after each hidden layer")->capture_default_str();
  tr->add_option("--hidden", te.hidden, "Hidden units per layer")->capture_default_str();
  tr->add_option("--max-frames", te.max_frames, "Frames kept per utterance")->default_str("400 (iemocap-like), 250 (ravdess-like)");
  tr->add_option("--max-epochs", te.max_epochs, "Epoch cap")->capture_default_str();
  tr->add_flag("--quiet", te.quiet, "Suppress per-epoch progress lines");

  std::vector<std::string> run_dirs;
  auto* rp = app.add_subcommand("report", "Results table and layer-weight summary for run directories");
  rp->add_option("run_dirs", run_dirs, "Run directories (or report.json files)")->required();

  std::vector<std::string> files;
  auto* in = app.add_subcommand("inspect-features", "Print SERF header fields");
  in->add_option("files", files, "SERF files")->required();

  eval::SyntheticCorpusSpec synth;
  std::string synth_out;
  auto* sy = app.add_subcommand("synth-corpus", "Write a planted-signal synthetic corpus");
  sy->add_option("--out", synth_out, "Output directory")->required();
  sy->add_option("--layers", synth.num_layers, "Layers per record")->capture_default_str();
  sy->add_option("--dim", synth.dim, "Feature dimension")->capture_default_str();
  sy->add_option("--classes", synth.num_classes, "Number of classes")->capture_default_str();
  sy->add_option("--planted-layer", synth.planted_layer, "Layer carrying the class signal")->capture_default_str();
  sy->add_option("--signal", synth.signal, "Class signal amplitude")->capture_default_str();
  sy->add_option("--speakers", synth.num_speakers, "Speakers (Actor_01..)")->capture_default_str();
  sy->add_option("--sessions", synth.num_sessions, "Sessions (Ses01..)")->capture_default_str();
  sy->add_option("--utterances", synth.utterances_per_speaker, "Utterances per speaker")->capture_default_str();
  sy->add_option("--aux-dim", synth.aux_dim, "Aux stream dimension (0 = none)")->capture_default_str();
  sy->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kValidationError;
  }

  if (*ex) return cmd_extract_spectrogram(extract, out, err);
  if (*tr) return cmd_train_eval(te, *tr, out, err);
  if (*rp) return cmd_report(run_dirs, out, err);
  if (*in) return cmd_inspect(files, out, err);
  if (*sy) return cmd_synth(synth, synth_out, out, err);
  return kValidationError;
}

}  // namespace serprobe::cli
