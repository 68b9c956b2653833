#include <algorithm>
#include <cstdio>
#include <set>

#include "hdsig/error.hpp"
#include "hdsig/parallel.hpp"
#include "hdsig/pipeline.hpp"
#include "hdsig/simd/kernels.hpp"

#ifndef HDSIG_VERSION
#define HDSIG_VERSION "0.0.0"
#endif

namespace hdsig {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view code_version() noexcept { return HDSIG_VERSION; }

namespace {

// ---------------------------------------------------------------------------
// Config (de)serialization

json preprocess_json(const PreprocessConfig& p) {
  json mods = json::object();
  for (const auto& [kind, m] : p.modalities) {
    mods[std::string(modality_key(kind))] = {
        {"band", {m.band.low_cut_hz, m.band.high_cut_hz}},
        {"reject",
         {{"kind", m.reject.kind == RejectionRule::Kind::Absolute ? "absolute" : "iqr_multiple"},
          {"value", m.reject.value}}}};
  }
  return {{"epoch_len_s", p.epoch_len_s},
          {"overlap_s", p.overlap_s},
          {"prototype_order", p.prototype_order},
          {"modalities", std::move(mods)}};
}

PreprocessConfig preprocess_from_json(const json& j) {
  PreprocessConfig p;
  p.epoch_len_s = j.at("epoch_len_s").get<double>();
  p.overlap_s = j.at("overlap_s").get<double>();
  p.prototype_order = j.at("prototype_order").get<std::size_t>();
  for (const auto& [key, m] : j.at("modalities").items()) {
    ModalityPreprocess mp;
    const auto& band = m.at("band");
    if (!band.is_array() || band.size() != 2) fail(ErrorCode::ParseError, "band must be [low, high]");
    mp.band = {band[0].get<double>(), band[1].get<double>()};
    const auto kind = m.at("reject").at("kind").get<std::string>();
    if (kind == "absolute") mp.reject.kind = RejectionRule::Kind::Absolute;
    else if (kind == "iqr_multiple") mp.reject.kind = RejectionRule::Kind::IqrMultiple;
    else fail(ErrorCode::ParseError, "unknown rejection kind '" + kind + "'");
    mp.reject.value = m.at("reject").at("value").get<double>();
    p.modalities[parse_modality(key)] = mp;
  }
  return p;
}

json features_json(const FeatureConfig& f) {
  json mods = json::array();
  for (auto k : f.modalities) mods.push_back(modality_key(k));
  json per = json::object();
  for (const auto& [kind, m] : f.per_modality) {
    json bands = json::array();
    for (const auto& b : m.bands) bands.push_back({{"name", b.name}, {"low_hz", b.low_hz}, {"high_hz", b.high_hz}});
    per[std::string(modality_key(kind))] = {{"wavelet", wavelet_name(m.wavelet)},
                                            {"welch_segment_s", m.welch_segment_s},
                                            {"welch_overlap", m.welch_overlap},
                                            {"bands", std::move(bands)}};
  }
  return {{"modalities", std::move(mods)}, {"hfd_k_max", f.hfd_k_max}, {"per_modality", std::move(per)}};
}

FeatureConfig features_from_json(const json& j) {
  FeatureConfig f;
  f.modalities.clear();
  f.per_modality.clear();
  for (const auto& m : j.at("modalities")) f.modalities.push_back(parse_modality(m.get<std::string>()));
  f.hfd_k_max = j.at("hfd_k_max").get<std::size_t>();
  for (const auto& [key, m] : j.at("per_modality").items()) {
    ModalityFeatureConfig mc;
    mc.wavelet = parse_wavelet(m.at("wavelet").get<std::string>());
    mc.welch_segment_s = m.at("welch_segment_s").get<double>();
    mc.welch_overlap = m.at("welch_overlap").get<double>();
    for (const auto& b : m.at("bands"))
      mc.bands.push_back({b.at("name").get<std::string>(), b.at("low_hz").get<double>(), b.at("high_hz").get<double>()});
    f.per_modality[parse_modality(key)] = std::move(mc);
  }
  for (auto k : f.modalities) {
    if (!f.per_modality.count(k))
      fail(ErrorCode::ParseError, "no feature settings for " + std::string(modality_name(k)));
  }
  return f;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> feature_names(const std::vector<FeatureDescriptor>& d) {
  std::vector<std::string> out;
  out.reserve(d.size());
  for (const auto& x : d) out.push_back(x.name());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

json to_json(const PipelineConfig& cfg) {
  json models = json::array();
  for (const auto& m : cfg.models) models.push_back(to_json(m));
  return {{"manifest", cfg.manifest.generic_string()},
          {"out", cfg.out_dir.generic_string()},
          {"seed", cfg.seed},
          {"threads", cfg.threads},
          {"preprocess", preprocess_json(cfg.preprocess)},
          {"features", features_json(cfg.features)},
          {"evaluate", {{"k", cfg.k}, {"models", std::move(models)}}},
          {"report",
           {{"importance_model", to_json(cfg.report.importance_model)}, {"p_thresholds", cfg.report.p_thresholds}}}};
}

PipelineConfig config_from_json(const json& user, const fs::path& base_dir) {
  if (!user.is_object()) fail(ErrorCode::ParseError, "config must be a JSON object");
  static const std::set<std::string> known{"manifest", "out", "seed", "threads", "preprocess",
                                           "features", "evaluate", "report"};
  for (const auto& [key, value] : user.items())
    if (!known.count(key)) fail(ErrorCode::ParseError, "unknown config key '" + key + "'");

  json j = to_json(PipelineConfig::defaults());
  j.merge_patch(user);
  try {
    PipelineConfig cfg;
    cfg.manifest = j.at("manifest").get<std::string>();
    cfg.out_dir = j.at("out").get<std::string>();
    if (!base_dir.empty()) {
      if (!cfg.manifest.empty() && cfg.manifest.is_relative()) cfg.manifest = base_dir / cfg.manifest;
      if (cfg.out_dir.is_relative()) cfg.out_dir = base_dir / cfg.out_dir;
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.threads = j.at("threads").get<std::size_t>();
    cfg.preprocess = preprocess_from_json(j.at("preprocess"));
    cfg.features = features_from_json(j.at("features"));
    cfg.k = j.at("evaluate").at("k").get<std::size_t>();
    cfg.models.clear();
    for (const auto& m : j.at("evaluate").at("models")) cfg.models.push_back(model_spec_from_json(m));
    cfg.report.importance_model = model_spec_from_json(j.at("report").at("importance_model"));
    cfg.report.p_thresholds = j.at("report").at("p_thresholds").get<std::vector<double>>();
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("invalid config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::MissingFile, "missing config " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, path.parent_path());
}

std::string config_hash(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(cfg).dump())));
  return buf;
}

void write_run_metadata(const PipelineConfig& cfg, std::string_view command) {
  fs::create_directories(cfg.out_dir);
  json run{{"layout_version", 1},
           {"command", command},
           {"code_version", code_version()},
           {"config_hash", config_hash(cfg)},
           {"seed", cfg.seed},
           {"simd", simd::level_name(simd::active_level())}};
  write_text_file(cfg.out_dir / "run_manifest.json", run.dump(2) + "\n");
  write_text_file(cfg.out_dir / "config.effective.json", to_json(cfg).dump(2) + "\n");
}

fs::path epoch_file(const fs::path& out_dir, const std::string& patient_id, ModalityKind kind) {
  return out_dir / "epochs" / (safe_file_stem(patient_id) + "_" + std::string(modality_key(kind)) + ".npy");
}

// ---------------------------------------------------------------------------

PreprocessSummary cmd_preprocess(const PipelineConfig& cfg) {
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  write_run_metadata(cfg, "preprocess");
  fs::create_directories(cfg.out_dir / "epochs");

  const auto& mods = cfg.features.modalities;
  const std::size_t tasks = manifest.entries.size() * mods.size();
  std::vector<std::pair<std::size_t, std::size_t>> counts(tasks);
  parallel_for(tasks, cfg.threads, [&](std::size_t t) {
    const ManifestEntry& e = manifest.entries[t / mods.size()];
    const ModalityKind kind = mods[t % mods.size()];
    try {
      const fs::path& path = e.paths.at(kind);
      const Recording rec = load_recording(path, Modality::of(kind), format_from_path(path), e.patient_id);
      const EpochSet es = preprocess_recording(rec, cfg.preprocess);
      write_epoch_set(es, epoch_file(cfg.out_dir, e.patient_id, kind));
      const double step = cfg.preprocess.epoch_len_s - cfg.preprocess.overlap_s;
      const auto total = static_cast<std::size_t>(
          std::floor((rec.duration_s - cfg.preprocess.epoch_len_s) / step + 1e-9) + 1);
      counts[t] = {total, es.n_epochs};
    } catch (const Error& err) {
      throw Error(err.code(), "patient '" + e.patient_id + "', " + std::string(modality_name(kind)) + ": " +
                                  err.what());
    }
  });

  PreprocessSummary s;
  s.patients = manifest.entries.size();
  for (std::size_t t = 0; t < tasks; ++t) {
    const ModalityKind kind = mods[t % mods.size()];
    s.epochs_total[kind] += counts[t].first;
    s.epochs_kept[kind] += counts[t].second;
  }
  return s;
}

FeatureMatrix cmd_extract(const PipelineConfig& cfg) {
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  for (const auto& e : manifest.entries)
    for (auto kind : cfg.features.modalities)
      if (!fs::exists(epoch_file(cfg.out_dir, e.patient_id, kind)))
        fail(ErrorCode::MissingPreprocessOutput, "no preprocessed " + std::string(modality_name(kind)) +
                                                     " epochs for patient '" + e.patient_id + "' in " +
                                                     (cfg.out_dir / "epochs").string());
  write_run_metadata(cfg, "extract");

  // One patient at a time keeps memory bounded by a single patient's epochs.
  FeatureMatrix all;
  std::vector<double> values;
  for (const auto& e : manifest.entries) {
    PatientEpochs pe{e.patient_id, {}};
    for (auto kind : cfg.features.modalities) pe.sets[kind] = read_epoch_set(epoch_file(cfg.out_dir, e.patient_id, kind));
    DatasetManifest one;
    one.label_policy = manifest.label_policy;
    one.entries = {e};
    FeatureMatrix fm = extract_feature_matrix({pe}, one, cfg.features, cfg.threads);
    if (all.descriptors.empty()) all.descriptors = fm.descriptors;
    else if (all.descriptors != fm.descriptors)
      fail(ErrorCode::ShapeMismatch, "patient '" + e.patient_id + "' has a different channel layout");
    values.insert(values.end(), fm.values.storage().begin(), fm.values.storage().end());
    all.labels.insert(all.labels.end(), fm.labels.begin(), fm.labels.end());
    all.groups.insert(all.groups.end(), fm.groups.begin(), fm.groups.end());
  }
  all.values = Matrix(all.labels.size(), all.descriptors.size(), std::move(values));
  write_feature_matrix(all, cfg.out_dir / "features");
  return all;
}

std::vector<EvalReport> cmd_evaluate(const PipelineConfig& cfg, const EvaluateOptions& opt) {
  const FeatureMatrix fm = read_feature_matrix(cfg.out_dir / "features");
  std::vector<ModelSpec> specs;
  if (opt.all) {
    for (auto k : {ModelKind::ExtraTrees, ModelKind::RandomForest, ModelKind::LogReg, ModelKind::LDA, ModelKind::QDA}) {
      auto it = std::find_if(cfg.models.begin(), cfg.models.end(), [&](const ModelSpec& s) { return s.kind == k; });
      specs.push_back(it != cfg.models.end() ? *it : ModelSpec::defaults(k));
    }
  } else if (!opt.models.empty()) {
    for (const auto& name : opt.models) {
      const ModelKind k = parse_model_kind(name);
      auto it = std::find_if(cfg.models.begin(), cfg.models.end(), [&](const ModelSpec& s) { return s.kind == k; });
      specs.push_back(it != cfg.models.end() ? *it : ModelSpec::defaults(k));
    }
  } else {
    specs = cfg.models;
  }
  if (specs.empty()) fail(ErrorCode::UsageError, "no models to evaluate");
  write_run_metadata(cfg, "evaluate");

  std::vector<EvalReport> reports;
  for (const auto& spec : specs) {
    reports.push_back(cross_validate(spec, fm.values, fm.labels, fm.groups, cfg.k, cfg.seed, cfg.threads));
    write_eval_report(reports.back(), cfg.out_dir / "eval", std::string(model_key(spec.kind)));
  }
  return reports;
}

ReportSummary cmd_report(const PipelineConfig& cfg) {
  const FeatureMatrix fm = read_feature_matrix(cfg.out_dir / "features");
  write_run_metadata(cfg, "report");
  const fs::path dir = cfg.out_dir / "report";
  fs::create_directories(dir);
  const auto names = feature_names(fm.descriptors);

  ReportSummary s;
  s.dropped_columns = rank_deficient_columns(fm.values, true);
  for (std::size_t j = 0; j < fm.cols(); ++j)
    if (!std::binary_search(s.dropped_columns.begin(), s.dropped_columns.end(), j)) s.kept_columns.push_back(j);
  std::string dropped = "index,name\n";
  for (auto j : s.dropped_columns) dropped += std::to_string(j) + "," + names[j] + "\n";
  write_text_file(dir / "dropped_columns.csv", dropped);

  const std::vector<double> y(fm.labels.begin(), fm.labels.end());
  s.ols = ols_fit(fm.values.select_cols(s.kept_columns), y, true);
  std::vector<std::string> kept_names;
  for (auto j : s.kept_columns) kept_names.push_back(names[j]);
  write_text_file(dir / "significance.csv", significance_csv(s.ols, kept_names, s.kept_columns));
  s.buckets = p_value_buckets(s.ols, cfg.report.p_thresholds);
  write_text_file(dir / "buckets.csv", buckets_csv(s.buckets));

  json summary{{"n", s.ols.n},
               {"p", s.ols.n_features},
               {"r_squared", s.ols.r_squared},
               {"f_statistic", s.ols.f_statistic},
               {"prob_f", s.ols.prob_f},
               {"log_likelihood", s.ols.log_likelihood},
               {"degenerate", s.ols.degenerate},
               {"dropped_columns", s.dropped_columns.size()}};
  write_text_file(dir / "ols_summary.json", summary.dump(2) + "\n");

  const TrainedModel forest =
      fit_model(cfg.report.importance_model, fm.values, fm.labels, cfg.seed, cfg.threads);
  s.importances = feature_importances(forest);
  const double n_trees = static_cast<double>(std::get<ForestModel>(forest.impl).trees.size());
  std::string imp = "index,name,importance,tree_sd,se\n";
  for (std::size_t j = 0; j < fm.cols(); ++j) {
    imp += std::to_string(j) + "," + names[j] + "," + fmt(s.importances.mean[j]) + "," +
           fmt(s.importances.tree_sd[j]) + "," + fmt(s.importances.tree_sd[j] / std::sqrt(n_trees)) + "\n";
  }
  write_text_file(dir / "importances.csv", imp);
  for (auto basis : kAllBases) {
    s.groups.push_back(grouped_importance(s.importances.mean, fm.descriptors, basis));
    write_text_file(dir / ("importance_by_" + std::string(basis_key(basis)) + ".csv"), importance_csv(s.groups.back()));
  }
  return s;
}

}  // namespace hdsig
