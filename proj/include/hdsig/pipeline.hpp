#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hdsig/eval.hpp"
#include "hdsig/features.hpp"
#include "hdsig/models.hpp"
#include "hdsig/preprocess.hpp"
#include "hdsig/stats.hpp"

namespace hdsig {

std::string_view code_version() noexcept;

struct ReportConfig {
  ModelSpec importance_model = ModelSpec::defaults(ModelKind::ExtraTrees);
  std::vector<double> p_thresholds{0.0, 0.001, 0.01, 0.05};
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "hdsig_out";
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  PreprocessConfig preprocess = PreprocessConfig::defaults();
  FeatureConfig features = FeatureConfig::defaults();
  std::size_t k = 10;
  std::vector<ModelSpec> models{ModelSpec::defaults(ModelKind::ExtraTrees)};
  ReportConfig report;

  static PipelineConfig defaults() { return {}; }
};

/// Paths are written as given; seed and threads included.
nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; arrays replace the default wholesale.
/// Relative manifest/out paths are resolved against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

/// run_manifest.json and config.effective.json in cfg.out_dir.
void write_run_metadata(const PipelineConfig& cfg, std::string_view command);

std::filesystem::path epoch_file(const std::filesystem::path& out_dir, const std::string& patient_id,
                                 ModalityKind kind);

struct PreprocessSummary {
  std::size_t patients = 0;
  std::map<ModalityKind, std::size_t> epochs_total;
  std::map<ModalityKind, std::size_t> epochs_kept;
};

PreprocessSummary cmd_preprocess(const PipelineConfig& cfg);
FeatureMatrix cmd_extract(const PipelineConfig& cfg);

struct EvaluateOptions {
  bool all = false;                 ///< rf, ert, logreg, lda, qda with defaults
  std::vector<std::string> models;  ///< restrict to these keys (config entry or default)
};

std::vector<EvalReport> cmd_evaluate(const PipelineConfig& cfg, const EvaluateOptions& opt = {});

struct ReportSummary {
  OlsResult ols;
  std::vector<std::size_t> kept_columns;
  std::vector<std::size_t> dropped_columns;
  std::vector<PValueBucket> buckets;
  Importances importances;
  std::vector<ImportanceGroupReport> groups;  ///< one per basis
};

ReportSummary cmd_report(const PipelineConfig& cfg);

struct SynthOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::size_t n_patients = 40;
  double effect_size = 1.0;
  double duration_s = 150.0;
  FileFormat format = FileFormat::NPY;
  double artifact_rate = 0.02;  ///< fraction of epochs carrying a large transient
};

/// Writes <out_dir>/manifest.json and one file per patient and modality.
/// Half the patients are positive (alternating SHD/PHD), half controls.
std::filesystem::path cmd_synth(const SynthOptions& opt);

/// Synthetic recording for one patient; exposed for tests.
Recording synth_recording(ModalityKind kind, bool positive, double effect_size, double duration_s,
                          std::uint64_t seed, double artifact_rate);

}  // namespace hdsig
