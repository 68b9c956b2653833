// hdsig command-line driver: synth, preprocess, extract, evaluate, report.

#include <cstdio>
#include <cstring>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hdsig/error.hpp"
#include "hdsig/parallel.hpp"
#include "hdsig/pipeline.hpp"

using namespace hdsig;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool json = false;
};

PipelineConfig resolve_config(const GlobalOptions& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig::defaults() : load_config(g.config);
  if (!g.out.empty()) cfg.out_dir = g.out;
  if (!g.manifest.empty()) cfg.manifest = g.manifest;
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (cfg.threads > 0) set_default_threads(cfg.threads);
  return cfg;
}

void require_manifest(const PipelineConfig& cfg) {
  if (cfg.manifest.empty()) fail(ErrorCode::UsageError, "no manifest: pass --manifest or set it in --config");
}

json metrics_summary(const EvalReport& r) {
  return {{"model", model_key(r.spec.kind)},
          {"accuracy", r.pooled.accuracy},
          {"precision", r.pooled.precision},
          {"recall", r.pooled.recall},
          {"f1", r.pooled.f1},
          {"roc_auc", r.pooled_roc_auc},
          {"pr_auc", r.pooled_pr_auc},
          {"fold_mean_roc_auc", r.fold_mean_roc_auc ? json(*r.fold_mean_roc_auc) : json(nullptr)}};
}

void emit(const GlobalOptions& g, const json& summary, const std::string& text) {
  if (g.json) std::cout << summary.dump() << "\n";
  else std::cout << text;
}

int report_error(bool as_json, const std::string& code, const std::string& message, int status) {
  if (as_json) std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  else std::cerr << "error [" << code << "]: " << message << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOptions g;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--json") == 0) g.json = true;

  CLI::App app{"Multimodal EEG/ECG/fNIRS classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.add_option("--config", g.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--manifest", g.manifest, "dataset manifest (overrides the config)");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_flag("--json", g.json, "machine-readable output and errors");

  SynthOptions synth;
  std::string synth_format = "npy";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset and manifest");
  synth_cmd->add_option("--patients", synth.n_patients, "number of patients (even, >= 4)");
  synth_cmd->add_option("--effect", synth.effect_size, "class separation (0 = none)");
  synth_cmd->add_option("--duration", synth.duration_s, "recording length in seconds");
  synth_cmd->add_option("--artifact-rate", synth.artifact_rate, "fraction of epochs with a transient");
  synth_cmd->add_option("--format", synth_format, "npy or csv")->check(CLI::IsMember({"npy", "csv"}));

  auto* pre_cmd = app.add_subcommand("preprocess", "filter, segment, reject and normalize recordings");
  auto* ext_cmd = app.add_subcommand("extract", "compute the feature matrix from preprocessed epochs");
  EvaluateOptions eval_opt;
  auto* eval_cmd = app.add_subcommand("evaluate", "group k-fold evaluation of the configured models");
  eval_cmd->add_flag("--all", eval_opt.all, "evaluate rf, ert, logreg, lda and qda");
  eval_cmd->add_option("--model", eval_opt.models, "model to evaluate (rf, ert, logreg, lda, qda)");
  auto* rep_cmd = app.add_subcommand("report", "OLS significance and grouped feature importance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(g.json, "UsageError", e.what(), 2);
  }

  try {
    if (*synth_cmd) {
      if (g.out.empty()) fail(ErrorCode::UsageError, "synth needs --out");
      synth.out_dir = g.out;
      synth.seed = g.seed.value_or(0);
      synth.format = synth_format == "csv" ? FileFormat::CSV : FileFormat::NPY;
      if (g.threads && *g.threads > 0) set_default_threads(*g.threads);
      const auto path = cmd_synth(synth);
      emit(g, {{"manifest", path.generic_string()}, {"patients", synth.n_patients}},
           "wrote " + path.generic_string() + " (" + std::to_string(synth.n_patients) + " patients)\n");
      return 0;
    }

    const PipelineConfig cfg = resolve_config(g);
    if (*pre_cmd) {
      require_manifest(cfg);
      const auto s = cmd_preprocess(cfg);
      json j{{"patients", s.patients}};
      std::string text = "preprocessed " + std::to_string(s.patients) + " patients\n";
      for (const auto& [kind, kept] : s.epochs_kept) {
        const auto total = s.epochs_total.at(kind);
        j["epochs"][std::string(modality_key(kind))] = {{"kept", kept}, {"total", total}};
        text += "  " + std::string(modality_name(kind)) + ": " + std::to_string(kept) + " of " +
                std::to_string(total) + " epochs kept\n";
      }
      emit(g, j, text);
    } else if (*ext_cmd) {
      require_manifest(cfg);
      const auto fm = cmd_extract(cfg);
      emit(g, {{"rows", fm.rows()}, {"cols", fm.cols()}},
           "feature matrix: " + std::to_string(fm.rows()) + " rows x " + std::to_string(fm.cols()) + " features\n");
    } else if (*eval_cmd) {
      const auto reports = cmd_evaluate(cfg, eval_opt);
      json j = json::array();
      std::string text;
      char line[256];
      for (const auto& r : reports) {
        j.push_back(metrics_summary(r));
        std::snprintf(line, sizeof line,
                      "%-6s accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f  roc_auc %.4f  pr_auc %.4f\n",
                      std::string(model_key(r.spec.kind)).c_str(), r.pooled.accuracy, r.pooled.precision,
                      r.pooled.recall, r.pooled.f1, r.pooled_roc_auc, r.pooled_pr_auc);
        text += line;
      }
      emit(g, j, text);
    } else if (*rep_cmd) {
      const auto s = cmd_report(cfg);
      json buckets = json::array();
      std::string text = "ols: n=" + std::to_string(s.ols.n) + " p=" + std::to_string(s.ols.n_features) +
                         " r2=" + std::to_string(s.ols.r_squared) + " F=" + std::to_string(s.ols.f_statistic) +
                         " dropped=" + std::to_string(s.dropped_columns.size()) + "\n";
      for (const auto& b : s.buckets) {
        buckets.push_back({{"bucket", b.label}, {"count", b.count}});
        text += "  " + b.label + ": " + std::to_string(b.count) + "\n";
      }
      emit(g,
           {{"n", s.ols.n},
            {"p", s.ols.n_features},
            {"r_squared", s.ols.r_squared},
            {"f_statistic", s.ols.f_statistic},
            {"dropped", s.dropped_columns.size()},
            {"buckets", buckets}},
           text);
    }
    return 0;
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::UsageError ? 2 : 1;
    return report_error(g.json, std::string(error_code_name(e.code())), e.what(), status);
  } catch (const std::exception& e) {
    return report_error(g.json, "Internal", e.what(), 1);
  }
}
