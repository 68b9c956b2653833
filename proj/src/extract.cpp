#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "hdsig/error.hpp"
#include "hdsig/features.hpp"
#include "hdsig/parallel.hpp"

namespace hdsig {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 7> kStatisticalNames{
    "kurtosis", "coef_of_variation", "skewness", "diff1_mean", "diff1_max", "diff2_mean", "diff2_max"};
constexpr std::array<const char*, 3> kSlopeNames{"slope_mean", "slope_variance", "higuchi_fd"};
constexpr std::array<const char*, 3> kHjorthNames{"activity", "mobility", "complexity"};
constexpr std::array<const char*, 8> kWaveletNames{"approx_mean", "approx_sd", "approx_energy",
                                                   "approx_entropy", "detail_mean", "detail_sd",
                                                   "detail_energy", "detail_entropy"};
constexpr std::size_t kFixedPerChannel = 7 + 3 + 3 + 8;

}  // namespace

std::string_view family_name(FeatureFamily f) noexcept {
  switch (f) {
    case FeatureFamily::Hjorth: return "Hjorth";
    case FeatureFamily::Statistical: return "Statistical";
    case FeatureFamily::Slope: return "Slope";
    case FeatureFamily::Wavelet: return "Wavelet";
    case FeatureFamily::PSD: return "PSD";
  }
  return "?";
}

FeatureFamily parse_family(std::string_view name) {
  for (auto f : {FeatureFamily::Hjorth, FeatureFamily::Statistical, FeatureFamily::Slope,
                 FeatureFamily::Wavelet, FeatureFamily::PSD})
    if (name == family_name(f)) return f;
  fail(ErrorCode::ParseError, "unknown feature family '" + std::string(name) + "'");
}

std::string FeatureDescriptor::name() const {
  return std::string(modality_name(modality)) + "/" + channel + "/" +
         std::string(family_name(family)) + "/" + detail;
}

FeatureConfig FeatureConfig::defaults() {
  FeatureConfig cfg;
  cfg.per_modality[ModalityKind::EEG] = {Wavelet::Coif1, 1.0, 0.5,
                                         {{"delta", 0.5, 3.5},
                                          {"theta", 3.5, 7.5},
                                          {"alpha", 7.5, 13.0},
                                          {"beta", 13.0, 30.0},
                                          {"gamma", 30.0, 45.0}}};
  cfg.per_modality[ModalityKind::ECG] = {Wavelet::Db4, 1.0, 0.5,
                                         {{"LF", 0.05, 6.0},
                                          {"LMF", 6.0, 11.0},
                                          {"MF", 11.0, 16.0},
                                          {"HF", 16.0, 20.0},
                                          {"VHF", 20.0, 100.0}}};
  cfg.per_modality[ModalityKind::FNIRS] = {Wavelet::Coif1, 2.0, 0.5,
                                           {{"resp", 0.2, 0.6}, {"cardiac", 0.6, 1.5}}};
  return cfg;
}

FeatureConfig FeatureConfig::eeg_only() {
  FeatureConfig cfg = defaults();
  cfg.modalities = {ModalityKind::EEG};
  return cfg;
}

std::size_t FeatureConfig::features_per_channel(ModalityKind kind) const {
  auto it = per_modality.find(kind);
  if (it == per_modality.end())
    fail(ErrorCode::MissingModality, "no feature settings for " + std::string(modality_name(kind)));
  return kFixedPerChannel + it->second.bands.size();
}

std::vector<FeatureDescriptor> channel_descriptors(ModalityKind kind, const std::string& channel,
                                                   const FeatureConfig& cfg) {
  std::vector<FeatureDescriptor> out;
  out.reserve(cfg.features_per_channel(kind));
  for (const char* d : kStatisticalNames) out.push_back({kind, channel, FeatureFamily::Statistical, d});
  for (const char* d : kSlopeNames) out.push_back({kind, channel, FeatureFamily::Slope, d});
  for (const char* d : kHjorthNames) out.push_back({kind, channel, FeatureFamily::Hjorth, d});
  for (const char* d : kWaveletNames) out.push_back({kind, channel, FeatureFamily::Wavelet, d});
  for (const auto& b : cfg.per_modality.at(kind).bands) out.push_back({kind, channel, FeatureFamily::PSD, b.name});
  return out;
}

std::vector<FeatureDescriptor> build_descriptors(
    const FeatureConfig& cfg, const std::map<ModalityKind, std::vector<std::string>>& channel_names) {
  std::vector<FeatureDescriptor> out;
  for (auto kind : cfg.modalities) {
    auto it = channel_names.find(kind);
    const auto& names = it != channel_names.end() ? it->second : canonical_channels(kind);
    for (const auto& ch : names) {
      auto d = channel_descriptors(kind, ch, cfg);
      out.insert(out.end(), d.begin(), d.end());
    }
  }
  return out;
}

void compute_channel_features(std::span<const double> y, double level_offset, double fs,
                              const ModalityFeatureConfig& mcfg, std::size_t hfd_k_max,
                              std::span<double> out) {
  if (out.size() != kFixedPerChannel + mcfg.bands.size())
    fail(ErrorCode::LengthMismatch, "feature output span has the wrong width");
  std::size_t i = 0;
  const auto st = statistical_features(y, level_offset);
  for (double v : {st.kurtosis, st.coef_of_variation, st.skewness, st.diff1_mean, st.diff1_max,
                   st.diff2_mean, st.diff2_max})
    out[i++] = v;
  const auto sl = slope_features(y, fs);
  out[i++] = sl.mean;
  out[i++] = sl.variance;
  out[i++] = higuchi_fd(y, hfd_k_max);
  const auto hj = hjorth(y, fs);
  out[i++] = hj.activity;
  out[i++] = hj.mobility;
  out[i++] = hj.complexity;
  for (double v : wavelet_features(dwt_level1(y, mcfg.wavelet)).values()) out[i++] = v;
  if (!mcfg.bands.empty()) {
    WelchConfig wc;
    wc.segment_len_samples = static_cast<std::size_t>(std::llround(mcfg.welch_segment_s * fs));
    wc.overlap_fraction = mcfg.welch_overlap;
    const auto sp = welch_psd(y, fs, wc);
    for (const auto& b : mcfg.bands) out[i++] = band_power(sp, b);
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (!std::isfinite(out[j]))
      fail(ErrorCode::NonFiniteInput, "feature " + std::to_string(j) + " is not finite");
  }
}

FeatureMatrix extract_feature_matrix(const std::vector<PatientEpochs>& epochs,
                                     const DatasetManifest& manifest, const FeatureConfig& cfg,
                                     std::size_t threads) {
  if (cfg.modalities.empty()) fail(ErrorCode::InvalidArgument, "no modalities selected for extraction");

  std::map<std::string, const PatientEpochs*> by_id;
  for (const auto& p : epochs) by_id[p.patient_id] = &p;

  struct PatientPlan {
    const PatientEpochs* pe;
    const ManifestEntry* entry;
    std::size_t rows;
    std::size_t first_row;
  };
  std::vector<PatientPlan> plans;
  std::map<ModalityKind, std::vector<std::string>> channel_names;
  std::size_t total_rows = 0;
  for (const auto& entry : manifest.entries) {
    auto it = by_id.find(entry.patient_id);
    if (it == by_id.end())
      fail(ErrorCode::MissingModality, "no epochs for patient '" + entry.patient_id + "'");
    std::size_t rows = std::numeric_limits<std::size_t>::max();
    for (auto kind : cfg.modalities) {
      auto s = it->second->sets.find(kind);
      if (s == it->second->sets.end()) {
        fail(ErrorCode::MissingModality, "patient '" + entry.patient_id + "' has no " +
                                             std::string(modality_name(kind)) + " epochs");
      }
      rows = std::min(rows, s->second.n_epochs);
      auto [cn, inserted] = channel_names.emplace(kind, s->second.channel_names);
      if (!inserted && cn->second != s->second.channel_names) {
        fail(ErrorCode::ShapeMismatch, "patient '" + entry.patient_id + "' has a different " +
                                           std::string(modality_name(kind)) + " channel layout");
      }
    }
    plans.push_back({it->second, &entry, rows, total_rows});
    total_rows += rows;
  }
  if (by_id.size() != plans.size())
    fail(ErrorCode::InvalidArgument, "epochs supplied for patients missing from the manifest");

  FeatureMatrix fm;
  fm.descriptors = build_descriptors(cfg, channel_names);
  const std::size_t width = fm.descriptors.size();
  fm.values = Matrix(total_rows, width);
  fm.labels.resize(total_rows);
  fm.groups.resize(total_rows);

  std::vector<std::pair<std::size_t, std::size_t>> tasks;  // (plan, epoch)
  tasks.reserve(total_rows);
  for (std::size_t p = 0; p < plans.size(); ++p)
    for (std::size_t e = 0; e < plans[p].rows; ++e) tasks.emplace_back(p, e);

  parallel_for(tasks.size(), threads, [&](std::size_t t) {
    const auto [p, e] = tasks[t];
    const PatientPlan& plan = plans[p];
    const std::size_t row = plan.first_row + e;
    auto out = fm.values.row(row);
    std::size_t col = 0;
    for (auto kind : cfg.modalities) {
      const EpochSet& es = plan.pe->sets.at(kind);
      const auto& mcfg = cfg.per_modality.at(kind);
      const std::size_t per = cfg.features_per_channel(kind);
      for (std::size_t c = 0; c < es.channels; ++c) {
        try {
          compute_channel_features(es.channel(e, c), es.offset(e, c), es.modality.sampling_rate_hz,
                                   mcfg, cfg.hfd_k_max, out.subspan(col, per));
        } catch (const Error& err) {
          fail(ErrorCode::FeatureComputationFailed,
               "patient '" + plan.entry->patient_id + "', " + std::string(modality_name(kind)) +
                   " epoch " + std::to_string(es.kept_indices[e]) + ", channel " +
                   es.channel_names[c] + ": " + std::string(error_code_name(err.code())) + ": " +
                   err.what());
        }
        col += per;
      }
    }
    fm.labels[row] = plan.entry->label;
    fm.groups[row] = plan.entry->patient_id;
  });
  return fm;
}

// ---------------------------------------------------------------------------

void write_feature_matrix(const FeatureMatrix& fm, const fs::path& dir) {
  fs::create_directories(dir);
  write_npy(to_tensor(fm.values), dir / "features.npy");

  std::ostringstream desc;
  desc << "index,modality,channel,family,detail\n";
  for (std::size_t i = 0; i < fm.descriptors.size(); ++i) {
    const auto& d = fm.descriptors[i];
    desc << i << ',' << modality_name(d.modality) << ',' << d.channel << ','
         << family_name(d.family) << ',' << d.detail << '\n';
  }
  write_text_file(dir / "descriptors.csv", desc.str());

  std::ostringstream labels, groups;
  labels << "label\n";
  groups << "group\n";
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    labels << fm.labels[r] << '\n';
    groups << fm.groups[r] << '\n';
  }
  write_text_file(dir / "labels.csv", labels.str());
  write_text_file(dir / "groups.csv", groups.str());
}

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

FeatureMatrix read_feature_matrix(const fs::path& dir) {
  for (const char* f : {"features.npy", "descriptors.csv", "labels.csv", "groups.csv"}) {
    if (!fs::exists(dir / f))
      fail(ErrorCode::MissingPreprocessOutput, "missing feature artifact " + (dir / f).string());
  }
  FeatureMatrix fm;
  fm.values = to_matrix(read_npy(dir / "features.npy"));

  auto desc = read_lines(dir / "descriptors.csv");
  for (std::size_t i = 1; i < desc.size(); ++i) {
    if (desc[i].empty()) continue;
    auto f = split_csv(desc[i]);
    if (f.size() != 5) fail(ErrorCode::ParseError, "bad descriptor line " + std::to_string(i + 1));
    fm.descriptors.push_back({parse_modality(f[1]), f[2], parse_family(f[3]), f[4]});
  }
  auto labels = read_lines(dir / "labels.csv");
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i].empty()) continue;
    if (labels[i] != "0" && labels[i] != "1") fail(ErrorCode::ParseError, "labels must be 0 or 1");
    fm.labels.push_back(labels[i] == "1" ? 1 : 0);
  }
  auto groups = read_lines(dir / "groups.csv");
  for (std::size_t i = 1; i < groups.size(); ++i)
    if (!groups[i].empty()) fm.groups.push_back(groups[i]);

  if (fm.descriptors.size() != fm.cols() || fm.labels.size() != fm.rows() || fm.groups.size() != fm.rows())
    fail(ErrorCode::ShapeMismatch, "feature artifacts in " + dir.string() + " disagree in size");
  return fm;
}

}  // namespace hdsig
