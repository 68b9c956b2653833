#include "hdsig/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "hdsig/error.hpp"

namespace hdsig {

namespace fs = std::filesystem;
using nlohmann::json;

EpochSet segment(const Recording& rec, double epoch_len_s, double overlap_s) {
  if (!(epoch_len_s > 0.0)) fail(ErrorCode::InvalidArgument, "epoch length must be positive");
  if (!(overlap_s >= 0.0) || !(overlap_s < epoch_len_s))
    fail(ErrorCode::NonPositiveStep, "overlap must be in [0, epoch length)");
  const double fs = rec.modality.sampling_rate_hz;
  const auto spe = static_cast<std::size_t>(std::llround(epoch_len_s * fs));
  const auto step = static_cast<std::size_t>(std::llround((epoch_len_s - overlap_s) * fs));
  if (step == 0) fail(ErrorCode::NonPositiveStep, "epoch step rounds to zero samples");
  if (spe == 0 || spe > rec.length()) {
    fail(ErrorCode::EpochTooLong, std::to_string(epoch_len_s) + " s epochs do not fit in a " +
                                      std::to_string(rec.duration_s) + " s recording");
  }

  EpochSet es;
  es.patient_id = rec.patient_id;
  es.modality = rec.modality;
  es.channel_names = rec.channel_names;
  es.channels = rec.channels();
  es.samples_per_epoch = spe;
  es.n_epochs = (rec.length() - spe) / step + 1;
  es.epoch_len_s = epoch_len_s;
  es.step_s = epoch_len_s - overlap_s;
  es.epochs.resize(es.n_epochs * es.channels * spe);
  es.offsets.assign(es.n_epochs * es.channels, 0.0);
  es.kept_indices.resize(es.n_epochs);
  for (std::size_t e = 0; e < es.n_epochs; ++e) {
    es.kept_indices[e] = e;
    for (std::size_t c = 0; c < es.channels; ++c) {
      auto src = rec.samples.row(c).subspan(e * step, spe);
      std::copy(src.begin(), src.end(), es.channel(e, c).begin());
    }
  }
  return es;
}

namespace {

// Linear-interpolated quantile of sorted data (numpy's default method).
double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<double> resolve_thresholds(const RejectionRule& rule, const Recording& rec) {
  if (!(rule.value > 0.0)) fail(ErrorCode::InvalidArgument, "rejection threshold must be > 0");
  std::vector<double> out(rec.channels(), rule.value);
  if (rule.kind == RejectionRule::Kind::Absolute) return out;
  if (rec.length() == 0) fail(ErrorCode::EmptySignal, "recording has no samples");
  for (std::size_t c = 0; c < rec.channels(); ++c) {
    auto row = rec.samples.row(c);
    std::vector<double> sorted(row.begin(), row.end());
    std::sort(sorted.begin(), sorted.end());
    out[c] = rule.value * (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25));
  }
  return out;
}

EpochSet reject_bad_epochs(const EpochSet& es, std::span<const double> thresholds) {
  if (thresholds.size() != es.channels)
    fail(ErrorCode::LengthMismatch, "need one rejection threshold per channel");
  for (double t : thresholds)
    if (!(t >= 0.0)) fail(ErrorCode::InvalidArgument, "rejection thresholds must be non-negative");

  EpochSet out = es;
  out.epochs.clear();
  out.offsets.clear();
  out.kept_indices.clear();
  for (std::size_t e = 0; e < es.n_epochs; ++e) {
    bool bad = false;
    for (std::size_t c = 0; c < es.channels && !bad; ++c) {
      auto x = es.channel(e, c);
      auto [mn, mx] = std::minmax_element(x.begin(), x.end());
      bad = (*mx - *mn) > thresholds[c];
    }
    if (bad) continue;
    const auto begin = es.epochs.begin() + static_cast<std::ptrdiff_t>(e * es.channels * es.samples_per_epoch);
    out.epochs.insert(out.epochs.end(), begin,
                      begin + static_cast<std::ptrdiff_t>(es.channels * es.samples_per_epoch));
    for (std::size_t c = 0; c < es.channels; ++c) out.offsets.push_back(es.offset(e, c));
    out.kept_indices.push_back(es.kept_indices[e]);
  }
  out.n_epochs = out.kept_indices.size();
  if (out.n_epochs == 0) {
    fail(ErrorCode::AllEpochsRejected,
         "every " + std::string(modality_name(es.modality.kind)) + " epoch of patient '" +
             es.patient_id + "' exceeds the peak-to-peak threshold");
  }
  return out;
}

EpochSet reject_bad_epochs(const EpochSet& es, double threshold) {
  if (!(threshold > 0.0)) fail(ErrorCode::InvalidArgument, "rejection threshold must be > 0");
  std::vector<double> t(es.channels, threshold);
  return reject_bad_epochs(es, t);
}

EpochSet normalize_epochs(const EpochSet& es) {
  if (es.n_epochs == 0 || es.samples_per_epoch == 0)
    fail(ErrorCode::EmptyEpochSet, "cannot normalize an empty epoch set");
  EpochSet out = es;
  const double n = static_cast<double>(es.samples_per_epoch);
  for (std::size_t e = 0; e < es.n_epochs; ++e) {
    for (std::size_t c = 0; c < es.channels; ++c) {
      auto x = out.channel(e, c);
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= n;
      for (auto& v : x) v -= mean;
      out.offsets[e * es.channels + c] += mean;
    }
  }
  return out;
}

PreprocessConfig PreprocessConfig::defaults() {
  PreprocessConfig cfg;
  cfg.modalities[ModalityKind::EEG] = {{0.5, 45.0}, {RejectionRule::Kind::Absolute, 800e-6}};
  cfg.modalities[ModalityKind::ECG] = {{0.05, 100.0}, {RejectionRule::Kind::Absolute, 5e-3}};
  cfg.modalities[ModalityKind::FNIRS] = {{0.2, 1.5}, {RejectionRule::Kind::IqrMultiple, 6.0}};
  return cfg;
}

EpochSet preprocess_recording(const Recording& rec, const PreprocessConfig& cfg) {
  auto it = cfg.modalities.find(rec.modality.kind);
  if (it == cfg.modalities.end())
    fail(ErrorCode::MissingModality, "no preprocessing settings for " +
                                         std::string(modality_name(rec.modality.kind)));
  const Recording filtered = bandpass_filter(rec, it->second.band, cfg.prototype_order);
  const auto thresholds = resolve_thresholds(it->second.reject, filtered);
  EpochSet es = segment(filtered, cfg.epoch_len_s, cfg.overlap_s);
  es = reject_bad_epochs(es, thresholds);
  return normalize_epochs(es);
}

std::string safe_file_stem(std::string_view id) {
  std::string s(id);
  for (auto& ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                    ch == '-' || ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return s;
}

void write_epoch_set(const EpochSet& es, const fs::path& npy_path) {
  write_npy(Tensor{{es.n_epochs, es.channels, es.samples_per_epoch}, es.epochs}, npy_path);
  json side;
  side["patient_id"] = es.patient_id;
  side["modality"] = modality_name(es.modality.kind);
  side["sampling_rate_hz"] = es.modality.sampling_rate_hz;
  side["channel_names"] = es.channel_names;
  side["epoch_len_s"] = es.epoch_len_s;
  side["step_s"] = es.step_s;
  side["kept_indices"] = es.kept_indices;
  side["offsets"] = es.offsets;
  fs::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  write_text_file(sidecar, side.dump(1) + "\n");
}

EpochSet read_epoch_set(const fs::path& npy_path) {
  fs::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  if (!fs::exists(npy_path) || !fs::exists(sidecar))
    fail(ErrorCode::MissingPreprocessOutput, "missing epoch file " + npy_path.string() + " or its sidecar");
  Tensor t = read_npy(npy_path);
  if (t.shape.size() != 3) fail(ErrorCode::ShapeMismatch, npy_path.string() + " is not a 3-D epoch tensor");
  json side;
  try {
    side = json::parse(read_text_file(sidecar));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, "bad sidecar " + sidecar.string() + ": " + e.what());
  }
  EpochSet es;
  try {
    es.patient_id = side.at("patient_id").get<std::string>();
    es.modality = Modality::of(parse_modality(side.at("modality").get<std::string>()));
    es.channel_names = side.at("channel_names").get<std::vector<std::string>>();
    es.epoch_len_s = side.at("epoch_len_s").get<double>();
    es.step_s = side.at("step_s").get<double>();
    es.kept_indices = side.at("kept_indices").get<std::vector<std::size_t>>();
    es.offsets = side.at("offsets").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, "bad sidecar " + sidecar.string() + ": " + e.what());
  }
  es.n_epochs = t.shape[0];
  es.channels = t.shape[1];
  es.samples_per_epoch = t.shape[2];
  es.epochs = std::move(t.data);
  if (es.kept_indices.size() != es.n_epochs || es.offsets.size() != es.n_epochs * es.channels ||
      es.channel_names.size() != es.channels) {
    fail(ErrorCode::ShapeMismatch, "sidecar " + sidecar.string() + " does not match its tensor");
  }
  return es;
}

}  // namespace hdsig
