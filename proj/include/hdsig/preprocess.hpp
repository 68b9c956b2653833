#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hdsig/signal_io.hpp"

namespace hdsig {

struct BandPassSpec {
  double low_cut_hz = 0.0;
  double high_cut_hz = 0.0;

  /// Throws InvalidBand unless 0 <= low < high < fs / 2.
  void validate(double sampling_rate_hz) const;
};

/// Cascade of direct-form-II-transposed biquads, each {b0, b1, b2, a1, a2}
/// with a0 normalized to 1.
struct SosFilter {
  struct Section {
    double b0, b1, b2, a1, a2;
  };
  std::vector<Section> sections;

  /// Filter order (2 poles per section).
  std::size_t order() const noexcept { return 2 * sections.size(); }
  /// Magnitude of the frequency response at `freq_hz`.
  double magnitude(double freq_hz, double fs) const;
  /// Single causal pass with zero initial state.
  std::vector<double> apply(std::span<const double> x) const;
};

/// Digital Butterworth band-pass obtained from an analog low-pass prototype
/// of order `prototype_order` (even) through the band-pass transform and the
/// bilinear transform with prewarping. The result has 2 * prototype_order
/// poles and unit gain at the geometric band center.
SosFilter design_butterworth_bandpass(std::size_t prototype_order, const BandPassSpec& band,
                                      double fs);

/// Forward-backward filtering (zero phase). The signal is extended at both
/// ends by odd reflection of `pad` samples and each pass starts from the
/// filter's steady-state response to the first sample.
std::vector<double> filtfilt(const SosFilter& filter, std::span<const double> x, std::size_t pad);

inline constexpr std::size_t kDefaultPrototypeOrder = 4;

/// Zero-phase band-pass of every channel: order-4 prototype applied forward
/// and backward, odd-reflection padding of 3 x (band-pass order) samples.
Recording bandpass_filter(const Recording& rec, const BandPassSpec& spec,
                          std::size_t prototype_order = kDefaultPrototypeOrder);

// ---------------------------------------------------------------------------

struct EpochSet {
  std::string patient_id;
  Modality modality;
  std::vector<std::string> channel_names;
  std::size_t n_epochs = 0;
  std::size_t channels = 0;
  std::size_t samples_per_epoch = 0;
  std::vector<double> epochs;  ///< [n_epochs][channels][samples_per_epoch]
  double epoch_len_s = 0.0;
  double step_s = 0.0;
  std::vector<std::size_t> kept_indices;  ///< original window index of each epoch
  /// Per-epoch, per-channel mean removed by normalize_epochs; zero before
  /// normalization. Lets features that need the raw level (coefficient of
  /// variation) recover it.
  std::vector<double> offsets;  ///< [n_epochs][channels]

  std::span<const double> channel(std::size_t epoch, std::size_t ch) const {
    return {epochs.data() + (epoch * channels + ch) * samples_per_epoch, samples_per_epoch};
  }
  std::span<double> channel(std::size_t epoch, std::size_t ch) {
    return {epochs.data() + (epoch * channels + ch) * samples_per_epoch, samples_per_epoch};
  }
  double offset(std::size_t epoch, std::size_t ch) const { return offsets[epoch * channels + ch]; }
};

/// Windows of epoch_len_s starting every (epoch_len_s - overlap_s) seconds;
/// only complete windows are kept, so a 1200 s recording yields 299 epochs.
EpochSet segment(const Recording& rec, double epoch_len_s = 5.0, double overlap_s = 1.0);

struct RejectionRule {
  enum class Kind { Absolute, IqrMultiple };
  Kind kind = Kind::Absolute;
  /// Absolute: peak-to-peak limit in signal units.
  /// IqrMultiple: limit = value x (per-channel interquartile range).
  double value = 0.0;
};

/// Per-channel peak-to-peak thresholds for `rule`, evaluated on the
/// continuous (filtered) recording.
std::vector<double> resolve_thresholds(const RejectionRule& rule, const Recording& rec);

/// Drops every epoch in which some channel's peak-to-peak amplitude exceeds
/// that channel's threshold. Order of survivors is preserved.
EpochSet reject_bad_epochs(const EpochSet& es, std::span<const double> channel_thresholds);
EpochSet reject_bad_epochs(const EpochSet& es, double threshold);

/// Subtracts each channel's mean within each epoch.
EpochSet normalize_epochs(const EpochSet& es);

struct ModalityPreprocess {
  BandPassSpec band;
  RejectionRule reject;
};

struct PreprocessConfig {
  double epoch_len_s = 5.0;
  double overlap_s = 1.0;
  std::size_t prototype_order = kDefaultPrototypeOrder;
  std::map<ModalityKind, ModalityPreprocess> modalities;

  /// EEG 0.5-45 Hz, 800 uV; ECG 0.05-100 Hz, 5 mV; fNIRS 0.2-1.5 Hz, 6 x IQR.
  static PreprocessConfig defaults();
};

/// filter -> segment -> reject -> normalize for one recording.
EpochSet preprocess_recording(const Recording& rec, const PreprocessConfig& cfg);

/// Writes <stem>.npy ([epochs, channels, samples]) and <stem>.json sidecar.
void write_epoch_set(const EpochSet& es, const std::filesystem::path& npy_path);
EpochSet read_epoch_set(const std::filesystem::path& npy_path);

/// File-system safe form of a patient id, used for per-patient file names.
std::string safe_file_stem(std::string_view id);

}  // namespace hdsig
