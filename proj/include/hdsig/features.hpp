#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hdsig/matrix.hpp"
#include "hdsig/preprocess.hpp"
#include "hdsig/signal_io.hpp"

namespace hdsig {

// ---------------------------------------------------------------------------
// Per-channel feature families. Variances are population variances
// (divide by n) throughout.

struct HjorthParams {
  double activity = 0.0;
  double mobility = 0.0;    ///< rad/s, derivative taken as first difference x fs
  double complexity = 0.0;
};

/// Throws ZeroVariance when y (or its derivative) is constant.
HjorthParams hjorth(std::span<const double> y, double fs);

struct StatisticalFeatures {
  double kurtosis = 0.0;           ///< Fisher (excess) kurtosis
  double coef_of_variation = 0.0;  ///< sd / |mean|
  double skewness = 0.0;
  double diff1_mean = 0.0;  ///< mean |y[i+1] - y[i]|
  double diff1_max = 0.0;
  double diff2_mean = 0.0;  ///< same over second differences
  double diff2_max = 0.0;
};

/// `level_offset` is added to the sample mean before the coefficient of
/// variation is formed; pass the mean removed by epoch normalization to get
/// the coefficient of the un-normalized signal. Throws ZeroVariance or ZeroMean.
StatisticalFeatures statistical_features(std::span<const double> y, double level_offset = 0.0);

struct SlopeFeatures {
  double mean = 0.0;
  double variance = 0.0;
};

SlopeFeatures slope_features(std::span<const double> y, double fs);

/// Higuchi fractal dimension from curve lengths at delays 1..k_max.
/// Throws DegenerateLengths when some curve length is zero.
double higuchi_fd(std::span<const double> y, std::size_t k_max = 10);

// ---------------------------------------------------------------------------
// Wavelets

enum class Wavelet { Coif1, Db4 };

std::string_view wavelet_name(Wavelet w) noexcept;
Wavelet parse_wavelet(std::string_view name);

struct FilterBank {
  std::vector<double> dec_lo;
  std::vector<double> dec_hi;
};

/// Analysis filters (coif1: 6 taps, db4: 8 taps).
const FilterBank& filter_bank(Wavelet w);

struct WaveletCoeffs {
  std::vector<double> approx;
  std::vector<double> detail;
  std::string wavelet_name;
};

/// Single-level DWT with periodic extension and dyadic downsampling. Output
/// lengths are ceil(n / 2); an odd-length input is first extended by
/// repeating its last sample.
WaveletCoeffs dwt_level1(std::span<const double> y, Wavelet wavelet);

struct WaveletFeatures {
  double approx_mean = 0.0, approx_sd = 0.0, approx_energy = 0.0, approx_entropy = 0.0;
  double detail_mean = 0.0, detail_sd = 0.0, detail_energy = 0.0, detail_entropy = 0.0;

  std::array<double, 8> values() const noexcept {
    return {approx_mean, approx_sd, approx_energy, approx_entropy,
            detail_mean, detail_sd, detail_energy, detail_entropy};
  }
};

/// Energy = sum C^2; entropy = sum over nonzero C of C^2 ln(C^2).
WaveletFeatures wavelet_features(const WaveletCoeffs& c);

// ---------------------------------------------------------------------------
// Spectra

struct WelchConfig {
  std::size_t segment_len_samples = 0;
  double overlap_fraction = 0.5;
  enum class Window { Hann } window = Window::Hann;
};

struct Spectrum {
  std::vector<double> freqs_hz;
  std::vector<double> power;  ///< one-sided density, units^2 / Hz
  double resolution_hz = 0.0;
};

/// Welch estimate: periodic-Hann windowed, mean-detrended segments, averaged
/// periodograms, one-sided density scaling (sum power * df ~ variance).
Spectrum welch_psd(std::span<const double> y, double fs, const WelchConfig& cfg);

struct Band {
  std::string name;
  double low_hz = 0.0;
  double high_hz = 0.0;
};

/// Trapezoidal integral of the spectrum over [low, high], with linear
/// interpolation at the band edges.
double band_power(const Spectrum& s, const Band& band);

// ---------------------------------------------------------------------------
// Feature matrix

enum class FeatureFamily { Hjorth, Statistical, Slope, Wavelet, PSD };

std::string_view family_name(FeatureFamily f) noexcept;
FeatureFamily parse_family(std::string_view name);

struct FeatureDescriptor {
  ModalityKind modality = ModalityKind::EEG;
  std::string channel;
  FeatureFamily family = FeatureFamily::Statistical;
  std::string detail;

  std::string name() const;  ///< e.g. "EEG/C3/Hjorth/activity"
  friend bool operator==(const FeatureDescriptor&, const FeatureDescriptor&) = default;
};

struct ModalityFeatureConfig {
  Wavelet wavelet = Wavelet::Coif1;
  double welch_segment_s = 1.0;
  double welch_overlap = 0.5;
  std::vector<Band> bands;
};

struct FeatureConfig {
  std::vector<ModalityKind> modalities{ModalityKind::EEG, ModalityKind::ECG, ModalityKind::FNIRS};
  std::map<ModalityKind, ModalityFeatureConfig> per_modality;
  std::size_t hfd_k_max = 10;

  /// EEG: coif1, 1 s Welch segments, delta/theta/alpha/beta/gamma.
  /// ECG: db4, 1 s segments, LF/LMF/MF/HF/VHF.
  /// fNIRS: coif1, 2 s segments, respiration/cardiac.
  static FeatureConfig defaults();
  static FeatureConfig eeg_only();

  /// 10 statistical+slope+HFD, 3 Hjorth, 8 wavelet, then one per band.
  std::size_t features_per_channel(ModalityKind kind) const;
};

/// Column layout for one modality's channels.
std::vector<FeatureDescriptor> channel_descriptors(ModalityKind kind, const std::string& channel,
                                                   const FeatureConfig& cfg);
std::vector<FeatureDescriptor> build_descriptors(
    const FeatureConfig& cfg, const std::map<ModalityKind, std::vector<std::string>>& channel_names);

/// Writes features_per_channel(kind) values for one channel of one epoch.
void compute_channel_features(std::span<const double> y, double level_offset, double fs,
                              const ModalityFeatureConfig& mcfg, std::size_t hfd_k_max,
                              std::span<double> out);

struct FeatureMatrix {
  Matrix values;  ///< rows = epochs, cols = features
  std::vector<FeatureDescriptor> descriptors;
  std::vector<int> labels;
  std::vector<std::string> groups;  ///< patient id per row

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
};

struct PatientEpochs {
  std::string patient_id;
  std::map<ModalityKind, EpochSet> sets;
};

/// Rows follow manifest order, then epoch order. For each patient, the first
/// min-over-modalities surviving epochs are concatenated across modalities.
FeatureMatrix extract_feature_matrix(const std::vector<PatientEpochs>& epochs,
                                     const DatasetManifest& manifest, const FeatureConfig& cfg,
                                     std::size_t threads = 0);

/// features.npy, descriptors.csv, labels.csv, groups.csv
void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& dir);
FeatureMatrix read_feature_matrix(const std::filesystem::path& dir);

}  // namespace hdsig
