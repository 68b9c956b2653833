#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hdsig/matrix.hpp"

namespace hdsig {

enum class ModalityKind { EEG, ECG, FNIRS };

inline constexpr std::array<ModalityKind, 3> kAllModalities{ModalityKind::EEG, ModalityKind::ECG,
                                                            ModalityKind::FNIRS};

struct Modality {
  ModalityKind kind = ModalityKind::EEG;
  std::size_t expected_channels = 0;
  double sampling_rate_hz = 0.0;

  /// EEG: 16 channels at 1000 Hz. ECG: 1 channel at 1200 Hz.
  /// fNIRS: 11 optodes x {HbO, HbR} = 22 channels at 31.25 Hz.
  static Modality of(ModalityKind kind) noexcept;

  friend bool operator==(const Modality&, const Modality&) = default;
};

std::string_view modality_name(ModalityKind kind) noexcept;  // "EEG", "ECG", "FNIRS"
std::string_view modality_key(ModalityKind kind) noexcept;   // "eeg", "ecg", "fnirs"
ModalityKind parse_modality(std::string_view text);

/// Canonical channel names in storage order.
const std::vector<std::string>& canonical_channels(ModalityKind kind);

struct Recording {
  std::string patient_id;
  Modality modality;
  std::vector<std::string> channel_names;
  Matrix samples;  ///< channels x time
  double duration_s = 0.0;

  std::size_t channels() const noexcept { return samples.rows(); }
  std::size_t length() const noexcept { return samples.cols(); }
};

/// Builds a recording and checks its invariants (channel count, finite values,
/// channel names for EEG). Throws ShapeMismatch / NonFiniteSample / UnknownChannel.
Recording make_recording(std::string patient_id, Modality modality,
                         std::vector<std::string> channel_names, Matrix samples);

enum class FileFormat { CSV, NPY };

/// Infers the format from the extension (".csv" / ".npy").
FileFormat format_from_path(const std::filesystem::path& path);

/// CSV: header row of channel names, one row per time sample.
/// NPY: 2-D float array of shape [channels, time].
Recording load_recording(const std::filesystem::path& path, Modality modality, FileFormat format,
                         std::string patient_id = {});

/// Writes rows = samples, columns = channels, with 17 significant digits.
void write_recording_csv(const Recording& rec, const std::filesystem::path& path);
void write_recording_npy(const Recording& rec, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// NPY tensors

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;  ///< C order

  std::size_t size() const noexcept;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

Tensor read_npy(const std::filesystem::path& path);
/// Writes little-endian <f8, C order. Uses format v1 unless the header needs v2.
void write_npy(const Tensor& tensor, const std::filesystem::path& path);

Tensor to_tensor(const Matrix& m);
Matrix to_matrix(const Tensor& t);  ///< requires a 2-D tensor

// ---------------------------------------------------------------------------
// Dataset manifest

enum class Diagnosis { SHD, PHD, Control, Unknown };

std::string_view diagnosis_name(Diagnosis d) noexcept;
Diagnosis parse_diagnosis(std::string_view text);

struct ManifestEntry {
  std::string patient_id;
  Diagnosis diagnosis = Diagnosis::Control;
  std::map<ModalityKind, std::filesystem::path> paths;  ///< resolved against the manifest dir
  int label = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<Diagnosis, int> label_policy;

  static std::map<Diagnosis, int> default_label_policy();

  std::size_t positives() const noexcept;
  std::size_t negatives() const noexcept;
  const ManifestEntry* find(std::string_view patient_id) const noexcept;
};

/// Parses and validates a manifest JSON file. Relative signal paths are
/// resolved against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view json_text,
                               const std::filesystem::path& base_dir = {});
/// Writes paths relative to the manifest's directory when possible.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// small file helpers shared across modules
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace hdsig
