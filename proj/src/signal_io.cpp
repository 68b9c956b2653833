#include "hdsig/signal_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hdsig/error.hpp"

namespace hdsig {

namespace fs = std::filesystem;
using nlohmann::json;

Modality Modality::of(ModalityKind kind) noexcept {
  switch (kind) {
    case ModalityKind::EEG: return {kind, 16, 1000.0};
    case ModalityKind::ECG: return {kind, 1, 1200.0};
    case ModalityKind::FNIRS: return {kind, 22, 31.25};
  }
  return {};
}

std::string_view modality_name(ModalityKind kind) noexcept {
  switch (kind) {
    case ModalityKind::EEG: return "EEG";
    case ModalityKind::ECG: return "ECG";
    case ModalityKind::FNIRS: return "FNIRS";
  }
  return "?";
}

std::string_view modality_key(ModalityKind kind) noexcept {
  switch (kind) {
    case ModalityKind::EEG: return "eeg";
    case ModalityKind::ECG: return "ecg";
    case ModalityKind::FNIRS: return "fnirs";
  }
  return "?";
}

ModalityKind parse_modality(std::string_view text) {
  for (auto k : kAllModalities)
    if (text == modality_name(k) || text == modality_key(k)) return k;
  if (text == "fNIRS") return ModalityKind::FNIRS;
  fail(ErrorCode::InvalidArgument, "unknown modality '" + std::string(text) + "'");
}

const std::vector<std::string>& canonical_channels(ModalityKind kind) {
  static const std::vector<std::string> eeg{"C3", "C4", "Cz", "F3", "F4", "Fp1", "Fp2", "O1",
                                            "O2", "P3", "P4", "P7", "P8", "Pz",  "T7",  "T8"};
  static const std::vector<std::string> ecg{"ECG"};
  static const std::vector<std::string> fnirs = [] {
    std::vector<std::string> v;
    for (int i = 1; i <= 11; ++i) {
      v.push_back("N" + std::to_string(i) + "_HbO");
      v.push_back("N" + std::to_string(i) + "_HbR");
    }
    return v;
  }();
  switch (kind) {
    case ModalityKind::EEG: return eeg;
    case ModalityKind::ECG: return ecg;
    case ModalityKind::FNIRS: return fnirs;
  }
  return eeg;
}

Recording make_recording(std::string patient_id, Modality modality,
                         std::vector<std::string> channel_names, Matrix samples) {
  const std::string who = patient_id.empty() ? std::string() : " (patient " + patient_id + ")";
  if (samples.rows() != modality.expected_channels) {
    fail(ErrorCode::ShapeMismatch,
         std::string(modality_name(modality.kind)) + " expects " +
             std::to_string(modality.expected_channels) + " channels, got " +
             std::to_string(samples.rows()) + who);
  }
  if (channel_names.empty()) channel_names = canonical_channels(modality.kind);
  if (channel_names.size() != samples.rows()) {
    fail(ErrorCode::ShapeMismatch, "channel name count does not match channel count" + who);
  }
  std::set<std::string> seen;
  for (const auto& name : channel_names) {
    if (!seen.insert(name).second) fail(ErrorCode::ShapeMismatch, "duplicate channel " + name + who);
  }
  if (modality.kind == ModalityKind::EEG) {
    const auto& allowed = canonical_channels(ModalityKind::EEG);
    for (const auto& name : channel_names) {
      if (std::find(allowed.begin(), allowed.end(), name) == allowed.end())
        fail(ErrorCode::UnknownChannel, "unknown EEG electrode '" + name + "'" + who);
    }
  }
  const auto data = samples.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      fail(ErrorCode::NonFiniteSample, "non-finite sample at channel " +
                                           std::to_string(i / samples.cols()) + ", index " +
                                           std::to_string(i % samples.cols()) + who);
    }
  }
  Recording rec;
  rec.patient_id = std::move(patient_id);
  rec.modality = modality;
  rec.channel_names = std::move(channel_names);
  rec.duration_s = static_cast<double>(samples.cols()) / modality.sampling_rate_hz;
  rec.samples = std::move(samples);
  return rec;
}

FileFormat format_from_path(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return FileFormat::CSV;
  if (ext == ".npy") return FileFormat::NPY;
  fail(ErrorCode::InvalidArgument, "cannot infer file format from '" + path.string() + "'");
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail(ErrorCode::ParseError,
         "bad numeric field '" + std::string(field) + "' on line " + std::to_string(line));
  }
  return v;
}

Recording load_csv(const fs::path& path, Modality modality, std::string patient_id) {
  const std::string text = read_text_file(path);
  std::string_view rest(text);
  if (rest.size() >= 3 && static_cast<unsigned char>(rest[0]) == 0xEF) rest.remove_prefix(3);  // BOM

  auto next_line = [&rest]() -> std::optional<std::string_view> {
    if (rest.empty()) return std::nullopt;
    auto pos = rest.find('\n');
    std::string_view line = rest.substr(0, pos);
    rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  auto header = next_line();
  if (!header || trim(*header).empty()) fail(ErrorCode::ParseError, "missing CSV header in " + path.string());
  std::vector<std::string> names;
  {
    std::string_view h = *header;
    std::size_t start = 0;
    for (;;) {
      auto comma = h.find(',', start);
      names.emplace_back(trim(h.substr(start, comma == std::string_view::npos ? h.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  const std::size_t channels = names.size();
  if (channels != modality.expected_channels) {
    fail(ErrorCode::ShapeMismatch, std::string(modality_name(modality.kind)) + " expects " +
                                       std::to_string(modality.expected_channels) +
                                       " columns, " + path.string() + " has " +
                                       std::to_string(channels));
  }

  std::vector<double> by_row;  // time-major while parsing
  by_row.reserve(text.size() / 8);
  std::size_t line_no = 1;
  while (auto line = next_line()) {
    ++line_no;
    if (trim(*line).empty()) continue;
    std::string_view l = *line;
    std::size_t start = 0, count = 0;
    for (;;) {
      auto comma = l.find(',', start);
      auto field = l.substr(start, comma == std::string_view::npos ? l.npos : comma - start);
      by_row.push_back(parse_double(field, line_no));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (count != channels) {
      fail(ErrorCode::ShapeMismatch, "line " + std::to_string(line_no) + " of " + path.string() +
                                         " has " + std::to_string(count) + " fields, expected " +
                                         std::to_string(channels));
    }
  }
  const std::size_t length = by_row.size() / channels;
  Matrix samples(channels, length);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t c = 0; c < channels; ++c) samples(c, t) = by_row[t * channels + c];
  return make_recording(std::move(patient_id), modality, std::move(names), std::move(samples));
}

}  // namespace

Recording load_recording(const fs::path& path, Modality modality, FileFormat format,
                         std::string patient_id) {
  if (!fs::exists(path)) fail(ErrorCode::MissingFile, "missing file " + path.string());
  if (format == FileFormat::CSV) return load_csv(path, modality, std::move(patient_id));

  Tensor t = read_npy(path);
  if (t.shape.size() != 2 || t.shape[0] != modality.expected_channels) {
    std::string shape;
    for (auto d : t.shape) shape += (shape.empty() ? "" : ",") + std::to_string(d);
    fail(ErrorCode::ShapeMismatch, std::string(modality_name(modality.kind)) + " expects [" +
                                       std::to_string(modality.expected_channels) +
                                       ", time], " + path.string() + " has (" + shape + ")");
  }
  return make_recording(std::move(patient_id), modality, {}, to_matrix(t));
}

void write_recording_csv(const Recording& rec, const fs::path& path) {
  std::string out;
  out.reserve(rec.samples.data().size() * 24);
  for (std::size_t c = 0; c < rec.channel_names.size(); ++c) {
    if (c) out += ',';
    out += rec.channel_names[c];
  }
  out += '\n';
  char buf[64];
  for (std::size_t t = 0; t < rec.length(); ++t) {
    for (std::size_t c = 0; c < rec.channels(); ++c) {
      if (c) out += ',';
      int n = std::snprintf(buf, sizeof buf, "%.17g", rec.samples(c, t));
      out.append(buf, static_cast<std::size_t>(n));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void write_recording_npy(const Recording& rec, const fs::path& path) {
  write_npy(to_tensor(rec.samples), path);
}

// ---------------------------------------------------------------------------

std::string_view diagnosis_name(Diagnosis d) noexcept {
  switch (d) {
    case Diagnosis::SHD: return "SHD";
    case Diagnosis::PHD: return "PHD";
    case Diagnosis::Control: return "Control";
    case Diagnosis::Unknown: return "Unknown";
  }
  return "?";
}

Diagnosis parse_diagnosis(std::string_view text) {
  for (auto d : {Diagnosis::SHD, Diagnosis::PHD, Diagnosis::Control, Diagnosis::Unknown})
    if (text == diagnosis_name(d)) return d;
  fail(ErrorCode::UnknownDiagnosis, "unknown diagnosis '" + std::string(text) + "'");
}

std::map<Diagnosis, int> DatasetManifest::default_label_policy() {
  return {{Diagnosis::SHD, 1}, {Diagnosis::PHD, 1}, {Diagnosis::Control, 0}, {Diagnosis::Unknown, 0}};
}

std::size_t DatasetManifest::positives() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.label == 1; }));
}

std::size_t DatasetManifest::negatives() const noexcept { return entries.size() - positives(); }

const ManifestEntry* DatasetManifest::find(std::string_view patient_id) const noexcept {
  for (const auto& e : entries)
    if (e.patient_id == patient_id) return &e;
  return nullptr;
}

DatasetManifest parse_manifest(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("patients") || !doc["patients"].is_array())
    fail(ErrorCode::ParseError, "manifest must be an object with a 'patients' array");

  DatasetManifest m;
  m.label_policy = DatasetManifest::default_label_policy();
  if (doc.contains("label_policy")) {
    const auto& lp = doc["label_policy"];
    if (!lp.is_object()) fail(ErrorCode::ParseError, "label_policy must be an object");
    for (const auto& [key, value] : lp.items()) {
      if (!value.is_number_integer() || (value.get<int>() != 0 && value.get<int>() != 1))
        fail(ErrorCode::ParseError, "label_policy values must be 0 or 1");
      m.label_policy[parse_diagnosis(key)] = value.get<int>();
    }
  }

  std::set<std::string> ids;
  for (const auto& p : doc["patients"]) {
    if (!p.is_object() || !p.contains("id") || !p["id"].is_string())
      fail(ErrorCode::ParseError, "every patient needs a string 'id'");
    ManifestEntry e;
    e.patient_id = p["id"].get<std::string>();
    if (!ids.insert(e.patient_id).second)
      fail(ErrorCode::DuplicatePatient, "duplicate patient id '" + e.patient_id + "'");
    if (!p.contains("diagnosis") || !p["diagnosis"].is_string())
      fail(ErrorCode::UnknownDiagnosis, "patient '" + e.patient_id + "' has no diagnosis");
    e.diagnosis = parse_diagnosis(p["diagnosis"].get<std::string>());
    for (auto kind : kAllModalities) {
      const std::string key(modality_key(kind));
      if (!p.contains(key) || !p[key].is_string() || p[key].get<std::string>().empty()) {
        fail(ErrorCode::MissingModalityPath,
             "patient '" + e.patient_id + "' has no " + std::string(modality_name(kind)) + " path");
      }
      fs::path path = p[key].get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      e.paths[kind] = path.lexically_normal();
    }
    e.label = m.label_policy.at(e.diagnosis);
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::MissingFile, "missing manifest " + path.string());
  return parse_manifest(read_text_file(path), path.parent_path());
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json doc;
  doc["patients"] = json::array();
  const fs::path base = path.parent_path();
  for (const auto& e : manifest.entries) {
    json p;
    p["id"] = e.patient_id;
    p["diagnosis"] = diagnosis_name(e.diagnosis);
    for (auto kind : kAllModalities) {
      auto it = e.paths.find(kind);
      if (it == e.paths.end()) continue;
      fs::path rel = base.empty() ? it->second : it->second.lexically_relative(base);
      if (rel.empty()) rel = it->second;
      p[std::string(modality_key(kind))] = rel.generic_string();
    }
    doc["patients"].push_back(std::move(p));
  }
  json lp = json::object();
  for (const auto& [d, label] : manifest.label_policy) lp[std::string(diagnosis_name(d))] = label;
  doc["label_policy"] = lp;
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace hdsig
