#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "hdsig/error.hpp"
#include "hdsig/parallel.hpp"
#include "hdsig/pipeline.hpp"
#include "hdsig/rng.hpp"

namespace hdsig {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBlockS = 4.0;  // artifact bookkeeping granularity (one epoch step)

// Stationary AR(1) noise with the given standard deviation.
void add_ar1(std::span<double> out, double a, double sd, Rng& rng) {
  const double innov = sd * std::sqrt(1.0 - a * a);
  double x = sd * rng.normal();
  for (double& v : out) {
    x = a * x + innov * rng.normal();
    v += x;
  }
}

double clamp_factor(double f) { return std::max(f, 0.05); }

// Gaussian bump of the given height and width (s) at time t0, on all rows.
void add_bump(Matrix& m, double fs, double t0, double width_s, std::span<const double> heights) {
  const auto n = static_cast<std::ptrdiff_t>(m.cols());
  const auto c = static_cast<std::ptrdiff_t>(std::llround(t0 * fs));
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(4.0 * width_s * fs));
  for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, c - half); i < std::min(n, c + half + 1); ++i) {
    const double z = (static_cast<double>(i - c) / fs) / width_s;
    const double g = std::exp(-0.5 * z * z);
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, static_cast<std::size_t>(i)) += heights[r] * g;
  }
}

// Rare large transients, at most one per epoch step.
void add_artifacts(Matrix& m, double fs, double duration_s, double rate, double width_s,
                   std::span<const double> heights, Rng& rng) {
  const auto blocks = static_cast<std::size_t>(duration_s / kBlockS);
  for (std::size_t b = 0; b < blocks; ++b) {
    const double u = rng.uniform();
    const double t0 = (static_cast<double>(b) + rng.uniform()) * kBlockS;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    if (u >= rate) continue;
    std::vector<double> h(heights.begin(), heights.end());
    for (double& v : h) v *= sign;
    add_bump(m, fs, t0, width_s, h);
  }
}

Matrix synth_eeg(bool positive, double e, double duration_s, Rng& rng, double artifact_rate) {
  const Modality mod = Modality::of(ModalityKind::EEG);
  const double fs = mod.sampling_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  Matrix m(mod.expected_channels, n);

  const double gain = std::exp(0.1 * rng.normal()) * (positive ? clamp_factor(1.0 - 0.25 * e) : 1.0);
  const double alpha_amp = 8e-6 * (positive ? clamp_factor(1.0 - 0.6 * e) : 1.0);
  const double alpha_hz = std::clamp(10.0 + 0.4 * rng.normal(), 8.5, 11.5);
  const double theta_amp = 2e-6 * (positive ? 1.0 + 0.5 * e : 1.0);
  for (std::size_t c = 0; c < m.rows(); ++c) {
    auto row = m.row(c);
    const double ch_gain = gain * std::exp(0.05 * rng.normal());
    const double weight = 0.6 + 0.6 * static_cast<double>(c) / static_cast<double>(m.rows() - 1);
    const double phase = kTwoPi * rng.uniform();
    const double mod_phase = kTwoPi * rng.uniform();
    const double theta_phase = kTwoPi * rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double envelope = 1.0 + 0.3 * std::sin(kTwoPi * 0.1 * t + mod_phase);
      row[i] = alpha_amp * weight * envelope * std::sin(kTwoPi * alpha_hz * t + phase) +
               theta_amp * std::sin(kTwoPi * 6.0 * t + theta_phase);
    }
    add_ar1(row, 0.9, 10e-6, rng);
    for (double& v : row) v *= ch_gain;
  }
  std::vector<double> blink(m.rows());
  for (std::size_t c = 0; c < m.rows(); ++c) blink[c] = 1.5e-3 * (1.0 - 0.5 * static_cast<double>(c) / 15.0);
  add_artifacts(m, fs, duration_s, artifact_rate, 0.15, blink, rng);
  return m;
}

Matrix synth_ecg(bool positive, double e, double duration_s, Rng& rng, double artifact_rate) {
  const Modality mod = Modality::of(ModalityKind::ECG);
  const double fs = mod.sampling_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  Matrix m(1, n);
  auto row = m.row(0);

  const double rr_mean = 0.85 * std::exp(0.05 * rng.normal());
  const double rr_sd = 0.02 + (positive ? 0.06 * e : 0.0);
  const double gain = 1e-3 * std::exp(0.1 * rng.normal()) * (positive ? clamp_factor(1.0 - 0.2 * e) : 1.0);
  struct Wave {
    double amp, width, offset;
  };
  static constexpr Wave kWaves[] = {
      {0.15, 0.025, -0.2}, {-0.1, 0.01, -0.03}, {1.0, 0.012, 0.0}, {-0.25, 0.012, 0.03}, {0.3, 0.05, 0.3}};

  double beat = 0.3 * rng.uniform();
  while (beat < duration_s + 1.0) {
    for (const Wave& w : kWaves) {
      const double center = beat + w.offset;
      const auto lo = static_cast<std::ptrdiff_t>(std::floor((center - 4.0 * w.width) * fs));
      const auto hi = static_cast<std::ptrdiff_t>(std::ceil((center + 4.0 * w.width) * fs));
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i <= hi && i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double z = (static_cast<double>(i) / fs - center) / w.width;
        row[static_cast<std::size_t>(i)] += gain * w.amp * std::exp(-0.5 * z * z);
      }
    }
    beat += std::clamp(rr_mean + rr_sd * rng.normal(), 0.4, 1.6);
  }
  const double wander_phase = kTwoPi * rng.uniform();
  for (std::size_t i = 0; i < n; ++i)
    row[i] += 0.05e-3 * std::sin(kTwoPi * 0.15 * static_cast<double>(i) / fs + wander_phase);
  add_ar1(row, 0.5, 0.02e-3, rng);
  const double spike[] = {8e-3};
  add_artifacts(m, fs, duration_s, artifact_rate, 0.05, spike, rng);
  return m;
}

Matrix synth_fnirs(bool positive, double e, double duration_s, Rng& rng, double artifact_rate) {
  const Modality mod = Modality::of(ModalityKind::FNIRS);
  const double fs = mod.sampling_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  Matrix m(mod.expected_channels, n);

  const double gain = std::exp(0.1 * rng.normal()) * (positive ? clamp_factor(1.0 - 0.2 * e) : 1.0);
  const double cardiac_hz = 1.15 * std::exp(0.05 * rng.normal());
  const double resp_hz = 0.28 * std::exp(0.05 * rng.normal());
  const double rho = positive ? std::clamp(1.0 - e, 0.0, 1.0) : 1.0;  // HbO/HbR coupling
  const std::size_t optodes = mod.expected_channels / 2;

  std::vector<double> shared(n), other(n);
  for (std::size_t o = 0; o < optodes; ++o) {
    auto make_component = [&](std::vector<double>& s) {
      const double pc = kTwoPi * rng.uniform(), pr = kTwoPi * rng.uniform();
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        s[i] = 0.6 * std::sin(kTwoPi * cardiac_hz * t + pc) + 0.8 * std::sin(kTwoPi * resp_hz * t + pr);
      }
      add_ar1(s, 0.95, 0.3, rng);
    };
    make_component(shared);
    make_component(other);
    auto hbo = m.row(2 * o);
    auto hbr = m.row(2 * o + 1);
    const double baseline = 0.5 + 0.1 * rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      hbo[i] = baseline + gain * shared[i];
      hbr[i] = -0.5 * baseline + gain * (-0.5 * (rho * shared[i] + std::sqrt(1.0 - rho * rho) * other[i]));
    }
    std::fill(other.begin(), other.end(), 0.0);
    add_ar1(other, 0.3, 0.1 * gain, rng);
    for (std::size_t i = 0; i < n; ++i) hbo[i] += other[i];
    std::fill(other.begin(), other.end(), 0.0);
    add_ar1(other, 0.3, 0.1 * gain, rng);
    for (std::size_t i = 0; i < n; ++i) hbr[i] += other[i];
  }
  std::vector<double> motion(m.rows(), 20.0);
  add_artifacts(m, fs, duration_s, artifact_rate, 0.5, motion, rng);
  return m;
}

}  // namespace

Recording synth_recording(ModalityKind kind, bool positive, double effect_size, double duration_s,
                          std::uint64_t seed, double artifact_rate) {
  Rng rng(seed);
  Matrix m;
  switch (kind) {
    case ModalityKind::EEG: m = synth_eeg(positive, effect_size, duration_s, rng, artifact_rate); break;
    case ModalityKind::ECG: m = synth_ecg(positive, effect_size, duration_s, rng, artifact_rate); break;
    case ModalityKind::FNIRS: m = synth_fnirs(positive, effect_size, duration_s, rng, artifact_rate); break;
  }
  return make_recording("synthetic", Modality::of(kind), canonical_channels(kind), std::move(m));
}

fs::path cmd_synth(const SynthOptions& opt) {
  if (opt.n_patients < 4 || opt.n_patients % 2 != 0)
    fail(ErrorCode::InvalidArgument, "synthetic cohort needs an even number of patients, at least 4");
  if (!(opt.effect_size >= 0.0) || !std::isfinite(opt.effect_size))
    fail(ErrorCode::InvalidArgument, "effect size must be a non-negative number");
  if (!(opt.duration_s >= 10.0)) fail(ErrorCode::InvalidArgument, "duration must be at least 10 s");
  if (!(opt.artifact_rate >= 0.0 && opt.artifact_rate <= 1.0))
    fail(ErrorCode::InvalidArgument, "artifact rate must lie in [0, 1]");
  if (opt.out_dir.empty()) fail(ErrorCode::InvalidArgument, "synthetic output directory required");

  const fs::path data_dir = opt.out_dir / "data";
  fs::create_directories(data_dir);
  const char* ext = opt.format == FileFormat::NPY ? ".npy" : ".csv";

  DatasetManifest manifest;
  manifest.label_policy = DatasetManifest::default_label_policy();
  manifest.entries.resize(opt.n_patients);
  for (std::size_t p = 0; p < opt.n_patients; ++p) {
    char id[16];
    std::snprintf(id, sizeof id, "P%03zu", p + 1);
    const bool positive = p % 2 == 0;
    ManifestEntry& e = manifest.entries[p];
    e.patient_id = id;
    e.diagnosis = positive ? ((p / 2) % 2 == 0 ? Diagnosis::SHD : Diagnosis::PHD) : Diagnosis::Control;
    e.label = manifest.label_policy.at(e.diagnosis);
    for (auto kind : kAllModalities)
      e.paths[kind] = data_dir / (std::string(id) + "_" + std::string(modality_key(kind)) + ext);
  }

  parallel_for(opt.n_patients * kAllModalities.size(), 0, [&](std::size_t task) {
    const std::size_t p = task / kAllModalities.size();
    const ModalityKind kind = kAllModalities[task % kAllModalities.size()];
    const ManifestEntry& e = manifest.entries[p];
    const std::uint64_t seed = mix_seed(mix_seed(opt.seed, p), static_cast<std::uint64_t>(kind) + 1);
    Recording rec = synth_recording(kind, e.label == 1, opt.effect_size, opt.duration_s, seed, opt.artifact_rate);
    rec.patient_id = e.patient_id;
    if (opt.format == FileFormat::NPY) write_recording_npy(rec, e.paths.at(kind));
    else write_recording_csv(rec, e.paths.at(kind));
  });

  const fs::path manifest_path = opt.out_dir / "manifest.json";
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

}  // namespace hdsig
