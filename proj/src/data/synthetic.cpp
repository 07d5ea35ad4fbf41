#include "loco/data/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "loco/error.hpp"
#include "loco/seed.hpp"

namespace loco::data {
namespace {

// Coordinates of the k vertices of a regular simplex with pairwise distance
// `spacing`, centred at the origin, in k - 1 dimensions (Helmert basis).
std::vector<std::vector<double>> simplex(std::size_t k, double spacing) {
  std::vector<std::vector<double>> pts(k, std::vector<double>(k > 1 ? k - 1 : 0, 0.0));
  const double scale = spacing / std::numbers::sqrt2;
  for (std::size_t j = 1; j < k; ++j) {
    const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
    for (std::size_t i = 0; i < j; ++i) pts[i][j - 1] = scale / norm;
    pts[j][j - 1] = -scale * static_cast<double>(j) / norm;
  }
  return pts;
}

// `m` orthonormal directions in R^dim from a seeded Gaussian draw (modified
// Gram-Schmidt). Embedding the simplex along them keeps every distance but
// spreads the class signal over all features.
std::vector<std::vector<double>> random_frame(std::size_t m, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> frame;
  while (frame.size() < m) {
    std::vector<double> v(dim);
    for (double& x : v) x = g(rng);
    for (const auto& u : frame) {
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dot += u[j] * v[j];
      for (std::size_t j = 0; j < dim; ++j) v[j] -= dot * u[j];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    frame.push_back(std::move(v));
  }
  return frame;
}

}  // namespace

SynthMode parse_synth_mode(std::string_view name) {
  if (name == "gaussian_clusters") return SynthMode::gaussian_clusters;
  if (name == "oscillatory") return SynthMode::oscillatory;
  fail(ErrorCode::configuration, "unknown synthetic mode '" + std::string(name) + "'");
}

OodGeometry parse_ood_geometry(std::string_view name) {
  if (name == "far") return OodGeometry::far;
  if (name == "overlapping") return OodGeometry::overlapping;
  fail(ErrorCode::configuration, "unknown OOD geometry '" + std::string(name) + "'");
}

std::string_view to_string(SynthMode m) noexcept {
  return m == SynthMode::gaussian_clusters ? "gaussian_clusters" : "oscillatory";
}

std::string_view to_string(OodGeometry g) noexcept {
  return g == OodGeometry::far ? "far" : "overlapping";
}

void SynthConfig::validate() const {
  require(n_classes >= 2, ErrorCode::configuration, "synthetic data needs at least 2 classes");
  require(trials_per_class >= 8, ErrorCode::configuration, "trials_per_class must be >= 8");
  require(n_channels >= 1 && n_samples >= 1, ErrorCode::configuration,
          "n_channels and n_samples must be positive");
  require(class_separation >= 0.0 && std::isfinite(class_separation), ErrorCode::configuration,
          "class_separation must be a finite value >= 0");
  require(noise_std > 0.0 && std::isfinite(noise_std), ErrorCode::configuration,
          "noise_std must be positive");
  require(sampling_rate_hz > 0.0, ErrorCode::configuration, "sampling_rate_hz must be positive");
  const std::size_t dim = n_channels * n_samples;
  if (mode == SynthMode::gaussian_clusters) {
    require(n_classes <= dim + 1, ErrorCode::configuration,
            "infeasible geometry: " + std::to_string(n_classes) + " classes need at least " +
                std::to_string(n_classes - 1) + " feature dimensions");
  } else {
    require(n_channels >= n_classes, ErrorCode::configuration,
            "infeasible geometry: oscillatory mode needs one channel per class");
  }
}

std::vector<std::vector<double>> cluster_means(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t dim = cfg.n_channels * cfg.n_samples;
  const std::size_t k = cfg.n_classes;
  const double s = cfg.class_separation * cfg.noise_std;
  // coordinates in k - 1 dimensions, then embedded into the feature space
  std::vector<std::vector<double>> coords(k, std::vector<double>(k - 1, 0.0));
  if (cfg.ood_geometry == OodGeometry::far) {
    const auto id = simplex(k - 1, s);
    for (std::size_t c = 0; c + 1 < k; ++c)
      for (std::size_t j = 0; j < id[c].size(); ++j) coords[c][j] = id[c][j];
    // the ID centroid is the origin; the last axis is orthogonal to the ID span
    coords[k - 1][k - 2] = 2.0 * s;
  } else {
    coords = simplex(k, s);
    coords[k - 1] = coords[0];
  }
  const auto frame = random_frame(k - 1, dim, hash_seeds({cfg.seed, 0x6d65616eULL}));
  std::vector<std::vector<double>> means(k, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t a = 0; a + 1 < k; ++a)
      for (std::size_t j = 0; j < dim; ++j) means[c][j] += coords[c][a] * frame[a][j];
  return means;
}

EpochedDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  EpochedDataset d;
  d.subject = cfg.subject;
  d.n_channels = cfg.n_channels;
  d.n_samples = cfg.n_samples;
  d.sampling_rate_hz = cfg.sampling_rate_hz;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) d.class_names.push_back("class" + std::to_string(c));

  const std::size_t dim = d.feature_dim();
  const std::size_t n = cfg.n_classes * cfg.trials_per_class;
  d.epochs.resize(n * dim);
  d.labels.resize(n);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<double>> means;
  if (cfg.mode == SynthMode::gaussian_clusters) means = cluster_means(cfg);

  std::vector<double> trial(dim);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t c = t / cfg.trials_per_class;
    d.labels[t] = static_cast<int>(c);
    for (double& v : trial) v = noise(rng);
    if (cfg.mode == SynthMode::gaussian_clusters) {
      for (std::size_t j = 0; j < dim; ++j) trial[j] += means[c][j];
    } else {
      std::size_t pattern = c;
      double amplitude = cfg.class_separation * cfg.noise_std;
      if (c + 1 == cfg.n_classes) {
        if (cfg.ood_geometry == OodGeometry::overlapping) pattern = 0;
        else amplitude *= 2.0;
      }
      const double freq = 8.0 + 4.0 * static_cast<double>(pattern);
      const double ph = phase(rng);
      for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
        if (ch % cfg.n_classes != pattern) continue;
        for (std::size_t s = 0; s < cfg.n_samples; ++s) {
          const double time = static_cast<double>(s) / cfg.sampling_rate_hz;
          trial[ch * cfg.n_samples + s] += amplitude * std::sin(2.0 * std::numbers::pi * freq * time + ph);
        }
      }
    }
    for (std::size_t j = 0; j < dim; ++j) d.epochs[t * dim + j] = static_cast<float>(trial[j]);
  }
  return d;
}

std::vector<EpochedDataset> generate_subjects(const SynthConfig& cfg, std::size_t n) {
  std::vector<EpochedDataset> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SynthConfig sub = cfg;
    sub.seed = hash_seeds({cfg.seed, i});
    std::string index = std::to_string(i);
    if (index.size() < 2) index.insert(0, 2 - index.size(), '0');
    sub.subject = cfg.subject + "-" + index;
    out.push_back(generate_synthetic(sub));
  }
  return out;
}

}  // namespace loco::data
