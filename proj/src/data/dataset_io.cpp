#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "loco/data/dataset.hpp"
#include "loco/error.hpp"

namespace loco::data {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kEpochsFile = "epochs.f32";
constexpr const char* kLabelsFile = "labels.u32";

std::uint32_t to_le(std::uint32_t v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

void write_words(const fs::path& path, const std::vector<std::uint32_t>& words) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io, "cannot write " + path.string());
  std::vector<char> bytes(words.size() * 4);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::uint32_t le = to_le(words[i]);
    std::memcpy(bytes.data() + 4 * i, &le, 4);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

std::vector<std::uint32_t> read_words(const fs::path& path, std::size_t expected) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  require(!ec, ErrorCode::io, "cannot stat " + path.string());
  require(size == expected * 4, ErrorCode::format_size_mismatch,
          path.filename().string() + " holds " + std::to_string(size) + " bytes, manifest implies " +
              std::to_string(expected * 4));
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot read " + path.string());
  std::vector<char> bytes(size);
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  require(in.good(), ErrorCode::io, "read failed for " + path.string());
  std::vector<std::uint32_t> words(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t w;
    std::memcpy(&w, bytes.data() + 4 * i, 4);
    words[i] = to_le(w);
  }
  return words;
}

template <class T>
T field(const json& m, const char* key) {
  require(m.contains(key), ErrorCode::format_parse, std::string("manifest lacks '") + key + "'");
  try {
    return m.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::format_parse, std::string("manifest field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::vector<std::size_t> EpochedDataset::class_counts() const {
  std::vector<std::size_t> counts(n_classes(), 0);
  for (int y : labels) {
    if (y >= 0 && static_cast<std::size_t>(y) < counts.size()) ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

void EpochedDataset::validate() const {
  require(n_classes() >= 1, ErrorCode::validation, subject + ": no classes");
  require(sampling_rate_hz > 0.0, ErrorCode::validation, subject + ": sampling rate must be positive");
  require(feature_dim() > 0, ErrorCode::validation, subject + ": empty trials");
  require(epochs.size() == n_trials() * feature_dim(), ErrorCode::validation,
          subject + ": epoch tensor does not match trials x channels x samples");
  for (int y : labels) {
    require(y >= 0 && static_cast<std::size_t>(y) < n_classes(), ErrorCode::validation,
            subject + ": label " + std::to_string(y) + " out of range");
  }
  for (float v : epochs) require(std::isfinite(v), ErrorCode::validation, subject + ": non-finite sample");
  const auto counts = class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    require(counts[c] >= 1, ErrorCode::validation,
            subject + ": class '" + class_names[c] + "' has no trials");
  }
}

LabeledSet EpochedDataset::to_labeled() const {
  LabeledSet s;
  s.x = Matrix(n_trials(), feature_dim());
  for (std::size_t i = 0; i < epochs.size(); ++i) s.x.flat()[i] = epochs[i];
  s.y = labels;
  return s;
}

LabeledSet EpochedDataset::subset(std::span<const std::size_t> trials) const {
  const std::size_t dim = feature_dim();
  LabeledSet s;
  s.x = Matrix(trials.size(), dim);
  for (std::size_t r = 0; r < trials.size(); ++r) {
    const std::size_t t = trials[r];
    require(t < n_trials(), ErrorCode::input_shape, "trial index out of range");
    for (std::size_t j = 0; j < dim; ++j) s.x(r, j) = epochs[t * dim + j];
    s.y.push_back(labels[t]);
  }
  return s;
}

void save_dataset(const EpochedDataset& d, const fs::path& dir) {
  d.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());

  json m;
  m["format_version"] = kFormatVersion;
  m["subject"] = d.subject;
  m["class_names"] = d.class_names;
  m["n_trials"] = d.n_trials();
  m["n_channels"] = d.n_channels;
  m["n_samples"] = d.n_samples;
  m["sampling_rate_hz"] = d.sampling_rate_hz;
  m["epochs_file"] = kEpochsFile;
  m["labels_file"] = kLabelsFile;
  m["dtype"] = "f32le";
  m["layout"] = "trial,channel,sample";
  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    require(out.good(), ErrorCode::io, "cannot write manifest in " + dir.string());
    out << m.dump(2) << '\n';
  }

  std::vector<std::uint32_t> words(d.epochs.size());
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = std::bit_cast<std::uint32_t>(d.epochs[i]);
  write_words(dir / kEpochsFile, words);
  std::vector<std::uint32_t> labels(d.labels.begin(), d.labels.end());
  write_words(dir / kLabelsFile, labels);
}

EpochedDataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  require(in.good(), ErrorCode::io, "cannot open " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::format_parse, manifest_path.string() + ": " + e.what());
  }
  require(m.is_object(), ErrorCode::format_parse, "manifest is not a JSON object");

  const int version = field<int>(m, "format_version");
  require(version == kFormatVersion, ErrorCode::format_version,
          "unsupported format_version " + std::to_string(version));
  require(field<std::string>(m, "dtype") == "f32le", ErrorCode::format_version,
          "unsupported dtype (expected f32le)");
  require(field<std::string>(m, "layout") == "trial,channel,sample", ErrorCode::format_version,
          "unsupported layout (expected trial,channel,sample)");

  EpochedDataset d;
  d.subject = field<std::string>(m, "subject");
  d.class_names = field<std::vector<std::string>>(m, "class_names");
  const auto n_trials = field<std::size_t>(m, "n_trials");
  d.n_channels = field<std::size_t>(m, "n_channels");
  d.n_samples = field<std::size_t>(m, "n_samples");
  d.sampling_rate_hz = field<double>(m, "sampling_rate_hz");
  const auto epochs_file = field<std::string>(m, "epochs_file");
  const auto labels_file = field<std::string>(m, "labels_file");

  const auto words = read_words(dir / epochs_file, n_trials * d.n_channels * d.n_samples);
  d.epochs.resize(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) d.epochs[i] = std::bit_cast<float>(words[i]);

  const auto labels = read_words(dir / labels_file, n_trials);
  d.labels.resize(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) {
    require(labels[i] < d.class_names.size(), ErrorCode::format_label_range,
            "trial " + std::to_string(i) + " has label " + std::to_string(labels[i]) + " but only " +
                std::to_string(d.class_names.size()) + " classes");
    d.labels[i] = static_cast<int>(labels[i]);
  }
  d.validate();
  return d;
}

}  // namespace loco::data
