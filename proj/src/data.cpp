#include "dart/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "dart/error.hpp"

namespace dart {

using nlohmann::json;

namespace {

constexpr Index kFactorDim = 4;

// Deterministic in-place shuffle; avoids the implementation-defined draws of
// std::shuffle.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

Index Dataset::feature_dim() const {
  return utterances.empty() ? 0 : utterances.front().features.cols();
}

std::vector<std::string> Dataset::speaker_labels() const {
  std::vector<std::string> labels;
  labels.reserve(utterances.size());
  for (const auto& u : utterances) labels.push_back(u.speaker_id);
  return labels;
}

std::vector<std::string> Dataset::accent_labels() const {
  std::vector<std::string> labels;
  labels.reserve(utterances.size());
  for (const auto& u : utterances) labels.push_back(u.accent_id);
  return labels;
}

Index Dataset::find(const std::string& utterance_id) const {
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].utterance_id == utterance_id) return static_cast<Index>(i);
  }
  return -1;
}

void SynthSpec::validate() const {
  std::vector<std::string> bad;
  if (n_accents < 1) bad.push_back("n_accents");
  if (speakers_per_accent < 1) bad.push_back("speakers_per_accent");
  if (utterances_per_speaker < 1) bad.push_back("utterances_per_speaker");
  if (frames < 1) bad.push_back("frames");
  if (feature_dim < 1) bad.push_back("feature_dim");
  if (!(accent_scale >= 0)) bad.push_back("accent_scale");
  if (!(speaker_scale >= 0)) bad.push_back("speaker_scale");
  if (!(utterance_scale >= 0)) bad.push_back("utterance_scale");
  if (!(noise_scale >= 0)) bad.push_back("noise_scale");
  if (!bad.empty()) {
    std::string msg = "synth spec: invalid fields:";
    for (const auto& f : bad) msg += " " + f;
    throw ValidationError(msg);
  }
}

SynthSpec synth_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
  if (!j.is_object()) throw DataError("synth spec: top level must be an object");
  static const std::set<std::string> known = {
      "n_accents",     "speakers_per_accent", "utterances_per_speaker",
      "frames",        "feature_dim",         "accent_scale",
      "speaker_scale", "utterance_scale",     "noise_scale",
      "seed"};
  for (const auto& [key, unused] : j.items()) {
    if (!known.count(key)) throw DataError("synth spec: unknown key '" + key + "'");
  }
  SynthSpec spec;
  try {
    if (j.contains("n_accents")) spec.n_accents = j.at("n_accents").get<Index>();
    if (j.contains("speakers_per_accent")) {
      spec.speakers_per_accent = j.at("speakers_per_accent").get<Index>();
    }
    if (j.contains("utterances_per_speaker")) {
      spec.utterances_per_speaker = j.at("utterances_per_speaker").get<Index>();
    }
    if (j.contains("frames")) spec.frames = j.at("frames").get<Index>();
    if (j.contains("feature_dim")) spec.feature_dim = j.at("feature_dim").get<Index>();
    if (j.contains("accent_scale")) spec.accent_scale = j.at("accent_scale").get<Scalar>();
    if (j.contains("speaker_scale")) spec.speaker_scale = j.at("speaker_scale").get<Scalar>();
    if (j.contains("utterance_scale")) {
      spec.utterance_scale = j.at("utterance_scale").get<Scalar>();
    }
    if (j.contains("noise_scale")) spec.noise_scale = j.at("noise_scale").get<Scalar>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json j;
  j["n_accents"] = spec.n_accents;
  j["speakers_per_accent"] = spec.speakers_per_accent;
  j["utterances_per_speaker"] = spec.utterances_per_speaker;
  j["frames"] = spec.frames;
  j["feature_dim"] = spec.feature_dim;
  j["accent_scale"] = spec.accent_scale;
  j["speaker_scale"] = spec.speaker_scale;
  j["utterance_scale"] = spec.utterance_scale;
  j["noise_scale"] = spec.noise_scale;
  j["seed"] = spec.seed;
  return j.dump();
}

Dataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, 11));
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  auto draw_matrix = [&](Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
    }
    return m;
  };
  auto draw_vector = [&](Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  const Matrix mix_accent = draw_matrix(spec.feature_dim, kFactorDim);
  const Matrix mix_speaker = draw_matrix(spec.feature_dim, kFactorDim);
  const Matrix mix_utterance = draw_matrix(spec.feature_dim, kFactorDim);

  Dataset data;
  data.utterances.reserve(static_cast<std::size_t>(spec.n_accents * spec.speakers_per_accent *
                                                   spec.utterances_per_speaker));
  for (Index a = 0; a < spec.n_accents; ++a) {
    const std::string accent_id = "a" + std::to_string(a);
    const Vector accent_factor = draw_vector(kFactorDim);
    const Vector accent_part = spec.accent_scale * (mix_accent * accent_factor);
    for (Index s = 0; s < spec.speakers_per_accent; ++s) {
      const std::string speaker_id = accent_id + "_s" + std::to_string(s);
      const Vector speaker_factor = draw_vector(kFactorDim);
      const Vector speaker_part = spec.speaker_scale * (mix_speaker * speaker_factor);
      for (Index u = 0; u < spec.utterances_per_speaker; ++u) {
        const Vector utt_factor = draw_vector(kFactorDim);
        const Vector utt_part = spec.utterance_scale * (mix_utterance * utt_factor);
        Utterance utt;
        utt.utterance_id = speaker_id + "_u" + std::to_string(u);
        utt.speaker_id = speaker_id;
        utt.accent_id = accent_id;
        utt.features.resize(spec.frames, spec.feature_dim);
        for (Index t = 0; t < spec.frames; ++t) {
          const Vector noise = draw_vector(spec.feature_dim);
          utt.features.row(t) =
              (accent_part + speaker_part + utt_part + spec.noise_scale * noise).transpose();
        }
        data.utterances.push_back(std::move(utt));
      }
    }
  }
  return data;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);

  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim_line = 0;
  Index dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    Utterance utt;
    try {
      utt.utterance_id = j.at("utterance_id").get<std::string>();
      utt.speaker_id = j.at("speaker_id").get<std::string>();
      utt.accent_id = j.at("accent_id").get<std::string>();
      const json& feats = j.at("features");
      if (!feats.is_array() || feats.empty()) {
        throw DataError("dataset line " + std::to_string(line_no) +
                        ": features must be a non-empty array of rows");
      }
      const auto rows = static_cast<Index>(feats.size());
      const auto cols = static_cast<Index>(feats.at(0).size());
      if (cols < 1) {
        throw DataError("dataset line " + std::to_string(line_no) + ": empty feature row");
      }
      utt.features.resize(rows, cols);
      for (Index r = 0; r < rows; ++r) {
        const json& row = feats.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
          throw DataError("dataset line " + std::to_string(line_no) + ": row " +
                          std::to_string(r) + " has " + std::to_string(row.size()) +
                          " values, expected " + std::to_string(cols));
        }
        for (Index c = 0; c < cols; ++c) {
          utt.features(r, c) = row.at(static_cast<std::size_t>(c)).get<Scalar>();
        }
      }
    } catch (const json::exception& e) {
      throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (utt.utterance_id.empty() || utt.speaker_id.empty() || utt.accent_id.empty()) {
      throw DataError("dataset line " + std::to_string(line_no) + ": empty id field");
    }
    if (!utt.features.allFinite()) {
      throw DataError("dataset line " + std::to_string(line_no) + ": non-finite feature");
    }
    if (dim < 0) {
      dim = utt.features.cols();
      dim_line = line_no;
    } else if (utt.features.cols() != dim) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": feature_dim " +
                            std::to_string(utt.features.cols()) + " differs from " +
                            std::to_string(dim) + " established at line " +
                            std::to_string(dim_line));
    }
    data.utterances.push_back(std::move(utt));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path);
  for (const auto& utt : data.utterances) {
    json feats = json::array();
    for (Index r = 0; r < utt.features.rows(); ++r) {
      json row = json::array();
      for (Index c = 0; c < utt.features.cols(); ++c) row.push_back(utt.features(r, c));
      feats.push_back(std::move(row));
    }
    json j;
    j["utterance_id"] = utt.utterance_id;
    j["speaker_id"] = utt.speaker_id;
    j["accent_id"] = utt.accent_id;
    j["features"] = std::move(feats);
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::pair<Dataset, Dataset> split(const Dataset& data, Scalar holdout_fraction,
                                  std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0) || holdout_fraction >= 1.0) {
    throw ContractViolation("split: fraction must lie in [0, 1)");
  }
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& u = data.utterances[i];
    strata[{u.speaker_id, u.accent_id}].push_back(i);
  }
  std::mt19937_64 rng(derive_seed(seed, 12));
  std::set<std::size_t> holdout;
  for (auto& [key, indices] : strata) {
    seeded_shuffle(indices, rng);
    const auto take = static_cast<std::size_t>(
        std::floor(holdout_fraction * static_cast<Scalar>(indices.size())));
    for (std::size_t k = 0; k < take; ++k) holdout.insert(indices[k]);
  }
  std::pair<Dataset, Dataset> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (holdout.count(i) ? out.second : out.first).utterances.push_back(data.utterances[i]);
  }
  return out;
}

}  // namespace dart
