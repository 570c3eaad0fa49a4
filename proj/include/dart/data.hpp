#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dart/types.hpp"

namespace dart {

struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  std::string accent_id;
  Matrix features;  // frames x feature_dim

  Index frames() const { return features.rows(); }
};

struct Dataset {
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  bool empty() const { return utterances.empty(); }
  // 0 when empty.
  Index feature_dim() const;
  std::vector<std::string> speaker_labels() const;
  std::vector<std::string> accent_labels() const;
  Index find(const std::string& utterance_id) const;  // -1 when absent
};

/// Linear generative recipe with a known factor structure: every frame is a
/// fixed mixture of an accent factor, a speaker factor, an utterance factor,
/// and white noise.
struct SynthSpec {
  Index n_accents = 6;
  Index speakers_per_accent = 4;
  Index utterances_per_speaker = 10;
  Index frames = 10;
  Index feature_dim = 16;
  Scalar accent_scale = 1.0;
  Scalar speaker_scale = 1.0;
  Scalar utterance_scale = 0.5;
  Scalar noise_scale = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

Dataset synth_dataset(const SynthSpec& spec);

Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& data, const std::string& path);

/// Stratified by (speaker_id, accent_id); each stratum sends
/// floor(fraction * count) utterances to validation via a seeded shuffle.
std::pair<Dataset, Dataset> split(const Dataset& data, Scalar holdout_fraction,
                                  std::uint64_t seed);

}  // namespace dart
