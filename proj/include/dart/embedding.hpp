#pragma once

#include <string>
#include <vector>

#include "dart/types.hpp"
#include "dart/vq.hpp"

namespace dart {

enum class EmbeddingKind { pre_vq, grouped, quantized };

const char* kind_name(EmbeddingKind k);
EmbeddingKind parse_kind(const std::string& s);

/// Per-utterance latent snapshot: the encoder's own posterior mean, the
/// group-accumulated mean, and the quantized group vector, for each branch.
struct EmbeddingRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string accent_id;
  Vector speaker_pre, speaker_grouped, speaker_quantized;
  Vector accent_pre, accent_grouped, accent_quantized;
};

const Vector& select_embedding(const EmbeddingRecord& r, Branch branch, EmbeddingKind kind);

std::vector<Vector> embedding_vectors(const std::vector<EmbeddingRecord>& records, Branch branch,
                                      EmbeddingKind kind);
/// Labels per record; `label_by` picks speaker_id or accent_id.
std::vector<std::string> embedding_labels(const std::vector<EmbeddingRecord>& records,
                                          Branch label_by);

void write_embedding_csv(const std::vector<EmbeddingRecord>& records, const std::string& path);
std::vector<EmbeddingRecord> read_embedding_csv(const std::string& path);

}  // namespace dart
