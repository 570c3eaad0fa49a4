#include "dart/embedding.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "dart/error.hpp"

namespace dart {

const char* kind_name(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::pre_vq: return "pre_vq";
    case EmbeddingKind::grouped: return "grouped";
    case EmbeddingKind::quantized: return "quantized";
  }
  return "?";
}

EmbeddingKind parse_kind(const std::string& s) {
  if (s == "pre_vq") return EmbeddingKind::pre_vq;
  if (s == "grouped") return EmbeddingKind::grouped;
  if (s == "quantized") return EmbeddingKind::quantized;
  throw ValidationError("kind: expected pre_vq, grouped or quantized, got '" + s + "'");
}

const Vector& select_embedding(const EmbeddingRecord& r, Branch branch, EmbeddingKind kind) {
  const Vector* v = nullptr;
  if (branch == Branch::speaker) {
    v = kind == EmbeddingKind::pre_vq      ? &r.speaker_pre
        : kind == EmbeddingKind::grouped   ? &r.speaker_grouped
                                           : &r.speaker_quantized;
  } else {
    v = kind == EmbeddingKind::pre_vq      ? &r.accent_pre
        : kind == EmbeddingKind::grouped   ? &r.accent_grouped
                                           : &r.accent_quantized;
  }
  if (v->size() == 0) {
    throw DataError("embedding: utterance '" + r.utterance_id + "' has no " +
                    std::string(branch_name(branch)) + "/" + kind_name(kind) + " vector");
  }
  return *v;
}

std::vector<Vector> embedding_vectors(const std::vector<EmbeddingRecord>& records, Branch branch,
                                      EmbeddingKind kind) {
  std::vector<Vector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(select_embedding(r, branch, kind));
  return out;
}

std::vector<std::string> embedding_labels(const std::vector<EmbeddingRecord>& records,
                                          Branch label_by) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(label_by == Branch::speaker ? r.speaker_id : r.accent_id);
  }
  return out;
}

namespace {

void write_rows(std::ofstream& out, const EmbeddingRecord& r, Branch branch) {
  for (EmbeddingKind kind :
       {EmbeddingKind::pre_vq, EmbeddingKind::grouped, EmbeddingKind::quantized}) {
    const Vector& v = select_embedding(r, branch, kind);
    out << r.utterance_id << "," << r.speaker_id << "," << r.accent_id << ","
        << branch_name(branch) << "," << kind_name(kind);
    for (Index i = 0; i < v.size(); ++i) out << "," << format_g17(v[i]);
    out << "\n";
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

void write_embedding_csv(const std::vector<EmbeddingRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file: " + path);
  Index dim = 0;
  for (const auto& r : records) {
    if (r.speaker_pre.size() > 0) {
      dim = r.speaker_pre.size();
      break;
    }
  }
  out << "utterance_id,speaker_id,accent_id,branch,kind";
  for (Index i = 0; i < dim; ++i) out << ",v" << i;
  out << "\n";
  for (const auto& r : records) {
    write_rows(out, r, Branch::speaker);
    write_rows(out, r, Branch::accent);
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<EmbeddingRecord> read_embedding_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) return {};
  const auto header = split_csv_line(line);
  if (header.size() < 6 || header[0] != "utterance_id" || header[3] != "branch" ||
      header[4] != "kind") {
    throw DataError("embedding file: unexpected header in " + path);
  }
  const auto dim = static_cast<Index>(header.size() - 5);

  std::vector<EmbeddingRecord> records;
  std::map<std::string, std::size_t> by_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != dim + 5) {
      throw DataError("embedding file line " + std::to_string(line_no) + ": expected " +
                      std::to_string(dim + 5) + " fields, got " + std::to_string(fields.size()));
    }
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) {
      try {
        v[i] = std::stod(fields[static_cast<std::size_t>(5 + i)]);
      } catch (const std::exception&) {
        throw DataError("embedding file line " + std::to_string(line_no) +
                        ": bad number in column v" + std::to_string(i));
      }
    }
    auto [it, inserted] = by_id.try_emplace(fields[0], records.size());
    if (inserted) {
      EmbeddingRecord r;
      r.utterance_id = fields[0];
      r.speaker_id = fields[1];
      r.accent_id = fields[2];
      records.push_back(std::move(r));
    }
    EmbeddingRecord& r = records[it->second];
    const Branch branch = parse_branch(fields[3]);
    const EmbeddingKind kind = parse_kind(fields[4]);
    Vector& slot = branch == Branch::speaker
                       ? (kind == EmbeddingKind::pre_vq    ? r.speaker_pre
                          : kind == EmbeddingKind::grouped ? r.speaker_grouped
                                                           : r.speaker_quantized)
                       : (kind == EmbeddingKind::pre_vq    ? r.accent_pre
                          : kind == EmbeddingKind::grouped ? r.accent_grouped
                                                           : r.accent_quantized);
    slot = std::move(v);
  }
  return records;
}

}  // namespace dart
