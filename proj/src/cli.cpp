#include "dart/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dart/data.hpp"
#include "dart/embedding.hpp"
#include "dart/error.hpp"
#include "dart/metrics.hpp"
#include "dart/model.hpp"
#include "dart/svg.hpp"
#include "dart/types.hpp"

namespace dart {
namespace {

using nlohmann::json;

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::string text = read_file(path);
  std::vector<std::string> lines;
  std::string::size_type start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::string trimmed(const std::string& s) {
  auto from = s.find_first_not_of(" \t");
  if (from == std::string::npos) return "";
  auto to = s.find_last_not_of(" \t");
  return s.substr(from, to - from + 1);
}

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> tokens;
  std::string t;
  while (ss >> t) tokens.push_back(t);
  return tokens;
}

Scalar parse_number(const std::string& raw, const std::string& where) {
  try {
    std::size_t pos = 0;
    const Scalar v = std::stod(raw, &pos);
    while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
    if (pos != raw.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not a finite number: '" + raw + "'");
  }
}

std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_command(const std::vector<std::string>& args) {
  std::string s = "dart";
  for (const auto& a : args) {
    s += ' ';
    s += a;
  }
  return s;
}

void write_manifest(const std::string& primary_path, const std::string& command,
                    const json& config, std::uint64_t seed, const std::string& started,
                    const std::vector<std::string>& outputs, const json* final_loss) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["started_at"] = started;
  m["finished_at"] = iso_utc_now();
  m["outputs"] = outputs;
  if (final_loss) m["final_loss"] = *final_loss;
  m["version"] = kToolVersion;
  const std::string path = primary_path + ".manifest.json";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << m.dump(2) << "\n";
  if (!f) throw IoError("failed writing '" + path + "'");
}

void write_history_csv(const std::string& path, const std::vector<LossBreakdown>& history,
                       const ModelConfig& cfg) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "step,recon,kl,commitment,codebook,total,learning_rate\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const LossBreakdown& h = history[i];
    const auto step = static_cast<Index>(i) + 1;
    f << step << ',' << format_g17(h.recon) << ',' << format_g17(h.kl) << ','
      << format_g17(h.commitment) << ',' << format_g17(h.codebook) << ','
      << format_g17(h.total) << ',' << format_g17(learning_rate(step, cfg)) << '\n';
  }
  if (!f) throw IoError("failed writing '" + path + "'");
}

F0Track read_f0_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "frame_index,f0_hz") {
    throw DataError(path + ": expected header 'frame_index,f0_hz'");
  }
  F0Track track;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trimmed(lines[i]).empty()) continue;
    const auto comma = lines[i].find(',');
    if (comma == std::string::npos || lines[i].find(',', comma + 1) != std::string::npos) {
      throw DataError(path + " line " + std::to_string(i + 1) + ": expected two fields");
    }
    const std::string where = path + " line " + std::to_string(i + 1);
    parse_number(lines[i].substr(0, comma), where);
    track.f0_hz.push_back(parse_number(lines[i].substr(comma + 1), where));
  }
  return track;
}

std::vector<Scalar> read_ratings(const std::string& path) {
  std::vector<Scalar> ratings;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trimmed(lines[i]);
    if (line.empty()) continue;
    ratings.push_back(parse_number(line, path + " line " + std::to_string(i + 1)));
  }
  return ratings;
}

std::vector<BWSTrial> read_bws_trials(const std::string& path) {
  std::vector<BWSTrial> trials;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trimmed(lines[i]).empty()) continue;
    const std::string where = path + " line " + std::to_string(i + 1);
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    BWSTrial trial;
    try {
      trial.shown = j.at("shown").get<std::vector<std::string>>();
      trial.best = j.at("best").get<std::string>();
      trial.worst = j.at("worst").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    trials.push_back(std::move(trial));
  }
  return trials;
}

void require_feature_match(const Model& m, const Dataset& data, const std::string& data_path) {
  if (!data.empty() && data.feature_dim() != m.config.feature_dim) {
    throw DataError(data_path + ": feature dim " + std::to_string(data.feature_dim()) +
                    " does not match the checkpoint's " +
                    std::to_string(m.config.feature_dim));
  }
}

json eval_mcd(const std::string& ref_path, const std::string& syn_path, bool skip_c0) {
  const Dataset ref = load_dataset(ref_path);
  const Dataset syn = load_dataset(syn_path);
  if (syn.empty()) throw InsufficientDataError("mcd: empty --syn dataset");
  Scalar sum = 0;
  for (const auto& u : syn.utterances) {
    const Index j = ref.find(u.utterance_id);
    if (j < 0) throw DataError("mcd: utterance '" + u.utterance_id + "' missing from --ref");
    sum += mcd(ref.utterances[static_cast<std::size_t>(j)].features, u.features, skip_c0);
  }
  return {{"mcd", sum / static_cast<Scalar>(syn.size())},
          {"pairs", syn.size()},
          {"skip_c0", skip_c0}};
}

json eval_ffe(const std::string& ref_path, const std::string& syn_path, Scalar threshold) {
  const F0Track ref = read_f0_csv(ref_path);
  const F0Track syn = read_f0_csv(syn_path);
  return {{"ffe", ffe(ref, syn, threshold)},
          {"frames", ref.f0_hz.size()},
          {"threshold", threshold}};
}

json eval_cs(const std::string& ref_path, const std::string& syn_path,
             const std::string& branch_str, const std::string& kind_str) {
  const auto refs = read_embedding_csv(ref_path);
  const auto syns = read_embedding_csv(syn_path);
  const Branch branch = parse_branch(branch_str);
  const EmbeddingKind kind = parse_kind(kind_str);
  std::map<std::string, const EmbeddingRecord*> ref_by_id;
  for (const auto& r : refs) ref_by_id[r.utterance_id] = &r;
  std::vector<Vector> a, b;
  for (const auto& r : syns) {
    const auto it = ref_by_id.find(r.utterance_id);
    if (it == ref_by_id.end()) {
      throw DataError("cs: utterance '" + r.utterance_id + "' missing from --ref");
    }
    a.push_back(select_embedding(*it->second, branch, kind));
    b.push_back(select_embedding(r, branch, kind));
  }
  return {{"branch", branch_str},
          {"cs", average_cosine_similarity(a, b)},
          {"kind", kind_str},
          {"pairs", a.size()}};
}

json eval_wer(const std::string& ref_path, const std::string& hyp_path) {
  const auto ref_lines = read_lines(ref_path);
  const auto hyp_lines = read_lines(hyp_path);
  if (ref_lines.size() != hyp_lines.size()) {
    throw DataError("wer: --ref has " + std::to_string(ref_lines.size()) + " lines, --hyp has " +
                    std::to_string(hyp_lines.size()));
  }
  Index subs = 0, dels = 0, ins = 0, ref_tokens = 0, lines_used = 0;
  for (std::size_t i = 0; i < ref_lines.size(); ++i) {
    const auto ref = tokenize(ref_lines[i]);
    const auto hyp = tokenize(hyp_lines[i]);
    if (ref.empty()) {
      if (!hyp.empty()) {
        throw DataError("wer: empty reference against non-empty hypothesis at line " +
                        std::to_string(i + 1));
      }
      continue;
    }
    const WerResult r = wer(ref, hyp);
    subs += r.substitutions;
    dels += r.deletions;
    ins += r.insertions;
    ref_tokens += static_cast<Index>(ref.size());
    ++lines_used;
  }
  if (ref_tokens == 0) throw InsufficientDataError("wer: no reference tokens");
  return {{"deletions", dels},
          {"insertions", ins},
          {"lines", lines_used},
          {"ref_tokens", ref_tokens},
          {"substitutions", subs},
          {"wer", static_cast<Scalar>(subs + dels + ins) / static_cast<Scalar>(ref_tokens)}};
}

json eval_bws(const std::string& trials_path) {
  const auto trials = read_bws_trials(trials_path);
  if (trials.empty()) throw InsufficientDataError("bws: no trials");
  const auto scores = bws_scores(trials);
  json items = json::object();
  for (const auto& [item, s] : scores) {
    items[item] = {{"best", s.best},
                   {"best_share", s.best_share},
                   {"score", s.score},
                   {"shown", s.shown},
                   {"worst", s.worst}};
  }
  return {{"items", items}, {"trials", trials.size()}};
}

json eval_mos(const std::string& ratings_path) {
  const auto ratings = read_ratings(ratings_path);
  const MosSummary s = mos_summary(ratings);
  return {{"ci95", s.ci95_halfwidth}, {"mos", s.mean}, {"n", ratings.size()}};
}

std::vector<Index> parse_codebook_sizes(const std::string& raw) {
  std::vector<Index> sizes;
  std::string item;
  std::istringstream ss(raw);
  while (std::getline(ss, item, ',')) {
    item = trimmed(item);
    if (item.empty() || !std::all_of(item.begin(), item.end(), [](unsigned char c) {
          return std::isdigit(c);
        })) {
      throw UsageFailure("--codebook-sizes: bad entry '" + item + "'");
    }
    sizes.push_back(static_cast<Index>(std::stoll(item)));
    if (sizes.back() < 1) throw UsageFailure("--codebook-sizes: sizes must be positive");
  }
  if (sizes.empty()) throw UsageFailure("--codebook-sizes: no sizes given");
  return sizes;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"speaker and accent latent toolkit"};
  app.name("dart");
  app.require_subcommand(1);

  std::uint64_t seed_flag = 42;

  std::string spec_path, out_path;
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic grouped dataset");
  synth->add_option("--spec", spec_path, "Synthesis spec JSON (defaults apply when omitted)");
  synth->add_option("--out", out_path, "Output dataset JSONL")->required();
  auto* synth_seed = synth->add_option("--seed", seed_flag, "Random seed");

  std::string train_config, train_data, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train_config, "Model config JSON")->required();
  train_cmd->add_option("--data", train_data, "Training dataset JSONL")->required();
  train_cmd->add_option("--out", train_out, "Output checkpoint path")->required();
  auto* train_seed = train_cmd->add_option("--seed", seed_flag, "Random seed");

  std::string conv_model, conv_data, conv_utt, conv_target, conv_out;
  auto* conv = app.add_subcommand("convert", "Re-render an utterance under a target accent");
  conv->add_option("--model", conv_model, "Checkpoint path")->required();
  conv->add_option("--data", conv_data, "Reference dataset JSONL")->required();
  conv->add_option("--utterance", conv_utt, "Utterance id to convert")->required();
  conv->add_option("--target-accent", conv_target, "Target accent id")->required();
  conv->add_option("--out", conv_out, "Output JSONL")->required();

  std::string eval_task, eval_ref, eval_syn, eval_hyp, eval_trials, eval_ratings;
  std::string eval_branch = "speaker", eval_kind = "quantized";
  Scalar eval_threshold = 0.2;
  bool eval_skip_c0 = false;
  auto* eval_cmd = app.add_subcommand("eval", "Compute one evaluation metric");
  eval_cmd->add_option("--task", eval_task, "Metric to compute")
      ->required()
      ->check(CLI::IsMember({"mcd", "ffe", "cs", "wer", "bws", "mos"}));
  eval_cmd->add_option("--ref", eval_ref, "Reference file");
  eval_cmd->add_option("--syn", eval_syn, "Synthesized/converted file");
  eval_cmd->add_option("--hyp", eval_hyp, "Hypothesis transcript (wer)");
  eval_cmd->add_option("--trials", eval_trials, "BWS trials JSONL (bws)");
  eval_cmd->add_option("--ratings", eval_ratings, "Ratings file, one number per line (mos)");
  eval_cmd->add_option("--branch", eval_branch, "Embedding branch (cs)")
      ->check(CLI::IsMember({"speaker", "accent"}));
  eval_cmd->add_option("--kind", eval_kind, "Embedding kind (cs)")
      ->check(CLI::IsMember({"pre_vq", "grouped", "quantized"}));
  eval_cmd->add_option("--threshold", eval_threshold, "Gross pitch error threshold (ffe)");
  eval_cmd->add_flag("--skip-c0", eval_skip_c0, "Drop cepstral coefficient 0 (mcd)");

  std::string embed_model, embed_data, embed_out;
  auto* embed_cmd = app.add_subcommand("embed", "Export per-utterance embeddings as CSV");
  embed_cmd->add_option("--model", embed_model, "Checkpoint path")->required();
  embed_cmd->add_option("--data", embed_data, "Dataset JSONL")->required();
  embed_cmd->add_option("--out", embed_out, "Output CSV")->required();

  std::string plot_embeddings, plot_color = "accent", plot_branch = "accent",
              plot_kind = "grouped", plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "PCA scatter of an embedding CSV as SVG");
  plot_cmd->add_option("--embeddings", plot_embeddings, "Embedding CSV")->required();
  plot_cmd->add_option("--color-by", plot_color, "Label used for colors")
      ->check(CLI::IsMember({"speaker", "accent"}));
  plot_cmd->add_option("--branch", plot_branch, "Embedding branch to plot")
      ->check(CLI::IsMember({"speaker", "accent"}));
  plot_cmd->add_option("--kind", plot_kind, "Embedding kind to plot")
      ->check(CLI::IsMember({"pre_vq", "grouped", "quantized"}));
  plot_cmd->add_option("--out", plot_out, "Output SVG")->required();

  std::string sweep_config, sweep_sizes, sweep_data, sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train once per codebook size, tabulate metrics");
  sweep_cmd->add_option("--config", sweep_config, "Model config JSON")->required();
  sweep_cmd->add_option("--codebook-sizes", sweep_sizes, "Comma-separated sizes")->required();
  sweep_cmd->add_option("--data", sweep_data, "Training dataset JSONL")->required();
  sweep_cmd->add_option("--out", sweep_out, "Output CSV")->required();
  auto* sweep_seed = sweep_cmd->add_option("--seed", seed_flag, "Base random seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  const std::string command = join_command(args);
  try {
    bool env_seed_present = false;
    std::uint64_t env_seed = 0;
    if (const char* env = std::getenv("DART_SEED")) {
      const std::string s = env;
      if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) {
            return std::isdigit(c);
          })) {
        throw UsageFailure("DART_SEED must be an unsigned integer, got '" + s + "'");
      }
      errno = 0;
      env_seed = std::strtoull(s.c_str(), nullptr, 10);
      if (errno != 0) throw UsageFailure("DART_SEED out of range: '" + s + "'");
      env_seed_present = true;
    }
    const auto resolve_seed = [&](const CLI::Option* flag, std::uint64_t fallback) {
      if (flag != nullptr && flag->count() > 0) return seed_flag;
      if (env_seed_present) return env_seed;
      return fallback;
    };

    if (synth->parsed()) {
      const std::string started = iso_utc_now();
      SynthSpec spec;
      if (!spec_path.empty()) spec = synth_spec_from_json(read_file(spec_path));
      spec.seed = resolve_seed(synth_seed, spec.seed);
      const Dataset data = synth_dataset(spec);
      save_dataset(data, out_path);
      write_manifest(out_path, command, json::parse(synth_spec_to_json(spec)), spec.seed,
                     started, {out_path}, nullptr);
    } else if (train_cmd->parsed()) {
      const std::string started = iso_utc_now();
      ModelConfig cfg = model_config_from_json(read_file(train_config));
      cfg.seed = resolve_seed(train_seed, cfg.seed);
      const Dataset data = load_dataset(train_data);
      const TrainOutcome outcome = train(cfg, data);
      save_checkpoint(outcome.model, train_out);
      const std::string history_path = train_out + ".history.csv";
      write_history_csv(history_path, outcome.history, outcome.model.config);
      json final_loss;
      if (!outcome.history.empty()) {
        const LossBreakdown& h = outcome.history.back();
        final_loss = {{"beta", h.beta},         {"codebook", h.codebook}, {"commitment", h.commitment},
                      {"kl", h.kl},             {"recon", h.recon},       {"total", h.total}};
      }
      write_manifest(train_out, command, json::parse(model_config_to_json(outcome.model.config)),
                     outcome.model.config.seed, started, {train_out, history_path},
                     outcome.history.empty() ? nullptr : &final_loss);
    } else if (conv->parsed()) {
      const std::string started = iso_utc_now();
      const Model m = load_checkpoint(conv_model);
      const Dataset data = load_dataset(conv_data);
      require_feature_match(m, data, conv_data);
      const Index idx = data.find(conv_utt);
      if (idx < 0) throw LookupError("utterance '" + conv_utt + "' not found in " + conv_data);
      const Utterance& source = data.utterances[static_cast<std::size_t>(idx)];
      Dataset converted;
      converted.utterances.push_back(Utterance{source.utterance_id, source.speaker_id,
                                               conv_target,
                                               convert(m, source, conv_target, data)});
      save_dataset(converted, conv_out);
      write_manifest(conv_out, command, json::parse(model_config_to_json(m.config)),
                     m.config.seed, started, {conv_out}, nullptr);
    } else if (eval_cmd->parsed()) {
      const auto need = [&](const std::string& value, const std::string& flag) {
        if (value.empty()) {
          throw UsageFailure("eval --task " + eval_task + " requires " + flag);
        }
      };
      json result;
      if (eval_task == "mcd") {
        need(eval_ref, "--ref");
        need(eval_syn, "--syn");
        result = eval_mcd(eval_ref, eval_syn, eval_skip_c0);
      } else if (eval_task == "ffe") {
        need(eval_ref, "--ref");
        need(eval_syn, "--syn");
        result = eval_ffe(eval_ref, eval_syn, eval_threshold);
      } else if (eval_task == "cs") {
        need(eval_ref, "--ref");
        need(eval_syn, "--syn");
        result = eval_cs(eval_ref, eval_syn, eval_branch, eval_kind);
      } else if (eval_task == "wer") {
        need(eval_ref, "--ref");
        need(eval_hyp, "--hyp");
        result = eval_wer(eval_ref, eval_hyp);
      } else if (eval_task == "bws") {
        need(eval_trials, "--trials");
        result = eval_bws(eval_trials);
      } else {
        need(eval_ratings, "--ratings");
        result = eval_mos(eval_ratings);
      }
      out << result.dump() << "\n";
    } else if (embed_cmd->parsed()) {
      const std::string started = iso_utc_now();
      const Model m = load_checkpoint(embed_model);
      const Dataset data = load_dataset(embed_data);
      require_feature_match(m, data, embed_data);
      write_embedding_csv(extract_embeddings(m, data), embed_out);
      write_manifest(embed_out, command, json::parse(model_config_to_json(m.config)),
                     m.config.seed, started, {embed_out}, nullptr);
    } else if (plot_cmd->parsed()) {
      const std::string started = iso_utc_now();
      const auto records = read_embedding_csv(plot_embeddings);
      const Branch branch = parse_branch(plot_branch);
      const EmbeddingKind kind = parse_kind(plot_kind);
      const Matrix projected = pca2(embedding_vectors(records, branch, kind));
      const auto labels = embedding_labels(records, parse_branch(plot_color));
      const std::string title =
          plot_branch + " " + plot_kind + " embeddings, colored by " + plot_color;
      write_scatter_svg(plot_out, projected, labels, title);
      const json config = {{"branch", plot_branch}, {"color_by", plot_color}, {"kind", plot_kind}};
      write_manifest(plot_out, command, config, resolve_seed(nullptr, 42), started, {plot_out},
                     nullptr);
    } else if (sweep_cmd->parsed()) {
      const std::string started = iso_utc_now();
      const ModelConfig base = model_config_from_json(read_file(sweep_config));
      const std::uint64_t base_seed = resolve_seed(sweep_seed, base.seed);
      const auto sizes = parse_codebook_sizes(sweep_sizes);
      const Dataset data = load_dataset(sweep_data);
      std::ostringstream table;
      table << "size,recon,kl,centroid_accuracy_speaker,centroid_accuracy_accent\n";
      for (const Index size : sizes) {
        ModelConfig cfg = base;
        cfg.codebook_speaker = size;
        cfg.codebook_accent = size;
        cfg.seed = base_seed + static_cast<std::uint64_t>(size);
        const TrainOutcome outcome = train(cfg, data);
        const LossBreakdown& last = outcome.history.back();
        const auto records = extract_embeddings(outcome.model, data);
        const Scalar speaker_acc =
            centroid_accuracy(embedding_vectors(records, Branch::speaker, EmbeddingKind::grouped),
                              embedding_labels(records, Branch::speaker));
        const Scalar accent_acc =
            centroid_accuracy(embedding_vectors(records, Branch::accent, EmbeddingKind::grouped),
                              embedding_labels(records, Branch::accent));
        table << size << ',' << format_g17(last.recon) << ',' << format_g17(last.kl) << ','
              << format_g17(speaker_acc) << ',' << format_g17(accent_acc) << '\n';
      }
      std::ofstream f(sweep_out, std::ios::binary);
      if (!f) throw IoError("cannot open '" + sweep_out + "' for writing");
      f << table.str();
      if (!f) throw IoError("failed writing '" + sweep_out + "'");
      f.close();
      write_manifest(sweep_out, command, json::parse(model_config_to_json(base)), base_seed,
                     started, {sweep_out}, nullptr);
    }
  } catch (const UsageFailure& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace dart
