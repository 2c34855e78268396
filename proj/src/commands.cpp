#include "conmask/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "conmask/bundle.hpp"
#include "conmask/checkpoint.hpp"
#include "conmask/config.hpp"
#include "conmask/error.hpp"
#include "conmask/hashing.hpp"
#include "conmask/trainer.hpp"
#include "json.hpp"

namespace conmask {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

ordered_json file_entry(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("cannot open " + path.string());
  return {{"path", path.string()}, {"sha1", git_blob_sha1_file(path)}};
}

// Hashes of the split files, in a fixed order.
ordered_json split_entry(const fs::path& dir) {
  ordered_json j;
  j["path"] = dir.string();
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "train_entities.txt", "manifest.json"}) {
    j[f] = git_blob_sha1_file(dir / f);
  }
  return j;
}

class RunManifest {
 public:
  explicit RunManifest(std::string command) {
    j_["command"] = std::move(command);
    j_["tool_version"] = kToolVersion;
    j_["started_at"] = utc_now();
  }
  ordered_json& operator[](const char* key) { return j_[key]; }
  void write(const fs::path& dir) {
    fs::create_directories(dir);
    write_file(dir / "manifest.json");
  }
  void write_file(const fs::path& path) {
    j_["finished_at"] = utc_now();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j_.dump(2) << '\n';
  }

 private:
  ordered_json j_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::vector<Triple> pick_queries(const Split& split, const std::string& which) {
  if (which == "test") return split.test;
  if (which == "valid") return split.validation;
  if (which == "train") return split.train;
  throw UsageError("--queries must be test, valid or train, got '" + which + "'");
}

// Checkpoint metadata: input hashes as comments, then the config.
std::string checkpoint_metadata(const ordered_json& inputs, const TrainConfig& config) {
  std::string meta;
  for (const auto& [name, entry] : inputs.items()) {
    meta += "# " + name + " " + entry.value("sha1", entry.dump()) + "\n";
  }
  return meta + config.to_text();
}

}  // namespace

std::string to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kConmask: return "conmask";
    case ScorerKind::kSemavg: return "semavg";
    case ScorerKind::kRandom: return "random";
  }
  return "?";
}

ScorerKind parse_scorer(std::string_view text) {
  if (text == "conmask") return ScorerKind::kConmask;
  if (text == "semavg") return ScorerKind::kSemavg;
  if (text == "random") return ScorerKind::kRandom;
  throw UsageError("scorer must be conmask, semavg or random, got '" + std::string(text) + "'");
}

void cmd_preprocess(const PreprocessArgs& args) {
  RunManifest m("preprocess");
  m["inputs"] = {{"triples", file_entry(args.triples)},
                 {"names", file_entry(args.names)},
                 {"descriptions", file_entry(args.descriptions)},
                 {"vectors", file_entry(args.vectors)}};
  m["min_count"] = args.min_count;
  const CorpusBundle b = build_bundle(args.triples, args.names, args.descriptions, args.vectors, args.min_count);
  fs::create_directories(args.out);
  write_bundle(args.out / "bundle.bin", b);
  m["outputs"] = {{"bundle", file_entry(args.out / "bundle.bin")}};
  m["counts"] = {{"entities", b.graph.num_entities()},
                 {"relations", b.graph.num_relations()},
                 {"triples", b.graph.triples.size()},
                 {"words", b.embeddings.size()},
                 {"dim", b.embeddings.dim()}};
  m.write(args.out);
}

Split cmd_split(const SplitArgs& args) {
  RunManifest m("split");
  m["inputs"] = {{"bundle", file_entry(args.bundle)}};
  const CorpusBundle b = read_bundle(args.bundle);
  Split s = make_split(b.graph, args.spec);
  ordered_json extra;
  extra["command"] = "split";
  extra["tool_version"] = kToolVersion;
  extra["inputs"] = {{"bundle", file_entry(args.bundle)}};
  write_split(s, b.graph, args.out, extra.dump());
  return s;
}

void cmd_train(const TrainArgs& args) {
  RunManifest m("train");
  ordered_json inputs = {{"bundle", file_entry(args.bundle)}, {"split", split_entry(args.split)}};
  TrainConfig config = args.config.empty() ? TrainConfig{} : load_config(args.config);
  if (!args.config.empty()) inputs["config"] = file_entry(args.config);
  for (const auto& [k, v] : args.overrides) set_config_value(config, k, v);
  config.validate();
  m["inputs"] = inputs;
  m["seed"] = config.seed;
  m["config"] = config.to_text();

  const CorpusBundle b = read_bundle(args.bundle);
  if (b.embeddings.dim() != config.dim) {
    throw UsageError("config dim " + std::to_string(config.dim) + " does not match the bundle's " +
                     std::to_string(b.embeddings.dim()) + "-d vectors");
  }
  const Split split = read_split(b.graph, args.split);
  const Corpus corpus = Corpus::build(b.graph, b.embeddings, config.max_content_len, config.max_name_len);
  Rng init(derive_seed(config.seed, 100));
  ModelParams params(b.embeddings, config.conv_width, init);

  fs::create_directories(args.out);
  write_text(args.out / "config.txt", config.to_text());
  Trainer trainer(params, corpus, split.train, split.train_entities, config);
  TrainRunOptions o;
  o.out_dir = args.out;
  o.validation = split.validation;
  o.checkpoint_metadata = checkpoint_metadata(inputs, config);
  const auto log = train(trainer, o);
  m["epochs"] = log.size();
  m["final_loss"] = log.empty() ? 0.0 : log.back().mean_loss;
  m["outputs"] = {{"checkpoint", file_entry(args.out / "checkpoint.bin")},
                  {"metrics", file_entry(args.out / "metrics.csv")}};
  m.write(args.out);
}

RankingReport cmd_evaluate(const EvaluateArgs& args) {
  RunManifest m("evaluate");
  ordered_json inputs;
  inputs["bundle"] = file_entry(args.bundle);
  inputs["split"] = split_entry(args.split);
  if (!args.checkpoint.empty()) inputs["checkpoint"] = file_entry(args.checkpoint);
  m["inputs"] = inputs;
  m["scorer"] = to_string(args.scorer);
  m["queries"] = args.queries;
  m["protocol"] = args.filtered ? "filtered" : "raw";
  m["seed"] = args.seed;

  const CorpusBundle b = read_bundle(args.bundle);
  const Split split = read_split(b.graph, args.split);
  const std::vector<Triple> queries = pick_queries(split, args.queries);
  const TripleIndex train(split.train);
  const TripleIndex known(b.graph.triples);
  RankingOptions ro;
  ro.filtered = args.filtered;

  RankingReport report;
  if (args.scorer == ScorerKind::kConmask) {
    if (args.checkpoint.empty()) throw UsageError("the conmask scorer needs --checkpoint");
    const Checkpoint ckpt = read_checkpoint(args.checkpoint);
    const TrainConfig config = parse_config(ckpt.metadata, args.checkpoint.string());
    const Corpus corpus = Corpus::build(b.graph, b.embeddings, config.max_content_len, config.max_name_len);
    Rng init(0);
    ModelParams params(b.embeddings, config.conv_width, init);
    restore(params, ckpt);
    InferenceScorer scorer(params, corpus, config.model_options());
    report = rank_queries(queries, conmask_scorer(scorer), train, ro, &known);
  } else if (args.scorer == ScorerKind::kSemavg) {
    const Corpus corpus = Corpus::build(b.graph, b.embeddings);
    const SemanticAverageScorer sem(b.embeddings, corpus);
    report = rank_queries(
        queries, [&](const Triple& q, Side s, std::span<const EntityId> c) { return sem(q, s, c); }, train, ro,
        &known);
  } else {
    report = rank_queries(queries, random_scorer(args.seed), train, ro, &known);
  }

  fs::create_directories(args.out);
  write_text(args.out / "report.json", report.to_json() + "\n");
  write_text(args.out / "ranks.csv", report.rows_csv());
  m["summary"] = ordered_json::parse(report.to_json());
  m.write(args.out);
  return report;
}

std::string cmd_inspect_mask(const InspectMaskArgs& args) {
  RunManifest m("inspect-mask");
  m["inputs"] = {{"bundle", file_entry(args.bundle)}};
  m["entity"] = args.entity;
  m["relation"] = args.relation;
  m["mode"] = to_string(args.mode);
  m["window"] = args.window;

  const CorpusBundle b = read_bundle(args.bundle);
  const auto e = b.graph.entities.find(args.entity);
  if (!e) throw DataError("unknown entity '" + args.entity + "'");
  const auto r = b.graph.relations.find(args.relation);
  if (!r) throw DataError("unknown relation '" + args.relation + "'");
  const auto& tokens = b.graph.entity_descriptions[static_cast<std::size_t>(*e)];
  if (tokens.empty()) throw DataError("entity '" + args.entity + "' has no description");
  const auto& rel_tokens = b.graph.relation_names[static_cast<std::size_t>(*r)];

  auto rows = [&](const std::vector<std::string>& words) {
    const auto& table = b.embeddings.vectors.value;
    nk::Tensor t({words.size(), table.cols()});
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto src = table.row_span(static_cast<std::size_t>(b.embeddings.lookup(words[i])));
      std::copy(src.begin(), src.end(), t.row_span(i).begin());
    }
    return t;
  };
  const MaskedContent mc = apply_mask(rows(tokens), rows(rel_tokens), {args.window, args.mode});

  std::ostringstream csv;
  csv << std::setprecision(17) << "token,mwrw,mcrw\n";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    csv << tokens[i] << ',' << mc.mwrw[i] << ',' << mc.mcrw[i] << '\n';
  }
  if (!args.out.empty()) {
    if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
    write_text(args.out, csv.str());
    m.write_file(fs::path(args.out.string() + ".manifest.json"));
  }
  return csv.str();
}

void cmd_make_synthetic(const SyntheticArgs& args) {
  RunManifest m("make-synthetic");
  const SyntheticOptions& o = args.options;
  m["seed"] = o.seed;
  m["options"] = {{"persons", o.persons},         {"things", o.things},
                  {"relations", o.relations},     {"dim", o.dim},
                  {"fillers", o.fillers},         {"indicator_noise", o.indicator_noise},
                  {"filler_scale", o.filler_scale}};
  write_synthetic(make_synthetic(o), args.out);
  m.write(args.out);
}

}  // namespace conmask
