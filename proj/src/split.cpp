#include "conmask/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "conmask/error.hpp"
#include "conmask/random.hpp"
#include "json.hpp"

namespace conmask {

namespace {

std::size_t rounded_share(double fraction, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

void split_pool(std::vector<Triple> pool, double test_share, Rng& rng, std::vector<Triple>& validation,
                std::vector<Triple>& test) {
  shuffle(std::span<Triple>(pool), rng);
  const std::size_t n_test = rounded_share(test_share, pool.size());
  test.insert(test.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
  validation.insert(validation.end(), pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());
}

}  // namespace

std::string to_string(SplitMode mode) { return mode == SplitMode::kOpen ? "open" : "closed"; }

SplitMode parse_split_mode(std::string_view text) {
  if (text == "open") return SplitMode::kOpen;
  if (text == "closed") return SplitMode::kClosed;
  throw UsageError("split mode must be open or closed, got '" + std::string(text) + "'");
}

void SplitSpec::validate() const {
  if (!(entity_keep_fraction > 0.0 && entity_keep_fraction <= 1.0)) {
    throw UsageError("entity keep fraction must be in (0, 1]");
  }
  if (!(edge_holdout_fraction >= 0.0 && edge_holdout_fraction <= 1.0)) {
    throw UsageError("edge holdout fraction must be in [0, 1]");
  }
  if (!(test_share >= 0.0 && test_share <= 1.0)) throw UsageError("test share must be in [0, 1]");
}

Split make_split(const KnowledgeGraph& g, const SplitSpec& spec) {
  spec.validate();
  Split s;
  s.spec = spec;
  const std::size_t n = g.num_entities();

  s.in_train.assign(n, true);
  if (spec.mode == SplitMode::kOpen) {
    std::vector<EntityId> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<EntityId>(i);
    Rng rng(derive_seed(spec.seed, 1));
    shuffle(std::span<EntityId>(order), rng);
    const std::size_t keep = rounded_share(spec.entity_keep_fraction, n);
    s.in_train.assign(n, false);
    for (std::size_t i = 0; i < keep; ++i) s.in_train[static_cast<std::size_t>(order[i])] = true;
  }
  for (std::size_t e = 0; e < n; ++e) {
    if (s.in_train[e]) s.train_entities.push_back(static_cast<EntityId>(e));
  }

  auto kept = [&](EntityId e) { return s.in_train[static_cast<std::size_t>(e)]; };
  std::vector<std::size_t> induced;
  std::vector<Triple> open_pool;
  for (std::size_t i = 0; i < g.triples.size(); ++i) {
    const Triple& t = g.triples[i];
    const int seen = static_cast<int>(kept(t.head)) + static_cast<int>(kept(t.tail));
    if (seen == 2) {
      induced.push_back(i);
    } else {
      if (seen == 0) ++s.counts.both_unseen;
      open_pool.push_back(t);
    }
  }

  std::vector<std::size_t> order = induced;
  Rng edge_rng(derive_seed(spec.seed, 2));
  shuffle(std::span<std::size_t>(order), edge_rng);
  const std::size_t n_hold = rounded_share(spec.edge_holdout_fraction, order.size());
  std::vector<bool> held(g.triples.size(), false);
  std::vector<Triple> held_edges;
  for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = true;
  for (std::size_t i : induced) {
    if (held[i]) {
      held_edges.push_back(g.triples[i]);
    } else {
      s.train.push_back(g.triples[i]);
    }
  }
  if (s.train.empty()) throw DataError("split: induced training graph is empty");

  Rng pool_rng(derive_seed(spec.seed, 3));
  if (spec.mode == SplitMode::kOpen) {
    s.validation = held_edges;
    split_pool(std::move(open_pool), spec.test_share, pool_rng, s.validation, s.test);
  } else {
    split_pool(std::move(held_edges), spec.test_share, pool_rng, s.validation, s.test);
  }

  s.counts.entities = n;
  s.counts.train_entities = s.train_entities.size();
  s.counts.triples = g.triples.size();
  s.counts.induced = induced.size();
  s.counts.held_out_edges = n_hold;
  s.counts.train = s.train.size();
  s.counts.validation = s.validation.size();
  s.counts.test = s.test.size();
  return s;
}

std::string Split::manifest_json() const {
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["mode"] = to_string(spec.mode);
  j["entity_keep_fraction"] = spec.entity_keep_fraction;
  j["edge_holdout_fraction"] = spec.edge_holdout_fraction;
  j["test_share"] = spec.test_share;
  j["counts"] = {{"entities", counts.entities},
                 {"train_entities", counts.train_entities},
                 {"triples", counts.triples},
                 {"induced", counts.induced},
                 {"held_out_edges", counts.held_out_edges},
                 {"train", counts.train},
                 {"validation", counts.validation},
                 {"test", counts.test},
                 {"both_unseen", counts.both_unseen}};
  return j.dump(2);
}

void write_split(const Split& split, const KnowledgeGraph& g, const std::filesystem::path& dir,
                 const std::string& extra_manifest_json) {
  std::filesystem::create_directories(dir);
  auto write_triples = [&](const std::vector<Triple>& triples, const char* file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / file).string());
    for (const Triple& t : triples) {
      out << g.entities.name(t.head) << '\t' << g.relations.name(t.relation) << '\t'
          << g.entities.name(t.tail) << '\n';
    }
  };
  write_triples(split.train, "train.tsv");
  write_triples(split.validation, "valid.tsv");
  write_triples(split.test, "test.tsv");
  {
    std::ofstream out(dir / "train_entities.txt", std::ios::binary);
    for (EntityId e : split.train_entities) out << g.entities.name(e) << '\n';
  }
  auto manifest = nlohmann::ordered_json::parse(split.manifest_json());
  if (!extra_manifest_json.empty()) {
    const auto extra = nlohmann::ordered_json::parse(extra_manifest_json);
    for (const auto& [k, v] : extra.items()) manifest[k] = v;
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

std::vector<Triple> read_triples(const KnowledgeGraph& g, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Triple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    const auto h = g.entities.find(line.substr(0, t1));
    const auto r = g.relations.find(line.substr(t1 + 1, t2 - t1 - 1));
    const auto t = g.entities.find(line.substr(t2 + 1));
    if (!h || !r || !t) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown entity or relation");
    }
    out.push_back(Triple{*h, *r, *t});
  }
  return out;
}

Split read_split(const KnowledgeGraph& g, const std::filesystem::path& dir) {
  Split s;
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DataError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(mf);
    s.spec.seed = j.at("seed").get<std::uint64_t>();
    s.spec.mode = parse_split_mode(j.at("mode").get<std::string>());
    s.spec.entity_keep_fraction = j.at("entity_keep_fraction").get<double>();
    s.spec.edge_holdout_fraction = j.at("edge_holdout_fraction").get<double>();
    s.spec.test_share = j.value("test_share", 0.5);
    const auto& c = j.at("counts");
    s.counts.entities = c.at("entities");
    s.counts.train_entities = c.at("train_entities");
    s.counts.triples = c.at("triples");
    s.counts.induced = c.at("induced");
    s.counts.held_out_edges = c.at("held_out_edges");
    s.counts.both_unseen = c.at("both_unseen");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed split manifest: " + std::string(e.what()));
  }
  s.train = read_triples(g, dir / "train.tsv");
  s.validation = read_triples(g, dir / "valid.tsv");
  s.test = read_triples(g, dir / "test.tsv");
  s.counts.train = s.train.size();
  s.counts.validation = s.validation.size();
  s.counts.test = s.test.size();

  s.in_train.assign(g.num_entities(), false);
  std::ifstream in(dir / "train_entities.txt");
  if (!in) throw DataError("cannot open " + (dir / "train_entities.txt").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto e = g.entities.find(line);
    if (!e) throw DataError("train_entities.txt: unknown entity " + line);
    s.in_train[static_cast<std::size_t>(*e)] = true;
  }
  for (std::size_t e = 0; e < g.num_entities(); ++e) {
    if (s.in_train[e]) s.train_entities.push_back(static_cast<EntityId>(e));
  }
  return s;
}

}  // namespace conmask
