#include "conmask/bundle.hpp"

#include <fstream>
#include <sstream>

#include "conmask/binary_io.hpp"
#include "conmask/error.hpp"
#include "conmask/tokenizer.hpp"

namespace conmask {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'B', 'U', 'N', 'D', 'L', 'E'};

void put_tokens(std::string& out, const std::vector<std::string>& tokens) {
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) bin::put_string(out, t);
}

std::vector<std::string> get_tokens(bin::Reader& in) {
  const auto n = in.get<std::uint32_t>("token count");
  if (n > in.remaining() / 4) throw DataError("bundle truncated in token list");
  std::vector<std::string> out(n);
  for (auto& t : out) t = in.string("token");
  return out;
}

}  // namespace

CorpusBundle build_bundle(const std::filesystem::path& triples, const std::filesystem::path& names,
                          const std::filesystem::path& descriptions,
                          const std::filesystem::path& vectors, std::size_t min_count) {
  CorpusBundle b;
  b.graph = load_graph(triples, names, descriptions);
  b.embeddings = load_embeddings(vectors, corpus_vocabulary(b.graph, min_count));
  b.stop_list_version = std::string(kStopWordListVersion);
  b.min_count = min_count;
  return b;
}

std::string serialize_bundle(const CorpusBundle& b) {
  const KnowledgeGraph& g = b.graph;
  std::string out(kMagic, sizeof kMagic);
  bin::put<std::uint32_t>(out, kBundleVersion);
  bin::put_string(out, b.stop_list_version);
  bin::put<std::uint64_t>(out, b.min_count);
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.num_entities()));
  for (std::size_t e = 0; e < g.num_entities(); ++e) {
    bin::put_string(out, g.entities.name(static_cast<EntityId>(e)));
    put_tokens(out, g.entity_names[e]);
    put_tokens(out, g.entity_descriptions[e]);
  }
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.num_relations()));
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    bin::put_string(out, g.relations.name(static_cast<RelationId>(r)));
    put_tokens(out, g.relation_names[r]);
  }
  bin::put<std::uint64_t>(out, g.triples.size());
  for (const Triple& t : g.triples) {
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.head));
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.relation));
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.tail));
  }
  const auto& words = b.embeddings.words();
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(words.size()));
  for (const auto& w : words) bin::put_string(out, w);
  bin::put<std::uint64_t>(out, b.embeddings.dim());
  for (double v : b.embeddings.vectors.value.data()) bin::put_f64(out, v);
  return out;
}

CorpusBundle deserialize_bundle(const std::string& bytes) {
  bin::Reader in(bytes, "bundle");
  if (in.bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw DataError("not a corpus bundle (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kBundleVersion) {
    throw DataError("bundle version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kBundleVersion) + ")");
  }
  CorpusBundle b;
  KnowledgeGraph& g = b.graph;
  b.stop_list_version = in.string("stop list version");
  b.min_count = in.get<std::uint64_t>("min count");
  const auto n_ent = in.get<std::uint32_t>("entity count");
  for (std::uint32_t e = 0; e < n_ent; ++e) {
    if (g.entities.intern(in.string("entity id")) != static_cast<EntityId>(e)) {
      throw DataError("bundle has a duplicate entity id");
    }
    g.entity_names.push_back(get_tokens(in));
    g.entity_descriptions.push_back(get_tokens(in));
  }
  const auto n_rel = in.get<std::uint32_t>("relation count");
  for (std::uint32_t r = 0; r < n_rel; ++r) {
    if (g.relations.intern(in.string("relation id")) != static_cast<RelationId>(r)) {
      throw DataError("bundle has a duplicate relation id");
    }
    g.relation_names.push_back(get_tokens(in));
  }
  const auto n_triples = in.get<std::uint64_t>("triple count");
  if (n_triples > in.remaining() / 12) throw DataError("bundle truncated in triples");
  g.triples.reserve(n_triples);
  for (std::uint64_t i = 0; i < n_triples; ++i) {
    Triple t;
    t.head = static_cast<EntityId>(in.get<std::uint32_t>("triple"));
    t.relation = static_cast<RelationId>(in.get<std::uint32_t>("triple"));
    t.tail = static_cast<EntityId>(in.get<std::uint32_t>("triple"));
    if (t.head < 0 || t.tail < 0 || static_cast<std::uint32_t>(t.head) >= n_ent ||
        static_cast<std::uint32_t>(t.tail) >= n_ent || t.relation < 0 ||
        static_cast<std::uint32_t>(t.relation) >= n_rel) {
      throw DataError("bundle triple references an unknown id");
    }
    g.triples.push_back(t);
  }
  const auto n_words = in.get<std::uint32_t>("word count");
  std::vector<std::string> words(n_words);
  for (auto& w : words) w = in.string("word");
  const auto dim = in.get<std::uint64_t>("dimension");
  if (dim == 0 || n_words > in.remaining() / 8 / dim) throw DataError("bundle truncated in vectors");
  std::vector<double> data(static_cast<std::size_t>(n_words * dim));
  for (double& v : data) v = in.get_f64("vectors");
  if (!in.done()) throw DataError("bundle has trailing bytes");
  b.embeddings = EmbeddingTable(std::move(words), nk::Tensor({n_words, static_cast<std::size_t>(dim)}, std::move(data)));
  return b;
}

void write_bundle(const std::filesystem::path& path, const CorpusBundle& bundle) {
  const std::string bytes = serialize_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

CorpusBundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_bundle(ss.str());
}

}  // namespace conmask
