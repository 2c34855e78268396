#include "conmask/knowledge_graph.hpp"

#include <fstream>

#include "conmask/error.hpp"
#include "conmask/tokenizer.hpp"

namespace conmask {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Reads `key<TAB>text` rows into a map; later duplicates are ignored.
std::unordered_map<std::string, std::string> read_text_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::unordered_map<std::string, std::string> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = strip_cr(line);
    if (view.empty()) continue;
    const std::size_t tab = view.find('\t');
    if (tab == std::string_view::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected id<TAB>text");
    }
    rows.emplace(std::string(view.substr(0, tab)), std::string(view.substr(tab + 1)));
  }
  return rows;
}

}  // namespace

std::int32_t Interner::intern(std::string_view key) {
  auto it = ids_.find(std::string(key));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.emplace_back(key);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::int32_t> Interner::find(std::string_view key) const {
  auto it = ids_.find(std::string(key));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph load_graph(const std::filesystem::path& triples_path,
                          const std::filesystem::path& names_path,
                          const std::filesystem::path& descriptions_path) {
  KnowledgeGraph g;
  {
    auto in = open_input(triples_path);
    TripleSet seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string_view view = strip_cr(line);
      if (view.empty()) continue;
      const auto fields = split_tabs(view);
      if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
        throw DataError(triples_path.string() + ":" + std::to_string(line_no) +
                        ": expected head<TAB>relation<TAB>tail");
      }
      Triple t;
      t.head = g.entities.intern(fields[0]);
      t.relation = g.relations.intern(fields[1]);
      t.tail = g.entities.intern(fields[2]);
      if (seen.insert(t).second) g.triples.push_back(t);
    }
  }

  const auto names = read_text_table(names_path);
  const auto descriptions = read_text_table(descriptions_path);

  std::vector<std::string> unnamed;
  g.entity_names.resize(g.num_entities());
  g.entity_descriptions.resize(g.num_entities());
  for (std::size_t e = 0; e < g.num_entities(); ++e) {
    const std::string& key = g.entities.name(static_cast<EntityId>(e));
    auto it = names.find(key);
    if (it == names.end()) {
      unnamed.push_back(key);
      continue;
    }
    g.entity_names[e] = tokenize(it->second);
    if (g.entity_names[e].empty()) g.entity_names[e] = tokenize(key);
    if (g.entity_names[e].empty()) {
      throw DataError("entity " + key + " has a name row with no usable tokens");
    }
    if (auto d = descriptions.find(key); d != descriptions.end()) {
      g.entity_descriptions[e] = tokenize(d->second);
    }
  }
  if (!unnamed.empty()) {
    std::string msg = "entities referenced by triples have no name row:";
    for (std::size_t i = 0; i < unnamed.size() && i < 20; ++i) msg += " " + unnamed[i];
    if (unnamed.size() > 20) msg += " ... (" + std::to_string(unnamed.size()) + " total)";
    throw DataError(msg);
  }

  g.relation_names.resize(g.num_relations());
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    const std::string& key = g.relations.name(static_cast<RelationId>(r));
    auto it = names.find(key);
    if (it != names.end()) g.relation_names[r] = tokenize(it->second);
    if (g.relation_names[r].empty()) g.relation_names[r] = tokenize(key);
    if (g.relation_names[r].empty()) throw DataError("relation " + key + " has no usable name tokens");
  }
  return g;
}

std::unordered_map<std::string, std::size_t> word_counts(const KnowledgeGraph& g) {
  std::unordered_map<std::string, std::size_t> counts;
  auto add_all = [&](const std::vector<std::vector<std::string>>& lists) {
    for (const auto& tokens : lists)
      for (const auto& t : tokens) ++counts[t];
  };
  add_all(g.entity_names);
  add_all(g.entity_descriptions);
  add_all(g.relation_names);
  return counts;
}

std::unordered_set<std::string> corpus_vocabulary(const KnowledgeGraph& g, std::size_t min_count) {
  std::unordered_set<std::string> vocab;
  for (const auto& [word, count] : word_counts(g)) {
    if (count > min_count) vocab.insert(word);
  }
  return vocab;
}

}  // namespace conmask
