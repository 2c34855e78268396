#include "conmask/embeddings.hpp"

#include <charconv>
#include <fstream>

#include "conmask/error.hpp"

namespace conmask {

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, nk::Tensor matrix, bool trainable)
    : vectors("word_vectors", std::move(matrix), trainable), words_(std::move(words)) {
  if (vectors.value.rank() != 2 || vectors.value.rows() != words_.size()) {
    throw ShapeError("embedding matrix " + vectors.value.shape_string() + " does not match " +
                     std::to_string(words_.size()) + " words");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], static_cast<std::int32_t>(i));
  }
}

std::int32_t EmbeddingTable::lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kOovIndex : it->second;
}

std::vector<std::int32_t> EmbeddingTable::lookup_all(std::span<const std::string> tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::unordered_set<std::string>& vocabulary,
                               std::size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  std::vector<std::string> words{std::string(kOovToken)};
  std::unordered_set<std::string> taken;
  std::vector<double> data;
  std::size_t dim = expected_dim;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    fields.clear();
    std::size_t i = 0;
    while (i < view.size()) {
      while (i < view.size() && (view[i] == ' ' || view[i] == '\t')) ++i;
      const std::size_t start = i;
      while (i < view.size() && view[i] != ' ' && view[i] != '\t') ++i;
      if (i > start) fields.push_back(view.substr(start, i - start));
    }
    if (fields.empty()) continue;
    if (dim == 0) {
      if (fields.size() < 2) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": no vector values");
      }
      dim = fields.size() - 1;
    }
    if (fields.size() != dim + 1) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(dim + 1) + " fields, found " + std::to_string(fields.size()));
    }
    const std::string word(fields[0]);
    if (!vocabulary.contains(word) || taken.contains(word)) continue;
    if (data.empty()) data.assign(dim, 0.0);  // OOV row
    for (std::size_t j = 1; j <= dim; ++j) {
      double v = 0.0;
      const auto* first = fields[j].data();
      const auto* last = first + fields[j].size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                        std::string(fields[j]) + "'");
      }
      data.push_back(v);
    }
    taken.insert(word);
    words.push_back(word);
  }
  if (dim == 0) throw DataError(path.string() + ": no vectors found");
  if (data.empty()) data.assign(dim, 0.0);
  const std::size_t rows = words.size();
  return EmbeddingTable(std::move(words), nk::Tensor({rows, dim}, std::move(data)));
}

PaddedSequence truncate_pad(std::span<const std::int32_t> ids, std::size_t max_len) {
  if (max_len == 0) throw UsageError("truncate_pad: max_len must be at least 1");
  PaddedSequence out;
  out.valid = std::min(ids.size(), max_len);
  out.ids.assign(max_len, kPadIndex);
  std::copy_n(ids.begin(), out.valid, out.ids.begin());
  return out;
}

Corpus Corpus::build(const KnowledgeGraph& g, const EmbeddingTable& table,
                     std::size_t max_content_len, std::size_t max_name_len) {
  auto ids_of = [&](const std::vector<std::string>& tokens, std::size_t max_len) {
    auto ids = table.lookup_all(tokens);
    if (ids.size() > max_len) ids.resize(max_len);
    return ids;
  };
  Corpus c;
  c.entity_name_ids.reserve(g.num_entities());
  c.entity_desc_ids.reserve(g.num_entities());
  for (std::size_t e = 0; e < g.num_entities(); ++e) {
    c.entity_name_ids.push_back(ids_of(g.entity_names[e], max_name_len));
    const bool fallback = g.entity_descriptions[e].empty();
    c.description_fallback.push_back(fallback);
    c.entity_desc_ids.push_back(
        ids_of(fallback ? g.entity_names[e] : g.entity_descriptions[e], max_content_len));
  }
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    c.relation_name_ids.push_back(ids_of(g.relation_names[r], max_name_len));
  }
  return c;
}

}  // namespace conmask
