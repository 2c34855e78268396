#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

namespace conmask {

// A small graph where text alone determines the answer: every relation is a
// bijection from "person" entities to "thing" entities, and each entity's
// description contains, per relation, an indicator word (a noisy synonym of
// the relation name) followed two tokens later by the name of the entity it
// is linked to. Word vectors are random Gaussians of norm about 1.
struct SyntheticOptions {
  std::size_t persons = 25;
  std::size_t things = 25;
  std::size_t relations = 5;
  std::size_t dim = 32;
  std::size_t fillers = 40;
  double indicator_noise = 0.3;
  // Filler words play the part of low-content words and get short vectors.
  double filler_scale = 0.3;
  std::uint64_t seed = 1;
};

// The four input files in the formats load_graph / load_embeddings read.
struct SyntheticFiles {
  std::string triples;
  std::string names;
  std::string descriptions;
  std::string vectors;
};

SyntheticFiles make_synthetic(const SyntheticOptions& options);
// Writes triples.tsv, names.tsv, descriptions.tsv and vectors.txt.
void write_synthetic(const SyntheticFiles& files, const std::filesystem::path& dir);

}  // namespace conmask
