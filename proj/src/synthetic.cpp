#include "conmask/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <vector>

#include "conmask/error.hpp"
#include "conmask/random.hpp"

namespace conmask {

namespace {

std::vector<double> gaussian(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : v) x = normal01(rng) * s;
  return v;
}

void normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

SyntheticFiles make_synthetic(const SyntheticOptions& o) {
  if (o.persons == 0 || o.persons != o.things) {
    throw UsageError("synthetic graph needs as many persons as things (and at least one)");
  }
  if (o.relations == 0 || o.dim == 0 || o.fillers == 0) {
    throw UsageError("synthetic graph needs relations, a dimension and filler words");
  }
  Rng rng(derive_seed(o.seed, 1));
  std::map<std::string, std::vector<double>> vectors;  // sorted output
  auto person = [](std::size_t i) { return "per" + std::to_string(i); };
  auto thing = [](std::size_t i) { return "obj" + std::to_string(i); };
  auto filler = [](std::size_t i) { return "filler" + std::to_string(i); };

  for (std::size_t i = 0; i < o.persons; ++i) vectors[person(i)] = gaussian(o.dim, rng);
  for (std::size_t i = 0; i < o.things; ++i) vectors[thing(i)] = gaussian(o.dim, rng);
  for (std::size_t i = 0; i < o.fillers; ++i) {
    auto v = gaussian(o.dim, rng);
    for (double& x : v) x *= o.filler_scale;
    vectors[filler(i)] = v;
  }
  for (std::size_t r = 0; r < o.relations; ++r) {
    auto rel = gaussian(o.dim, rng);
    normalize(rel);
    auto cue = rel;
    const auto noise = gaussian(o.dim, rng);
    for (std::size_t c = 0; c < o.dim; ++c) cue[c] += o.indicator_noise * noise[c];
    normalize(cue);
    vectors["relation" + std::to_string(r)] = rel;
    vectors["cue" + std::to_string(r)] = cue;
  }

  // perm[r][p] = thing linked to person p by relation r
  std::vector<std::vector<std::size_t>> perm(o.relations, std::vector<std::size_t>(o.persons));
  for (auto& p : perm) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(p), rng);
  }
  std::vector<std::vector<std::size_t>> inverse(o.relations, std::vector<std::size_t>(o.things));
  for (std::size_t r = 0; r < o.relations; ++r)
    for (std::size_t p = 0; p < o.persons; ++p) inverse[r][perm[r][p]] = p;

  SyntheticFiles f;
  auto pick_filler = [&] { return filler(static_cast<std::size_t>(uniform_index(rng, o.fillers))); };
  auto describe = [&](const std::string& self, auto&& partner_of) {
    std::string text = self + " " + pick_filler() + " " + pick_filler();
    std::vector<std::size_t> order(o.relations);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t r : order) {
      text += " cue" + std::to_string(r) + " " + pick_filler() + " " + partner_of(r);
      for (int i = 0; i < 4; ++i) text += " " + pick_filler();
    }
    return text;
  };

  for (std::size_t p = 0; p < o.persons; ++p) {
    f.names += "person_" + std::to_string(p) + "\t" + person(p) + "\n";
    f.descriptions += "person_" + std::to_string(p) + "\t" +
                      describe(person(p), [&](std::size_t r) { return thing(perm[r][p]); }) + "\n";
  }
  for (std::size_t t = 0; t < o.things; ++t) {
    f.names += "thing_" + std::to_string(t) + "\t" + thing(t) + "\n";
    f.descriptions += "thing_" + std::to_string(t) + "\t" +
                      describe(thing(t), [&](std::size_t r) { return person(inverse[r][t]); }) + "\n";
  }
  for (std::size_t r = 0; r < o.relations; ++r) {
    f.names += "rel_" + std::to_string(r) + "\trelation" + std::to_string(r) + "\n";
  }
  // Triples grouped by person so every entity appears early in the file.
  for (std::size_t p = 0; p < o.persons; ++p)
    for (std::size_t r = 0; r < o.relations; ++r) {
      f.triples += "person_" + std::to_string(p) + "\trel_" + std::to_string(r) + "\tthing_" +
                   std::to_string(perm[r][p]) + "\n";
    }
  for (const auto& [word, v] : vectors) {
    f.vectors += word;
    for (double x : v) f.vectors += " " + format_double(x);
    f.vectors += "\n";
  }
  return f;
}

void write_synthetic(const SyntheticFiles& files, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << text;
  };
  write("triples.tsv", files.triples);
  write("names.tsv", files.names);
  write("descriptions.tsv", files.descriptions);
  write("vectors.txt", files.vectors);
}

}  // namespace conmask
