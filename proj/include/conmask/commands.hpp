#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "conmask/evaluator.hpp"
#include "conmask/masking.hpp"
#include "conmask/split.hpp"
#include "conmask/synthetic.hpp"

// The pipeline steps behind the command-line tool. Each one writes its
// outputs plus a manifest.json into its output directory.
namespace conmask {

struct PreprocessArgs {
  std::filesystem::path triples, names, descriptions, vectors, out;
  std::size_t min_count = 0;
};

struct SplitArgs {
  std::filesystem::path bundle, out;
  SplitSpec spec;
};

struct TrainArgs {
  std::filesystem::path bundle, split, config, out;
  // key=value overrides applied after the config file.
  std::vector<std::pair<std::string, std::string>> overrides;
};

enum class ScorerKind { kConmask, kSemavg, kRandom };
std::string to_string(ScorerKind kind);
ScorerKind parse_scorer(std::string_view text);

struct EvaluateArgs {
  std::filesystem::path checkpoint, bundle, split, out;
  ScorerKind scorer = ScorerKind::kConmask;
  std::string queries = "test";  // test, valid or train
  bool filtered = false;
  std::uint64_t seed = 0;        // random scorer
};

struct InspectMaskArgs {
  std::filesystem::path bundle, out;
  std::string entity, relation;
  MaskMode mode = MaskMode::kMcrw;
  std::size_t window = 6;
};

struct SyntheticArgs {
  std::filesystem::path out;
  SyntheticOptions options;
};

void cmd_preprocess(const PreprocessArgs& args);
Split cmd_split(const SplitArgs& args);
void cmd_train(const TrainArgs& args);
RankingReport cmd_evaluate(const EvaluateArgs& args);
// token,mwrw,mcrw rows; also returned as text.
std::string cmd_inspect_mask(const InspectMaskArgs& args);
void cmd_make_synthetic(const SyntheticArgs& args);

}  // namespace conmask
