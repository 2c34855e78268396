// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "conmask/bundle.hpp"
#include "conmask/commands.hpp"
#include "conmask/error.hpp"
#include "conmask/evaluator.hpp"
#include "conmask/grad_check.hpp"
#include "conmask/masking.hpp"
#include "conmask/model.hpp"
#include "conmask/tokenizer.hpp"
#include "conmask/trainer.hpp"
#include "toy_kg.hpp"

using namespace conmask;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("conmask_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Synthetic graph written, preprocessed and split through the pipeline
// commands.
struct SyntheticRun {
  CorpusBundle bundle;
  Split split;
  fs::path bundle_path, split_dir;
};

SyntheticRun synthetic_run(std::uint64_t seed, double test_share) {
  const fs::path root = work_dir() / ("syn_" + std::to_string(seed) + "_" + std::to_string(test_share));
  SyntheticArgs sa;
  sa.out = root / "raw";
  sa.options.seed = seed;
  cmd_make_synthetic(sa);
  PreprocessArgs pa{sa.out / "triples.tsv", sa.out / "names.tsv", sa.out / "descriptions.tsv",
                    sa.out / "vectors.txt", root / "pre"};
  cmd_preprocess(pa);
  SplitArgs spa;
  spa.bundle = root / "pre/bundle.bin";
  spa.out = root / "split";
  spa.spec.mode = SplitMode::kOpen;
  spa.spec.entity_keep_fraction = 0.8;
  spa.spec.edge_holdout_fraction = 0.0;
  spa.spec.test_share = test_share;
  spa.spec.seed = seed;
  cmd_split(spa);
  SyntheticRun run;
  run.bundle_path = spa.bundle;
  run.split_dir = spa.out;
  run.bundle = read_bundle(spa.bundle);
  run.split = read_split(run.bundle.graph, spa.out);
  return run;
}

// Settings shared by the synthetic experiments.
TrainConfig synthetic_config(std::uint64_t seed) {
  TrainConfig c;
  c.dim = 32;
  c.batch_size = 16;
  c.keep_p = 0.8;
  c.learning_rate = 3e-3;
  c.seed = seed;
  return c;
}

double expected_random_mrr(const RankingReport& r) {
  double total[2] = {0, 0};
  std::size_t n[2] = {0, 0};
  for (const QueryResult& q : r.rows) {
    double h = 0;
    for (std::size_t i = 1; i <= q.pool_size; ++i) h += 1.0 / static_cast<double>(i);
    const int s = q.side == Side::kHead ? 0 : 1;
    total[s] += h / static_cast<double>(q.pool_size);
    ++n[s];
  }
  double sum = 0;
  int dirs = 0;
  for (int s = 0; s < 2; ++s)
    if (n[s] > 0) {
      sum += total[s] / static_cast<double>(n[s]);
      ++dirs;
    }
  return dirs == 0 ? 0.0 : sum / dirs;
}

// Mean over `seeds` random-scorer runs.
double random_mrr(std::span<const Triple> queries, const TripleIndex& train, std::size_t seeds) {
  double total = 0;
  for (std::size_t s = 0; s < seeds; ++s) total += rank_queries(queries, random_scorer(1000 + s), train).mean_mrr();
  return total / static_cast<double>(seeds);
}

// ---------------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  const auto kg = testing::make_toy_kg(5, 2, 8, 11);
  const Corpus corpus = Corpus::build(kg.graph, kg.table);
  Rng rng(12);
  ModelParams params(kg.table, 3, rng);
  const TripleIndex index(kg.graph.triples);
  const std::vector<EntityId> entities{0, 1, 2, 3, 4};
  std::vector<TrainingExample> batch;
  for (const Triple& t : kg.graph.triples) batch.push_back({t, sample_targets(t, index, entities, {1, 2}, rng)});
  TrainConfig config;
  config.dim = 8;
  const ModelOptions opts = config.model_options();
  auto ps = params.parameters();
  const auto r = nk::grad_check(
      [&](nk::Graph& g) {
        ScoreGraph sg(g, params, corpus, opts);
        return listwise_loss(sg, batch);
      },
      ps, 1e-5, nk::Mode::kTrain, 13);
  const double secs = seconds_since(t0);
  return {r.max_relative_error < 1e-4 && secs < 60.0,
          fmt("max relative error %.2e over %zu coordinates (worst %s), %.1f s", r.max_relative_error,
              r.coordinates, r.worst_parameter.c_str(), secs)};
}

Outcome masking_oracles() {
  Rng rng(2024);
  double worst_mwrw = 0, worst_mcrw = 0;
  bool ordered = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 1 + uniform_index(rng, 20), R = 1 + uniform_index(rng, 4), k = 1 + uniform_index(rng, 16);
    const std::size_t km = uniform_index(rng, 8);
    nk::Tensor desc({L, k}), rel({R, k});
    for (double& v : desc.data()) v = uniform(rng, -1, 1);
    for (double& v : rel.data()) v = uniform(rng, -1, 1);
    const MaskedContent mc = apply_mask(desc, rel, {km, MaskMode::kMcrw});
    std::vector<double> oracle(L);
    for (std::size_t i = 0; i < L; ++i) {
      double best = -INFINITY;
      for (std::size_t j = 0; j < R; ++j) {
        double d = 0, a = 0, b = 0;
        for (std::size_t c = 0; c < k; ++c) {
          d += desc(i, c) * rel(j, c);
          a += desc(i, c) * desc(i, c);
          b += rel(j, c) * rel(j, c);
        }
        best = std::max(best, d / (std::sqrt(a) * std::sqrt(b)));
      }
      oracle[i] = best;
      worst_mwrw = std::max(worst_mwrw, std::abs(mc.mwrw[i] - best));
    }
    for (std::size_t i = 0; i < L; ++i) {
      double best = oracle[i];
      for (std::size_t d = 1; d <= km && d <= i; ++d) best = std::max(best, oracle[i - d]);
      worst_mcrw = std::max(worst_mcrw, std::abs(mc.mcrw[i] - best));
      ordered = ordered && mc.mcrw[i] >= mc.mwrw[i];
    }
  }
  return {worst_mwrw <= 1e-12 && worst_mcrw <= 1e-12 && ordered,
          fmt("100 instances, max |mwrw - oracle| %.1e, max |mcrw - oracle| %.1e, mcrw >= mwrw %s", worst_mwrw,
              worst_mcrw, ordered ? "everywhere" : "VIOLATED")};
}

Outcome indicator_word() {
  const fs::path dir = fs::path(CONMASK_SOURCE_DIR) / "data/fixtures/michelle_obama";
  const CorpusBundle b = build_bundle(dir / "triples.tsv", dir / "names.tsv", dir / "descriptions.tsv",
                                      dir / "vectors.txt");
  const auto e = *b.graph.entities.find("Michelle_Obama");
  const auto r = *b.graph.relations.find("spouse");
  const auto& tokens = b.graph.entity_descriptions[static_cast<std::size_t>(e)];
  auto rows = [&](const std::vector<std::string>& words) {
    const auto& table = b.embeddings.vectors.value;
    nk::Tensor t({words.size(), table.cols()});
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto src = table.row_span(static_cast<std::size_t>(b.embeddings.lookup(words[i])));
      std::copy(src.begin(), src.end(), t.row_span(i).begin());
    }
    return t;
  };
  const MaskedContent mc = apply_mask(rows(tokens), rows(b.graph.relation_names[static_cast<std::size_t>(r)]),
                                      {6, MaskMode::kMcrw});
  std::size_t arg = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_stop_word(tokens[i])) continue;
    if (arg == tokens.size() || mc.mwrw[i] > mc.mwrw[arg]) arg = i;
  }
  if (arg == tokens.size()) return {false, "no content tokens"};
  bool raised = arg + 6 < tokens.size();
  for (std::size_t i = arg + 1; i <= arg + 6 && i < tokens.size(); ++i) {
    raised = raised && mc.mcrw[i] >= mc.mwrw[arg] - 1e-12;
  }
  return {tokens[arg] == "married" && raised,
          fmt("argmax '%s' (mwrw %.4f) at token %zu of %zu; next 6 tokens raised: %s", tokens[arg].c_str(),
              mc.mwrw[arg], arg, tokens.size(), raised ? "yes" : "no")};
}

Outcome sampling_reduction() {
  // Toy graph with shared heads and tails so the truth sets are non-trivial.
  const std::vector<Triple> triples{{0, 0, 1}, {0, 0, 2}, {3, 0, 1}, {1, 1, 4}, {2, 1, 4}, {4, 0, 5}, {5, 1, 0}};
  const std::vector<EntityId> entities{0, 1, 2, 3, 4, 5};
  const TripleIndex index(triples);
  using Pair = std::pair<Triple, Triple>;  // (positive, negative)

  std::set<Pair> classic;
  for (const Triple& t : triples) {
    for (Side side : {Side::kHead, Side::kTail}) {
      for (EntityId e : entities) {
        const Triple c = substitute(t, side, e);
        if (!index.contains(c)) classic.insert({t, c});
      }
    }
  }

  std::set<Pair> sampled;
  Rng rng(31);
  bool shapes = true;
  for (const Triple& t : triples) {
    for (int draw = 0; draw < 4000; ++draw) {
      const auto s = sample_targets(t, index, entities, {1, 1}, rng);
      shapes = shapes && s.positives.size() == 1 && s.negatives.size() == 1;
      if (!shapes) break;
      sampled.insert({substitute(t, s.side, s.positives[0]), substitute(t, s.side, s.negatives[0])});
    }
  }
  return {shapes && sampled == classic,
          fmt("%zu sampled (positive, negative) pairs vs %zu classic corruption pairs; sets %s", sampled.size(),
              classic.size(), sampled == classic ? "equal" : "differ")};
}

Outcome overfit() {
  const auto t0 = Clock::now();
  SyntheticRun run = synthetic_run(1, 0.5);
  const TrainConfig config = synthetic_config(1);
  const Corpus corpus = Corpus::build(run.bundle.graph, run.bundle.embeddings);
  Rng init(derive_seed(config.seed, 100));
  ModelParams params(run.bundle.embeddings, config.conv_width, init);
  Trainer trainer(params, corpus, run.split.train, run.split.train_entities, config);
  const TripleIndex train_index(run.split.train);

  double hits1 = 0.0, first_loss = 0.0, loss50 = 0.0;
  std::size_t reached = 0;
  TrainRunOptions o;
  o.on_epoch = [&](const EpochMetrics& m, Trainer& t) {
    if (m.epoch == 1) first_loss = m.mean_loss;
    if (m.epoch == 50) loss50 = m.mean_loss;
    if (m.epoch % 10 != 0) return true;
    InferenceScorer scorer(t.params(), corpus, config.model_options());
    const auto r = rank_queries(run.split.train, conmask_scorer(scorer), train_index);
    hits1 = (r.head.hits1 + r.tail.hits1) / 2.0;
    if (hits1 >= 0.9) reached = m.epoch;
    return reached == 0;
  };
  train(trainer, o);
  const double secs = seconds_since(t0);

  const auto random = rank_queries(run.split.train, random_scorer(1), train_index);
  const double expected = expected_random_mrr(random);
  const double observed = random_mrr(run.split.train, train_index, 20);
  const bool random_ok = std::abs(observed - expected) <= 0.05;
  std::string loss_note = loss50 > 0 ? fmt(", loss at epoch 50 is %.0f%% of epoch 1", 100.0 * loss50 / first_loss) : "";
  return {reached > 0 && secs < 600.0 && random_ok,
          fmt("train HITS@1 %.3f at epoch %zu (%.0f s)%s; random MRR %.3f vs analytic %.3f", hits1,
              reached ? reached : trainer.epochs_done(), secs, loss_note.c_str(), observed, expected)};
}

Outcome ordering() {
  constexpr std::size_t kEpochs = 100;
  double cm = 0, sem = 0, rnd = 0;
  std::string per_seed;
  std::size_t held_out = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    SyntheticRun run = synthetic_run(seed, 1.0);
    held_out = run.split.counts.entities - run.split.counts.train_entities;
    TrainConfig config = synthetic_config(seed);
    config.epochs = kEpochs;
    const Corpus corpus = Corpus::build(run.bundle.graph, run.bundle.embeddings);
    Rng init(derive_seed(config.seed, 100));
    ModelParams params(run.bundle.embeddings, config.conv_width, init);
    Trainer trainer(params, corpus, run.split.train, run.split.train_entities, config);
    train(trainer, {});
    const TripleIndex train_index(run.split.train);
    InferenceScorer scorer(params, corpus, config.model_options());
    const double c = rank_queries(run.split.test, conmask_scorer(scorer), train_index).mean_mrr();
    const SemanticAverageScorer sa(run.bundle.embeddings, corpus);
    const double s = rank_queries(
                         run.split.test,
                         [&](const Triple& q, Side side, std::span<const EntityId> cands) { return sa(q, side, cands); },
                         train_index)
                         .mean_mrr();
    const double r = random_mrr(run.split.test, train_index, 20);
    per_seed += fmt(" [seed %llu: %.3f / %.3f / %.3f]", static_cast<unsigned long long>(seed), c, s, r);
    cm += c / 3;
    sem += s / 3;
    rnd += r / 3;
  }
  return {cm - sem >= 0.05 && sem - rnd >= 0.05 && held_out == 10,
          fmt("mean MRR conmask %.3f, semavg %.3f, random %.3f over 3 seeds, %zu held-out entities;", cm, sem, rnd,
              held_out) +
              per_seed};
}

Outcome metric_oracles() {
  SyntheticRun run = synthetic_run(4, 0.5);
  Rng rng(7);
  const auto& g = run.bundle.graph;
  std::vector<Triple> queries;
  for (int i = 0; i < 1000; ++i) {
    queries.push_back({static_cast<EntityId>(uniform_index(rng, g.num_entities())),
                       static_cast<RelationId>(uniform_index(rng, g.num_relations())),
                       static_cast<EntityId>(uniform_index(rng, g.num_entities()))});
  }
  const TripleIndex train(run.split.train);
  // Coarse scores so ties matter.
  auto scorer = [](const Triple& q, Side side, std::span<const EntityId> cands) {
    auto s = random_scorer(99)(q, side, cands);
    for (double& v : s) v = std::floor(v * 6.0) / 6.0;
    return s;
  };
  RankingOptions o;
  o.keep_scores = true;
  const auto report = rank_queries(queries, scorer, train, o);

  // Dump raw scores as text, read them back and rank from scratch.
  const fs::path dump = work_dir() / "scores.tsv";
  {
    std::ofstream out(dump);
    out.precision(17);
    for (const auto& row : report.rows)
      for (std::size_t i = 0; i < row.candidates.size(); ++i)
        out << row.query_id << '\t' << to_string(row.side) << '\t' << row.candidates[i] << '\t' << row.scores[i]
            << '\n';
  }
  std::map<std::pair<std::size_t, std::string>, std::vector<std::pair<EntityId, double>>> dumped;
  {
    std::ifstream in(dump);
    std::size_t qid;
    std::string side;
    EntityId cand;
    double score;
    while (in >> qid >> side >> cand >> score) dumped[{qid, side}].push_back({cand, score});
  }
  double sum_rank[2] = {0, 0}, sum_rr[2] = {0, 0};
  std::size_t h10[2] = {0, 0}, n[2] = {0, 0};
  for (const auto& row : report.rows) {  // same order as the evaluator aggregates
    const auto& list = dumped[{row.query_id, to_string(row.side)}];
    const EntityId truth = target_of(queries[row.query_id], row.side);
    double mine = NAN;
    for (const auto& [c, s] : list)
      if (c == truth) mine = s;
    std::size_t rank = 1;
    for (const auto& [c, s] : list)
      if (c != truth && s >= mine) ++rank;
    const int k = row.side == Side::kHead ? 0 : 1;
    sum_rank[k] += static_cast<double>(rank);
    sum_rr[k] += 1.0 / static_cast<double>(rank);
    if (rank <= 10) ++h10[k];
    ++n[k];
  }
  bool equal = report.rows.size() > 1000;
  for (Side side : {Side::kHead, Side::kTail}) {
    const int k = side == Side::kHead ? 0 : 1;
    const auto& s = report.summary(side);
    const double cnt = static_cast<double>(n[k]);
    equal = equal && s.queries == n[k] && s.mr == sum_rank[k] / cnt && s.mrr == sum_rr[k] / cnt &&
            s.hits10 == static_cast<double>(h10[k]) / cnt;
  }
  return {equal, fmt("1000 random queries (%zu ranked rows) re-ranked from a score dump: MR/HITS@10/MRR %s",
                     report.rows.size(), equal ? "identical" : "DIFFER")};
}

Outcome determinism() {
  SyntheticRun run = synthetic_run(5, 0.5);
  const fs::path cfg = work_dir() / "det.cfg";
  {
    std::ofstream out(cfg);
    out << "dim = 32\nbatch_size = 16\nepochs = 4\nseed = 9\ncheckpoint_interval = 2\nval_interval = 2\n";
  }
  auto run_train = [&](const std::string& tag) {
    const fs::path out = work_dir() / ("det_" + tag);
    const std::string cmd = std::string("\"") + CONMASK_CLI + "\" train --bundle \"" + run.bundle_path.string() +
                            "\" --split \"" + run.split_dir.string() + "\" --config \"" + cfg.string() +
                            "\" --out \"" + out.string() + "\" > /dev/null";
    const int rc = std::system(cmd.c_str());
    return std::tuple{rc, slurp(out / "checkpoint.bin"), slurp(out / "metrics.csv")};
  };
  const auto [rc1, ck1, csv1] = run_train("a");
  const auto [rc2, ck2, csv2] = run_train("b");
  const bool ok = rc1 == 0 && rc2 == 0 && !ck1.empty() && ck1 == ck2 && csv1 == csv2;
  return {ok, fmt("two CLI train runs: exit %d/%d, checkpoint %zu bytes %s, metrics.csv %s", rc1, rc2, ck1.size(),
                  ck1 == ck2 ? "identical" : "DIFFER", csv1 == csv2 ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient-integrity", gradient_integrity}, {"masking-oracles", masking_oracles},
      {"indicator-word", indicator_word},         {"sampling-reduction", sampling_reduction},
      {"overfit", overfit},                       {"ordering", ordering},
      {"metric-oracles", metric_oracles},         {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("CRITERION %zu %s: %s (%s)\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  return failures == 0 ? 0 : 1;
}
