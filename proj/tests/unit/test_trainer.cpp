#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "conmask/checkpoint.hpp"
#include "conmask/config.hpp"
#include "conmask/error.hpp"
#include "conmask/trainer.hpp"
#include "doctest.h"
#include "toy_kg.hpp"

using namespace conmask;
namespace fs = std::filesystem;

namespace {

struct Setup {
  testing::ToyKg kg = testing::make_toy_kg(6, 2, 8, 2);
  Corpus corpus = Corpus::build(kg.graph, kg.table);
  std::vector<EntityId> entities{0, 1, 2, 3, 4, 5};

  ModelParams params(std::uint64_t seed) {
    Rng rng(seed);
    return ModelParams(kg.table, 3, rng);
  }
};

TrainConfig small_config() {
  TrainConfig c;
  c.dim = 8;
  c.batch_size = 4;
  c.epochs = 3;
  c.negatives = 2;
  c.seed = 17;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("conmask_trainer_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("training is a pure function of the seed") {
  Setup s;
  auto run = [&](std::uint64_t seed) {
    auto p = s.params(1);
    TrainConfig c = small_config();
    c.seed = seed;
    Trainer t(p, s.corpus, s.kg.graph.triples, s.entities, c);
    std::vector<double> losses;
    for (int e = 0; e < 3; ++e) losses.push_back(t.run_epoch());
    return std::pair{losses, serialize_checkpoint(snapshot(p))};
  };
  const auto a = run(17), b = run(17), c = run(18);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.second != c.second);
}

TEST_CASE("loss falls on the toy graph") {
  Setup s;
  auto p = s.params(2);
  TrainConfig c = small_config();
  c.keep_p = 1.0;
  c.epochs = 40;
  Trainer t(p, s.corpus, s.kg.graph.triples, s.entities, c);
  const auto log = train(t, {});
  REQUIRE(log.size() == 40);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += log[static_cast<std::size_t>(i)].mean_loss;
    last += log[log.size() - 1 - static_cast<std::size_t>(i)].mean_loss;
  }
  CHECK(last < first);
}

TEST_CASE("a pool of one positive has zero loss") {
  Setup s;
  auto p = s.params(3);
  TrainConfig c = small_config();
  c.negatives = 0;
  Trainer t(p, s.corpus, std::vector<Triple>{s.kg.graph.triples[0]}, s.entities, c);
  CHECK(t.run_epoch() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("frozen embeddings stay put") {
  Setup s;
  auto p = s.params(4);
  const nk::Tensor before = p.embeddings.vectors.value;
  const nk::Tensor combiner = p.combiner.value;
  TrainConfig c = small_config();
  c.freeze_embeddings = true;
  Trainer t(p, s.corpus, s.kg.graph.triples, s.entities, c);
  t.run_epoch();
  CHECK(p.embeddings.vectors.value == before);
  CHECK_FALSE(p.combiner.value == combiner);
}

TEST_CASE("trainer rejects a dimension mismatch") {
  Setup s;
  auto p = s.params(5);
  TrainConfig c = small_config();
  c.dim = 9;
  CHECK_THROWS_AS(Trainer(p, s.corpus, s.kg.graph.triples, s.entities, c), UsageError);
}

TEST_CASE("checkpoints round-trip and replay scores") {
  Setup s;
  auto p = s.params(6);
  {
    Trainer t(p, s.corpus, s.kg.graph.triples, s.entities, small_config());
    t.run_epoch();
  }
  const auto dir = temp_dir("ckpt");
  fs::create_directories(dir);
  save_checkpoint(p, dir / "c.bin", "seed = 6\n");

  auto q = s.params(99);
  CHECK(load_checkpoint(q, dir / "c.bin") == "seed = 6\n");
  CHECK(serialize_checkpoint(snapshot(q)) == serialize_checkpoint(snapshot(p)));

  ModelOptions opts = small_config().model_options();
  InferenceScorer sp(p, s.corpus, opts), sq(q, s.corpus, opts);
  for (const Triple& t : s.kg.graph.triples) CHECK(sp.score(t) == sq.score(t));

  const std::string bytes = slurp(dir / "c.bin");
  CHECK(deserialize_checkpoint(bytes).tensors.size() == snapshot(p).tensors.size());
  for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, cut)), DataError);
  }
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), DataError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), DataError);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.bin"), DataError);

  Checkpoint partial = snapshot(p);
  partial.tensors.pop_back();
  CHECK_THROWS_AS(restore(q, partial), DataError);
  fs::remove_all(dir);
}

TEST_CASE("train writes metrics and checkpoints") {
  Setup s;
  const auto dir = temp_dir("run");
  auto p = s.params(7);
  TrainConfig c = small_config();
  c.checkpoint_interval = 2;
  c.val_interval = 1;
  Trainer t(p, s.corpus, s.kg.graph.triples, s.entities, c);
  TrainRunOptions o;
  o.out_dir = dir;
  o.validation = std::span<const Triple>(s.kg.graph.triples).subspan(0, 3);
  const auto log = train(t, o);
  const std::string csv = slurp(dir / "metrics.csv");
  CHECK(csv.rfind(metrics_csv_header(), 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  for (const auto& m : log) {
    CHECK(std::isfinite(m.val_mrr));
    CHECK(m.val_mrr > 0.0);
    CHECK(m.val_mrr <= 1.0);
  }
  CHECK(fs::exists(dir / "checkpoint.bin"));
  CHECK(metrics_csv_row({2, 0.5, std::nan("")}) == "2,0.5,nan\n");
  fs::remove_all(dir);
}

TEST_CASE("config parsing") {
  const auto c = parse_config("# comment\ndim = 16\n\nkeep_p=0.8  # trailing\nmask_mode = mwrw\n");
  CHECK(c.dim == 16);
  CHECK(c.keep_p == 0.8);
  CHECK(c.mask_mode == MaskMode::kMwrw);
  CHECK(c.epochs == 200);
  CHECK(parse_config(c.to_text()).to_text() == c.to_text());

  auto line_of = [](const std::string& text) {
    try {
      parse_config(text, "cfg");
    } catch (const UsageError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(line_of("dim = 4\nbogus = 1\n").find("cfg:2") != std::string::npos);
  CHECK(line_of("dim = four\n").find("cfg:1") != std::string::npos);
  CHECK(line_of("keep_p = 0\n") != "");
  CHECK(line_of("no equals sign\n") != "");
  CHECK(line_of("fcn_layers = 4\n") != "");
  CHECK_THROWS_AS(load_config("/nonexistent/conmask.cfg"), Error);
}
