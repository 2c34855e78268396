#include "conmask/trainer.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "conmask/checkpoint.hpp"
#include "conmask/error.hpp"
#include "conmask/evaluator.hpp"

namespace conmask {

namespace {

constexpr std::uint64_t kEpochOrderStream = 101;
constexpr std::uint64_t kSamplingStream = 102;
constexpr std::uint64_t kDropoutStream = 103;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string metrics_csv_header() { return "epoch,mean_loss,val_mrr\n"; }

std::string metrics_csv_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + format_double(m.mean_loss) + "," + format_double(m.val_mrr) + "\n";
}

Trainer::Trainer(ModelParams& params, const Corpus& corpus, std::vector<Triple> train,
                 std::vector<EntityId> entities, TrainConfig config)
    : params_(params),
      corpus_(corpus),
      train_(std::move(train)),
      entities_(std::move(entities)),
      config_(std::move(config)),
      index_(train_) {
  config_.validate();
  if (train_.empty()) throw DataError("training needs at least one triple");
  if (params_.dim() != config_.dim) {
    throw UsageError("config dim " + std::to_string(config_.dim) + " does not match embedding width " +
                     std::to_string(params_.dim()));
  }
  params_.embeddings.vectors.trainable = !config_.freeze_embeddings;
  param_list_ = params_.parameters();
  adam_ = nk::AdamState(param_list_, nk::AdamOptions{config_.learning_rate});
}

double Trainer::step(std::span<const Triple> batch, std::size_t epoch, std::size_t batch_index) {
  Rng rng(derive_seed(config_.seed, kSamplingStream + (static_cast<std::uint64_t>(epoch) << 8), batch_index));
  std::vector<TrainingExample> examples;
  examples.reserve(batch.size());
  const auto sampling = config_.sampling_options();
  for (const Triple& t : batch) {
    examples.push_back({t, sample_targets(t, index_, entities_, sampling, rng)});
  }
  nk::Graph g(nk::Mode::kTrain,
              derive_seed(config_.seed, kDropoutStream + (static_cast<std::uint64_t>(epoch) << 8), batch_index));
  ScoreGraph sg(g, params_, corpus_, config_.model_options());
  const nk::Var loss = listwise_loss(sg, examples);
  const double value = g.value(loss)[0];
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                       std::to_string(batch_index));
  }
  for (nk::Parameter* p : param_list_) p->zero_grad();
  g.backward(loss);
  nk::adam_update(param_list_, adam_);
  return value;
}

double Trainer::run_epoch() {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config_.seed, kEpochOrderStream, epoch_));
  shuffle(std::span<std::size_t>(order), rng);

  double total = 0.0;
  std::size_t batches = 0;
  std::vector<Triple> batch;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    const std::size_t end = std::min(order.size(), begin + config_.batch_size);
    batch.clear();
    for (std::size_t i = begin; i < end; ++i) batch.push_back(train_[order[i]]);
    total += step(batch, epoch_, batches);
    ++batches;
  }
  ++epoch_;
  return total / static_cast<double>(batches);
}

double validation_mrr(ModelParams& params, const Corpus& corpus, const TripleIndex& train,
                      std::span<const Triple> triples, const ModelOptions& options) {
  InferenceScorer scorer(params, corpus, options);
  return rank_queries(triples, conmask_scorer(scorer), train).mean_mrr();
}

std::vector<EpochMetrics> train(Trainer& trainer, const TrainRunOptions& options) {
  const TrainConfig& config = trainer.config();
  const bool write = !options.out_dir.empty();
  std::ofstream csv;
  if (write) {
    std::filesystem::create_directories(options.out_dir);
    csv.open(options.out_dir / "metrics.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write " + (options.out_dir / "metrics.csv").string());
    csv << metrics_csv_header();
  }
  const auto ckpt_path = options.out_dir / "checkpoint.bin";
  std::vector<EpochMetrics> log;
  while (trainer.epochs_done() < config.epochs) {
    EpochMetrics m;
    m.mean_loss = trainer.run_epoch();
    m.epoch = trainer.epochs_done();
    if (config.val_interval > 0 && m.epoch % config.val_interval == 0 && !options.validation.empty()) {
      m.val_mrr = validation_mrr(trainer.params(), trainer.corpus(), trainer.index(),
                                 options.validation, config.model_options());
    }
    log.push_back(m);
    if (write) {
      csv << metrics_csv_row(m) << std::flush;
      if (config.checkpoint_interval > 0 && m.epoch % config.checkpoint_interval == 0) {
        save_checkpoint(trainer.params(), ckpt_path, options.checkpoint_metadata);
      }
    }
    if (options.on_epoch && !options.on_epoch(m, trainer)) break;
  }
  if (write) save_checkpoint(trainer.params(), ckpt_path, options.checkpoint_metadata);
  return log;
}

}  // namespace conmask
