#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "conmask/adam.hpp"
#include "conmask/config.hpp"
#include "conmask/embeddings.hpp"
#include "conmask/model.hpp"
#include "conmask/sampling.hpp"

namespace conmask {

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_mrr = std::numeric_limits<double>::quiet_NaN();
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

// Mini-batch training. The trajectory is a pure function of the params,
// corpus, triples and config: epoch order, sampling and dropout all draw
// from streams derived from config.seed.
class Trainer {
 public:
  Trainer(ModelParams& params, const Corpus& corpus, std::vector<Triple> train,
          std::vector<EntityId> entities, TrainConfig config);

  // One optimizer step on `batch`; returns the batch loss. `epoch` and
  // `batch_index` select the random streams.
  double step(std::span<const Triple> batch, std::size_t epoch, std::size_t batch_index);
  // Runs the next epoch and returns its mean loss.
  double run_epoch();

  std::size_t epochs_done() const { return epoch_; }
  const TrainConfig& config() const { return config_; }
  const TripleIndex& index() const { return index_; }
  ModelParams& params() { return params_; }
  const Corpus& corpus() const { return corpus_; }

 private:
  ModelParams& params_;
  const Corpus& corpus_;
  std::vector<Triple> train_;
  std::vector<EntityId> entities_;
  TrainConfig config_;
  TripleIndex index_;
  std::vector<nk::Parameter*> param_list_;
  nk::AdamState adam_;
  std::size_t epoch_ = 0;
};

struct TrainRunOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::span<const Triple> validation;
  std::string checkpoint_metadata;
  // Called after every epoch; returning false stops training.
  std::function<bool(const EpochMetrics&, Trainer&)> on_epoch;
};

// Full loop: epochs, metrics.csv, periodic and final checkpoint.bin. A
// non-finite loss raises NumericError and leaves the last good checkpoint
// on disk untouched.
std::vector<EpochMetrics> train(Trainer& trainer, const TrainRunOptions& options);

// Validation MRR (mean over head and tail prediction, raw protocol).
double validation_mrr(ModelParams& params, const Corpus& corpus, const TripleIndex& train,
                      std::span<const Triple> triples, const ModelOptions& options);

}  // namespace conmask
