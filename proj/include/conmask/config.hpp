#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "conmask/masking.hpp"
#include "conmask/model.hpp"
#include "conmask/sampling.hpp"

namespace conmask {

struct TrainConfig {
  std::size_t dim = 200;               // k
  std::size_t max_content_len = 512;   // k_c
  std::size_t max_name_len = 512;      // k_n
  std::size_t mask_window = 6;         // k_m
  std::size_t fcn_layers = 3;          // k_fcn, fixed
  double keep_p = 0.5;
  std::size_t pool = 2;
  std::size_t batch_size = 200;        // k_b
  double learning_rate = 1e-2;
  std::size_t positives = 1;           // |E+|
  std::size_t negatives = 4;           // |E-|
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  bool freeze_embeddings = false;
  std::size_t checkpoint_interval = 10;  // epochs; 0 keeps only the final checkpoint
  std::size_t conv_width = 3;
  std::size_t val_interval = 0;          // epochs between validation MRR; 0 disables
  MaskMode mask_mode = MaskMode::kMcrw;
  bool detach_mask_weights = false;
  bool detach_mask_content = false;

  void validate() const;
  ModelOptions model_options() const;
  SamplingOptions sampling_options() const;
  // Flat `key = value` lines, one per field, in declaration order.
  std::string to_text() const;
};

// Reads `key = value` lines; '#' starts a comment. Unknown keys and bad
// values raise UsageError with the line number. Keys not given keep their
// defaults.
TrainConfig parse_config(const std::string& text, const std::string& origin = "config");
TrainConfig load_config(const std::filesystem::path& path);
// Applies one key/value pair.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

}  // namespace conmask
