#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvr/adam.hpp"
#include "mvr/features.hpp"
#include "mvr/loss.hpp"
#include "mvr/model.hpp"
#include "mvr/rng.hpp"

namespace mvr {

enum class TrainMode { tl, bce };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

/// Hyperparameters. The defaults are the full-scale reference setup
/// (lr 1e-6, batch 1000, 15000 epochs, dropout 0.5); desk-scale configs
/// override them.
struct TrainConfig {
  TrainMode mode = TrainMode::tl;
  double lr = 1e-6;
  int batch_size = 1000;
  int max_epochs = 15000;
  int patience = 10;  // consecutive evaluations without val-loss improvement
  double dropout_p = 0.5;
  std::uint64_t seed = 0;
  TripletLossConfig loss;
  int val_every = 1;  // evaluate every this many epochs
};

void validate(const TrainConfig& cfg);

/// Strict JSON round-trip: every field required, unknown keys rejected.
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);

struct EvalRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double r1_mv = 0.0, r10_mv = 0.0, r25_mv = 0.0;  // music query -> video index
  double r1_vm = 0.0, r10_vm = 0.0, r25_vm = 0.0;
  double seconds = 0.0;  // wall time since training start (not deterministic)
};

struct TrainHistory {
  std::vector<EvalRecord> records;
};

/// CSV: epoch,train_loss,val_loss,r1_mv,r10_mv,r25_mv,r1_vm,r10_vm,r25_vm,seconds
void write_history_csv(const std::string& path, const TrainHistory& history);

/// Index-level match/non-match batch: `rows` matched with themselves (label
/// 1) followed by `rows` matched against a random derangement of the video
/// side (label 0). Equal counts of each label by construction.
struct BceBatch {
  std::vector<int> music_rows;
  std::vector<int> video_rows;
  std::vector<int> labels;
};

BceBatch make_bce_batch(const std::vector<int>& rows, RngStream& rng);

struct EpochStats {
  double train_loss = 0.0;  // mean batch loss
  int batches = 0;
};

/// One pass over the train split: shuffles, iterates full batches (the
/// ragged tail is dropped), backpropagates the mode's loss and applies one
/// Adam step per batch. Throws if the loss goes non-finite.
EpochStats train_epoch(ModelParams& model, const Dataset& dataset, const TrainConfig& cfg,
                       AdamState& opt, RngStream& rng);

struct TrainResult {
  ModelParams model;
  TrainHistory history;
};

/// Full training run from the given initialization. TL mode early-stops when
/// validation loss fails to improve for `patience` consecutive evaluations
/// and returns the best-validation checkpoint; BCE mode runs max_epochs and
/// returns the final model. Evaluations happen every val_every epochs (TL
/// requires a validation split of at least 2 pairs; a BCE run without one
/// simply records no history).
TrainResult train(const ModelParams& init, const Dataset& dataset, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelParams model;
  TrainConfig config;  // the configuration the model was trained with
};

/// JSON checkpoint: format version, branch specs, flat row-major parameter
/// arrays, batchnorm running stats, optional head, and the TrainConfig.
/// save(load(p)) is byte-identical to the original file.
void save_checkpoint(const std::string& path, const ModelParams& model, const TrainConfig& cfg);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mvr
