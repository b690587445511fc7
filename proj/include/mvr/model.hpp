#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvr/features.hpp"
#include "mvr/layers.hpp"
#include "mvr/rng.hpp"

namespace mvr {

/// Topology of one embedding branch: a stack of fully-connected layers with
/// ReLU on every hidden layer, and a linear final layer followed by batch
/// normalization. layer_widths.back() is the embedding dimension.
struct BranchSpec {
  int input_dim = 0;
  std::vector<int> layer_widths;
};

struct FcLayer {
  DenseMatrix w;  // Din x Dout
  DenseMatrix b;  // 1 x Dout
};

struct BatchNormParams {
  DenseMatrix gamma, beta;               // 1 x D
  DenseMatrix running_mean, running_var;  // 1 x D
  double momentum = 0.9;
  double eps = 1e-5;
};

struct Branch {
  BranchSpec spec;
  std::vector<FcLayer> layers;
  BatchNormParams bn;  // applied after the final linear layer
};

/// Match/non-match classifier stacked on the concatenated embeddings,
/// ReLU hidden layers and a single sigmoid output unit.
struct FusionHead {
  std::vector<int> widths;  // e.g. {1024, 128, 1}; last must be 1
  std::vector<FcLayer> layers;
};

struct ModelParams {
  Branch music;
  Branch video;
  std::optional<FusionHead> head;
  int embedding_dim = 0;
};

inline const std::vector<int>& default_head_widths() {
  static const std::vector<int> w{1024, 128, 1};
  return w;
}

/// Weights drawn from N(0, 2/fan_in) for ReLU layers and N(0, 1/fan_in) for
/// the final linear layer of each stack; biases zero; batchnorm gamma 1,
/// beta 0, running stats neutral (mean 0, var 1). Both branches must end in
/// the same embedding width.
ModelParams init_model(const BranchSpec& music_spec, const BranchSpec& video_spec,
                       bool with_fusion_head, RngStream& rng,
                       const std::vector<int>& head_widths = default_head_widths());

struct EmbeddingBatch {
  std::vector<std::string> clip_ids;
  DenseMatrix e;  // B x embedding_dim
  Modality modality = Modality::music;
};

struct BranchCache {
  Mode mode = Mode::infer;
  std::vector<FcCache> fc;
  std::vector<DenseMatrix> dropout_masks;  // one per hidden layer (train mode)
  BatchNormCache bn;
};

/// Forward through one branch. Train mode applies inverted dropout after
/// each hidden ReLU and uses batch statistics in the final batchnorm; infer
/// mode is deterministic. rng may be null in infer mode or when dropout_p is 0.
std::pair<DenseMatrix, BranchCache> branch_forward(const DenseMatrix& x, const Branch& branch,
                                                   Mode mode, double dropout_p, RngStream* rng);

EmbeddingBatch embed(const DenseMatrix& x, const std::vector<std::string>& clip_ids,
                     Modality modality, const ModelParams& model, Mode mode, double dropout_p,
                     RngStream* rng, BranchCache* cache_out = nullptr);

struct BranchGrads {
  std::vector<FcLayer> layers;  // dW, db per layer
  DenseMatrix dgamma, dbeta;
};

/// Exact gradients of branch_forward for every trainable tensor; optionally
/// also the gradient w.r.t. the input batch.
BranchGrads branch_backward(const DenseMatrix& de, const BranchCache& cache, const Branch& branch,
                            DenseMatrix* dx_out = nullptr);

struct ModelGrads {
  BranchGrads music;
  BranchGrads video;
  std::optional<std::vector<FcLayer>> head;
};

/// Gradients for both branches from upstream embedding gradients.
ModelGrads model_backward(const DenseMatrix& de_music, const DenseMatrix& de_video,
                          const BranchCache& music_cache, const BranchCache& video_cache,
                          const ModelParams& model);

struct HeadCache {
  std::vector<FcCache> fc;
  DenseMatrix scores;  // B x 1, post-sigmoid
  int embedding_dim = 0;
};

/// sigmoid(head(concat(e_music_row, e_video_row))) per row. Batches must be
/// the same size and the head present.
std::pair<std::vector<double>, HeadCache> fusion_forward(const DenseMatrix& e_music,
                                                         const DenseMatrix& e_video,
                                                         const ModelParams& model);

std::vector<double> fusion_score(const DenseMatrix& e_music, const DenseMatrix& e_video,
                                 const ModelParams& model);

struct FusionBackwardResult {
  std::vector<FcLayer> head_grads;
  DenseMatrix de_music;
  DenseMatrix de_video;
};

/// Backward from d(loss)/d(score), through the sigmoid and the head stack.
FusionBackwardResult fusion_backward(const std::vector<double>& dscores, const HeadCache& cache,
                                     const ModelParams& model);

/// Every trainable tensor in a fixed order (music layers, music batchnorm
/// gamma/beta, video likewise, then head layers). Running stats excluded.
std::vector<DenseMatrix*> collect_tensors(ModelParams& model);
std::vector<const DenseMatrix*> collect_tensors(const ModelParams& model);
std::vector<const DenseMatrix*> collect_tensors(const ModelGrads& grads);

/// Commits the running-statistics update recorded by a train-mode forward.
void commit_running_stats(Branch& branch, const BranchCache& cache);

}  // namespace mvr
