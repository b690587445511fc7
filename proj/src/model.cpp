#include "mvr/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvr {

namespace {

void validate_spec(const BranchSpec& spec, const char* name) {
  if (spec.input_dim < 1)
    throw std::invalid_argument(std::string(name) + " branch: input_dim must be >= 1");
  if (spec.layer_widths.empty())
    throw std::invalid_argument(std::string(name) + " branch: needs at least one layer");
  for (int w : spec.layer_widths)
    if (w < 1) throw std::invalid_argument(std::string(name) + " branch: zero-width layer");
}

FcLayer init_fc(int fan_in, int fan_out, bool relu, RngStream& rng) {
  FcLayer layer;
  layer.w = DenseMatrix(fan_in, fan_out);
  // fan-in scaled init: std = sqrt(2/fan_in) ahead of ReLU, sqrt(1/fan_in)
  // ahead of a linear output
  const double stddev = std::sqrt((relu ? 2.0 : 1.0) / fan_in);
  for (double& v : layer.w.values) v = stddev * rng.next_gaussian();
  layer.b = DenseMatrix(1, fan_out);
  return layer;
}

Branch init_branch(const BranchSpec& spec, RngStream& rng) {
  Branch branch;
  branch.spec = spec;
  int fan_in = spec.input_dim;
  const int n = static_cast<int>(spec.layer_widths.size());
  for (int l = 0; l < n; ++l) {
    const bool relu = l + 1 < n;  // final layer is linear
    branch.layers.push_back(init_fc(fan_in, spec.layer_widths[l], relu, rng));
    fan_in = spec.layer_widths[l];
  }
  const int d = spec.layer_widths.back();
  branch.bn.gamma = DenseMatrix(1, d, 1.0);
  branch.bn.beta = DenseMatrix(1, d, 0.0);
  branch.bn.running_mean = DenseMatrix(1, d, 0.0);
  branch.bn.running_var = DenseMatrix(1, d, 1.0);
  return branch;
}

}  // namespace

ModelParams init_model(const BranchSpec& music_spec, const BranchSpec& video_spec,
                       bool with_fusion_head, RngStream& rng,
                       const std::vector<int>& head_widths) {
  validate_spec(music_spec, "music");
  validate_spec(video_spec, "video");
  if (music_spec.layer_widths.back() != video_spec.layer_widths.back())
    throw std::invalid_argument("init_model: branch embedding widths differ (" +
                                std::to_string(music_spec.layer_widths.back()) + " vs " +
                                std::to_string(video_spec.layer_widths.back()) + ")");
  ModelParams model;
  model.embedding_dim = music_spec.layer_widths.back();
  model.music = init_branch(music_spec, rng);
  model.video = init_branch(video_spec, rng);
  if (with_fusion_head) {
    if (head_widths.empty() || head_widths.back() != 1)
      throw std::invalid_argument("init_model: fusion head must end in a single unit");
    FusionHead head;
    head.widths = head_widths;
    int fan_in = 2 * model.embedding_dim;
    for (std::size_t l = 0; l < head_widths.size(); ++l) {
      const bool relu = l + 1 < head_widths.size();  // sigmoid output unit is linear pre-sigmoid
      head.layers.push_back(init_fc(fan_in, head_widths[l], relu, rng));
      fan_in = head_widths[l];
    }
    model.head = std::move(head);
  }
  return model;
}

std::pair<DenseMatrix, BranchCache> branch_forward(const DenseMatrix& x, const Branch& branch,
                                                   Mode mode, double dropout_p, RngStream* rng) {
  if (x.cols != branch.spec.input_dim)
    throw std::invalid_argument("branch_forward: input dim " + std::to_string(x.cols) +
                                ", branch expects " + std::to_string(branch.spec.input_dim));
  BranchCache cache;
  cache.mode = mode;
  DenseMatrix cur = x;
  const int n = static_cast<int>(branch.layers.size());
  for (int l = 0; l < n; ++l) {
    const bool hidden = l + 1 < n;
    FcResult r = fc_forward(cur, branch.layers[l].w, branch.layers[l].b,
                            hidden ? Activation::relu : Activation::linear);
    cur = std::move(r.y);
    cache.fc.push_back(std::move(r.cache));
    if (hidden && mode == Mode::train && dropout_p > 0.0) {
      if (!rng) throw std::invalid_argument("branch_forward: dropout in train mode needs an rng");
      DropoutResult d = dropout_forward(cur, dropout_p, mode, *rng);
      cur = std::move(d.y);
      cache.dropout_masks.push_back(std::move(d.mask));
    } else if (hidden) {
      cache.dropout_masks.emplace_back();  // empty: no dropout applied
    }
  }
  BatchNormResult bn = batchnorm_forward(cur, branch.bn.gamma, branch.bn.beta,
                                         branch.bn.running_mean, branch.bn.running_var, mode,
                                         branch.bn.momentum, branch.bn.eps);
  cache.bn = std::move(bn.cache);
  return {std::move(bn.y), std::move(cache)};
}

EmbeddingBatch embed(const DenseMatrix& x, const std::vector<std::string>& clip_ids,
                     Modality modality, const ModelParams& model, Mode mode, double dropout_p,
                     RngStream* rng, BranchCache* cache_out) {
  const Branch& branch = modality == Modality::music ? model.music : model.video;
  auto [e, cache] = branch_forward(x, branch, mode, dropout_p, rng);
  if (cache_out) *cache_out = std::move(cache);
  return EmbeddingBatch{clip_ids, std::move(e), modality};
}

BranchGrads branch_backward(const DenseMatrix& de, const BranchCache& cache, const Branch& branch,
                            DenseMatrix* dx_out) {
  const int n = static_cast<int>(branch.layers.size());
  if (static_cast<int>(cache.fc.size()) != n)
    throw std::invalid_argument("branch_backward: cache does not match branch topology");
  BranchGrads grads;
  grads.layers.resize(n);

  BatchNormGrads bn = batchnorm_backward(de, cache.bn);
  grads.dgamma = std::move(bn.dgamma);
  grads.dbeta = std::move(bn.dbeta);
  DenseMatrix cur = std::move(bn.dx);

  for (int l = n - 1; l >= 0; --l) {
    const bool hidden = l + 1 < n;
    if (hidden && cache.dropout_masks[l].rows > 0)
      cur = dropout_backward(cur, cache.dropout_masks[l]);
    FcGrads g = fc_backward(cur, cache.fc[l]);
    grads.layers[l].w = std::move(g.dw);
    grads.layers[l].b = std::move(g.db);
    cur = std::move(g.dx);
  }
  if (dx_out) *dx_out = std::move(cur);
  return grads;
}

ModelGrads model_backward(const DenseMatrix& de_music, const DenseMatrix& de_video,
                          const BranchCache& music_cache, const BranchCache& video_cache,
                          const ModelParams& model) {
  ModelGrads grads;
  grads.music = branch_backward(de_music, music_cache, model.music);
  grads.video = branch_backward(de_video, video_cache, model.video);
  return grads;
}

std::pair<std::vector<double>, HeadCache> fusion_forward(const DenseMatrix& e_music,
                                                         const DenseMatrix& e_video,
                                                         const ModelParams& model) {
  if (!model.head) throw std::invalid_argument("fusion: model has no fusion head");
  if (e_music.rows != e_video.rows)
    throw std::invalid_argument("fusion: batch sizes differ (" + std::to_string(e_music.rows) +
                                " vs " + std::to_string(e_video.rows) + ")");
  if (e_music.cols != model.embedding_dim || e_video.cols != model.embedding_dim)
    throw std::invalid_argument("fusion: embedding dim mismatch");

  DenseMatrix concat(e_music.rows, 2 * model.embedding_dim);
  for (int i = 0; i < e_music.rows; ++i) {
    double* row = concat.row(i);
    std::copy(e_music.row(i), e_music.row(i) + e_music.cols, row);
    std::copy(e_video.row(i), e_video.row(i) + e_video.cols, row + e_music.cols);
  }
  HeadCache cache;
  cache.embedding_dim = model.embedding_dim;
  DenseMatrix cur = std::move(concat);
  const auto& layers = model.head->layers;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const bool hidden = l + 1 < layers.size();
    FcResult r = fc_forward(cur, layers[l].w, layers[l].b,
                            hidden ? Activation::relu : Activation::linear);
    cur = std::move(r.y);
    cache.fc.push_back(std::move(r.cache));
  }
  std::vector<double> scores(cur.rows);
  cache.scores = DenseMatrix(cur.rows, 1);
  for (int i = 0; i < cur.rows; ++i) {
    double s = 1.0 / (1.0 + std::exp(-cur.at(i, 0)));
    scores[i] = s;
    cache.scores.at(i, 0) = s;
  }
  return {std::move(scores), std::move(cache)};
}

std::vector<double> fusion_score(const DenseMatrix& e_music, const DenseMatrix& e_video,
                                 const ModelParams& model) {
  return fusion_forward(e_music, e_video, model).first;
}

FusionBackwardResult fusion_backward(const std::vector<double>& dscores, const HeadCache& cache,
                                     const ModelParams& model) {
  if (!model.head) throw std::invalid_argument("fusion_backward: model has no fusion head");
  const int b = cache.scores.rows;
  if (static_cast<int>(dscores.size()) != b)
    throw std::invalid_argument("fusion_backward: score gradient count mismatch");
  // through the sigmoid: dz = ds * s * (1 - s)
  DenseMatrix cur(b, 1);
  for (int i = 0; i < b; ++i) {
    double s = cache.scores.at(i, 0);
    cur.at(i, 0) = dscores[i] * s * (1.0 - s);
  }
  FusionBackwardResult out;
  out.head_grads.resize(model.head->layers.size());
  for (int l = static_cast<int>(model.head->layers.size()) - 1; l >= 0; --l) {
    FcGrads g = fc_backward(cur, cache.fc[l]);
    out.head_grads[l].w = std::move(g.dw);
    out.head_grads[l].b = std::move(g.db);
    cur = std::move(g.dx);
  }
  const int d = cache.embedding_dim;
  out.de_music = DenseMatrix(b, d);
  out.de_video = DenseMatrix(b, d);
  for (int i = 0; i < b; ++i) {
    const double* row = cur.row(i);
    std::copy(row, row + d, out.de_music.row(i));
    std::copy(row + d, row + 2 * d, out.de_video.row(i));
  }
  return out;
}

namespace {

template <typename M, typename V>
void collect_branch(M& branch, V& out) {
  for (auto& layer : branch.layers) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
}

}  // namespace

std::vector<DenseMatrix*> collect_tensors(ModelParams& model) {
  std::vector<DenseMatrix*> out;
  collect_branch(model.music, out);
  out.push_back(&model.music.bn.gamma);
  out.push_back(&model.music.bn.beta);
  collect_branch(model.video, out);
  out.push_back(&model.video.bn.gamma);
  out.push_back(&model.video.bn.beta);
  if (model.head) collect_branch(*model.head, out);
  return out;
}

std::vector<const DenseMatrix*> collect_tensors(const ModelParams& model) {
  std::vector<const DenseMatrix*> out;
  collect_branch(model.music, out);
  out.push_back(&model.music.bn.gamma);
  out.push_back(&model.music.bn.beta);
  collect_branch(model.video, out);
  out.push_back(&model.video.bn.gamma);
  out.push_back(&model.video.bn.beta);
  if (model.head) collect_branch(*model.head, out);
  return out;
}

std::vector<const DenseMatrix*> collect_tensors(const ModelGrads& grads) {
  std::vector<const DenseMatrix*> out;
  collect_branch(grads.music, out);
  out.push_back(&grads.music.dgamma);
  out.push_back(&grads.music.dbeta);
  collect_branch(grads.video, out);
  out.push_back(&grads.video.dgamma);
  out.push_back(&grads.video.dbeta);
  if (grads.head)
    for (const auto& layer : *grads.head) {
      out.push_back(&layer.w);
      out.push_back(&layer.b);
    }
  return out;
}

void commit_running_stats(Branch& branch, const BranchCache& cache) {
  branch.bn.running_mean = cache.bn.new_running_mean;
  branch.bn.running_var = cache.bn.new_running_var;
}

}  // namespace mvr
