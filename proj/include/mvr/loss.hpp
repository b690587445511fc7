#pragma once

#include <span>
#include <vector>

#include "mvr/dense_matrix.hpp"
#include "mvr/rng.hpp"

namespace mvr {

struct TripletLossConfig {
  double margin = 0.5;
  // weights of (loss_vm, loss_mv, loss_vv, loss_mm)
  double w_vm = 1.0;
  double w_mv = 1.0;
  double w_vv = 0.1;
  double w_mm = 0.1;
  int intra_triples_per_batch = 0;  // 0 means "one per batch row"
};

struct TripleIndex {
  int a = 0, p = 0, n = 0;
};

struct TripletResult {
  double loss = 0.0;
  std::vector<double> da, dp, dn;
};

/// Hinge loss max(||a-p||^2 - ||a-n||^2 + margin, 0) with its exact
/// gradients; zero gradients when inactive, including exactly at the
/// boundary.
TripletResult triplet_loss_and_grad(std::span<const double> a, std::span<const double> p,
                                    std::span<const double> n, double margin);

struct InterModalResult {
  double loss_vm = 0.0;  // video anchor: (e_Vi, e_Mi, e_Mj)
  double loss_mv = 0.0;  // music anchor: (e_Mi, e_Vi, e_Vj)
  DenseMatrix de_music_vm, de_video_vm;  // gradients of loss_vm
  DenseMatrix de_music_mv, de_video_mv;  // gradients of loss_mv
};

/// Batch-all inter-modal ranking loss. Rows of the two batches are aligned
/// by clip; for each anchor i every j != i supplies the negative, and each
/// direction averages its B*(B-1) triplet losses.
InterModalResult inter_modal_loss(const DenseMatrix& e_music, const DenseMatrix& e_video,
                                  double margin);

/// `count` triples of distinct indices. The anchor and two candidates are
/// drawn uniformly; the two candidates are then ordered so that
/// d(x_a, x_p) <= d(x_a, x_n) in the *input* feature space, the lower index
/// winning ties.
std::vector<TripleIndex> mine_intra_triples(const DenseMatrix& x, int count, RngStream& rng);

struct IntraModalResult {
  double loss = 0.0;
  DenseMatrix de;
};

/// Mean triplet loss of the mined triples applied to the embeddings; the
/// music instance is loss_mm, the video instance loss_vv.
IntraModalResult intra_modal_loss(const DenseMatrix& e, const std::vector<TripleIndex>& triples,
                                  double margin);

/// w_vm*loss_vm + w_mv*loss_mv + w_vv*loss_vv + w_mm*loss_mm.
double combine_components(double loss_vm, double loss_mv, double loss_vv, double loss_mm,
                          const TripletLossConfig& cfg);

struct CombinedLossResult {
  double total = 0.0;
  double loss_vm = 0.0, loss_mv = 0.0, loss_vv = 0.0, loss_mm = 0.0;
  DenseMatrix de_music, de_video;  // gradients of `total`
  std::vector<TripleIndex> music_triples, video_triples;
};

/// The full training objective: inter-modal terms on the embeddings plus
/// intra-modal terms whose triples are mined on the raw input features
/// (music first, then video — fixed order, so a given rng state always
/// yields the same triples).
CombinedLossResult combined_loss(const DenseMatrix& x_music, const DenseMatrix& x_video,
                                 const DenseMatrix& e_music, const DenseMatrix& e_video,
                                 const TripletLossConfig& cfg, RngStream& rng);

struct BceLossResult {
  double loss = 0.0;
  std::vector<double> dscores;
};

/// Mean of -[y ln s + (1-y) ln(1-s)] with scores clamped into
/// [1e-7, 1-1e-7]. The clamp only guards the logs; its gradient is treated
/// as identity so saturated scores still receive a restoring signal.
BceLossResult bce_loss(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace mvr
