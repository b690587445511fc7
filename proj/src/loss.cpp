#include "mvr/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mvr {

namespace {

void check_margin(double margin) {
  if (!(margin > 0.0)) throw std::invalid_argument("triplet margin must be > 0");
}

}  // namespace

TripletResult triplet_loss_and_grad(std::span<const double> a, std::span<const double> p,
                                    std::span<const double> n, double margin) {
  check_margin(margin);
  if (a.size() != p.size() || a.size() != n.size())
    throw std::invalid_argument("triplet_loss_and_grad: vector sizes differ (" +
                                std::to_string(a.size()) + ", " + std::to_string(p.size()) +
                                ", " + std::to_string(n.size()) + ")");
  const int d = static_cast<int>(a.size());
  const double d_ap = sq_dist(a.data(), p.data(), d);
  const double d_an = sq_dist(a.data(), n.data(), d);
  TripletResult r;
  r.da.assign(a.size(), 0.0);
  r.dp.assign(a.size(), 0.0);
  r.dn.assign(a.size(), 0.0);
  const double hinge = d_ap - d_an + margin;
  if (hinge <= 0.0) return r;  // inactive, zero gradients at the boundary too
  r.loss = hinge;
  for (int k = 0; k < d; ++k) {
    r.da[k] = 2.0 * (n[k] - p[k]);
    r.dp[k] = -2.0 * (a[k] - p[k]);
    r.dn[k] = 2.0 * (a[k] - n[k]);
  }
  return r;
}

InterModalResult inter_modal_loss(const DenseMatrix& e_music, const DenseMatrix& e_video,
                                  double margin) {
  check_margin(margin);
  if (e_music.rows != e_video.rows || e_music.cols != e_video.cols)
    throw std::invalid_argument("inter_modal_loss: batches misaligned (" + e_music.shape_str() +
                                " vs " + e_video.shape_str() + ")");
  const int b = e_music.rows;
  const int d = e_music.cols;
  if (b < 2) throw std::invalid_argument("inter_modal_loss: batch must have >= 2 clips");

  // dist(i, j) = ||e_V_i - e_M_j||^2, accumulated exactly like sq_dist so
  // hinge activation decisions match a per-triple scalar oracle bit for bit
  DenseMatrix dist(b, b);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j) dist.at(i, j) = sq_dist(e_video.row(i), e_music.row(j), d);
  const double scale = 1.0 / (static_cast<double>(b) * (b - 1));

  InterModalResult r;
  r.de_music_vm = DenseMatrix(b, d);
  r.de_video_vm = DenseMatrix(b, d);
  r.de_music_mv = DenseMatrix(b, d);
  r.de_video_mv = DenseMatrix(b, d);

  for (int i = 0; i < b; ++i) {
    const double* vi = e_video.row(i);
    const double* mi = e_music.row(i);
    const double d_match = dist.at(i, i);
    for (int j = 0; j < b; ++j) {
      if (j == i) continue;
      const double* mj = e_music.row(j);
      const double* vj = e_video.row(j);

      // video anchor: (e_Vi, e_Mi, e_Mj)
      if (d_match - dist.at(i, j) + margin > 0.0) {
        r.loss_vm += (d_match - dist.at(i, j) + margin) * scale;
        double* g_vi = r.de_video_vm.row(i);
        double* g_mi = r.de_music_vm.row(i);
        double* g_mj = r.de_music_vm.row(j);
        for (int k = 0; k < d; ++k) {
          g_vi[k] += 2.0 * (mj[k] - mi[k]) * scale;
          g_mi[k] += -2.0 * (vi[k] - mi[k]) * scale;
          g_mj[k] += 2.0 * (vi[k] - mj[k]) * scale;
        }
      }

      // music anchor: (e_Mi, e_Vi, e_Vj); ||e_M_i - e_V_j||^2 = dist(j, i)
      if (d_match - dist.at(j, i) + margin > 0.0) {
        r.loss_mv += (d_match - dist.at(j, i) + margin) * scale;
        double* g_mi = r.de_music_mv.row(i);
        double* g_vi = r.de_video_mv.row(i);
        double* g_vj = r.de_video_mv.row(j);
        for (int k = 0; k < d; ++k) {
          g_mi[k] += 2.0 * (vj[k] - vi[k]) * scale;
          g_vi[k] += -2.0 * (mi[k] - vi[k]) * scale;
          g_vj[k] += 2.0 * (mi[k] - vj[k]) * scale;
        }
      }
    }
  }
  return r;
}

std::vector<TripleIndex> mine_intra_triples(const DenseMatrix& x, int count, RngStream& rng) {
  const int b = x.rows;
  if (b < 3) throw std::invalid_argument("mine_intra_triples: need >= 3 rows, got " +
                                         std::to_string(b));
  if (count < 0) throw std::invalid_argument("mine_intra_triples: negative count");
  std::vector<TripleIndex> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    const int a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(b)));
    int c1 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(b - 1)));
    if (c1 >= a) ++c1;
    int c2 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(b - 2)));
    const int lo = std::min(a, c1), hi = std::max(a, c1);
    if (c2 >= lo) ++c2;
    if (c2 >= hi) ++c2;

    const double d1 = sq_dist(x.row(a), x.row(c1), x.cols);
    const double d2 = sq_dist(x.row(a), x.row(c2), x.cols);
    TripleIndex tri;
    tri.a = a;
    if (d1 < d2 || (d1 == d2 && c1 < c2)) {
      tri.p = c1;
      tri.n = c2;
    } else {
      tri.p = c2;
      tri.n = c1;
    }
    out.push_back(tri);
  }
  return out;
}

IntraModalResult intra_modal_loss(const DenseMatrix& e, const std::vector<TripleIndex>& triples,
                                  double margin) {
  check_margin(margin);
  IntraModalResult r;
  r.de = DenseMatrix(e.rows, e.cols);
  if (triples.empty()) return r;
  const double scale = 1.0 / static_cast<double>(triples.size());
  const int d = e.cols;
  for (const TripleIndex& t : triples) {
    if (t.a < 0 || t.a >= e.rows || t.p < 0 || t.p >= e.rows || t.n < 0 || t.n >= e.rows)
      throw std::out_of_range("intra_modal_loss: triple index outside the batch");
    const double* a = e.row(t.a);
    const double* p = e.row(t.p);
    const double* n = e.row(t.n);
    const double hinge = sq_dist(a, p, d) - sq_dist(a, n, d) + margin;
    if (hinge <= 0.0) continue;
    r.loss += hinge * scale;
    double* ga = r.de.row(t.a);
    double* gp = r.de.row(t.p);
    double* gn = r.de.row(t.n);
    for (int k = 0; k < d; ++k) {
      ga[k] += 2.0 * (n[k] - p[k]) * scale;
      gp[k] += -2.0 * (a[k] - p[k]) * scale;
      gn[k] += 2.0 * (a[k] - n[k]) * scale;
    }
  }
  return r;
}

double combine_components(double loss_vm, double loss_mv, double loss_vv, double loss_mm,
                          const TripletLossConfig& cfg) {
  for (double v : {loss_vm, loss_mv, loss_vv, loss_mm})
    if (!std::isfinite(v)) throw std::invalid_argument("combine_components: non-finite component");
  return cfg.w_vm * loss_vm + cfg.w_mv * loss_mv + cfg.w_vv * loss_vv + cfg.w_mm * loss_mm;
}

CombinedLossResult combined_loss(const DenseMatrix& x_music, const DenseMatrix& x_video,
                                 const DenseMatrix& e_music, const DenseMatrix& e_video,
                                 const TripletLossConfig& cfg, RngStream& rng) {
  if (x_music.rows != e_music.rows || x_video.rows != e_video.rows ||
      e_music.rows != e_video.rows)
    throw std::invalid_argument("combined_loss: feature/embedding batches misaligned");

  CombinedLossResult r;
  InterModalResult inter = inter_modal_loss(e_music, e_video, cfg.margin);
  r.loss_vm = inter.loss_vm;
  r.loss_mv = inter.loss_mv;

  const int n_triples =
      cfg.intra_triples_per_batch > 0 ? cfg.intra_triples_per_batch : e_music.rows;
  r.music_triples = mine_intra_triples(x_music, n_triples, rng);
  r.video_triples = mine_intra_triples(x_video, n_triples, rng);
  IntraModalResult mm = intra_modal_loss(e_music, r.music_triples, cfg.margin);
  IntraModalResult vv = intra_modal_loss(e_video, r.video_triples, cfg.margin);
  r.loss_mm = mm.loss;
  r.loss_vv = vv.loss;

  r.total = combine_components(r.loss_vm, r.loss_mv, r.loss_vv, r.loss_mm, cfg);

  r.de_music = DenseMatrix(e_music.rows, e_music.cols);
  axpy_inplace(r.de_music, cfg.w_vm, inter.de_music_vm);
  axpy_inplace(r.de_music, cfg.w_mv, inter.de_music_mv);
  axpy_inplace(r.de_music, cfg.w_mm, mm.de);
  r.de_video = DenseMatrix(e_video.rows, e_video.cols);
  axpy_inplace(r.de_video, cfg.w_vm, inter.de_video_vm);
  axpy_inplace(r.de_video, cfg.w_mv, inter.de_video_mv);
  axpy_inplace(r.de_video, cfg.w_vv, vv.de);
  return r;
}

BceLossResult bce_loss(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("bce_loss: " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  if (scores.empty()) throw std::invalid_argument("bce_loss: empty batch");
  constexpr double kClamp = 1e-7;
  BceLossResult r;
  r.dscores.resize(scores.size());
  const double scale = 1.0 / static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("bce_loss: labels must be 0 or 1");
    const double s = std::min(std::max(scores[i], kClamp), 1.0 - kClamp);
    const double y = labels[i];
    r.loss += -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s)) * scale;
    r.dscores[i] = (s - y) / (s * (1.0 - s)) * scale;
  }
  return r;
}

}  // namespace mvr
