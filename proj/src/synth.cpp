#include "mvr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace mvr {

namespace {

// substream tags: 1 = music mixer, 2 = video mixer, 3+i = clip i
constexpr std::uint64_t kMusicMixerStream = 1;
constexpr std::uint64_t kVideoMixerStream = 2;
constexpr std::uint64_t kClipStreamBase = 3;

std::string clip_name(int i) {
  std::string digits = std::to_string(i);
  return "clip_" + std::string(6 - std::min<std::size_t>(6, digits.size()), '0') + digits;
}

// Random matrix with orthonormal columns via modified Gram-Schmidt with one
// re-orthogonalization pass.
DenseMatrix orthonormal_mixer(int rows, int cols, RngStream rng) {
  DenseMatrix m(rows, cols);
  std::vector<double> col(static_cast<std::size_t>(rows));
  for (int j = 0; j < cols; ++j) {
    for (;;) {
      for (int i = 0; i < rows; ++i) col[static_cast<std::size_t>(i)] = rng.next_gaussian();
      for (int pass = 0; pass < 2; ++pass)
        for (int k = 0; k < j; ++k) {
          double dot = 0.0;
          for (int i = 0; i < rows; ++i) dot += col[static_cast<std::size_t>(i)] * m.at(i, k);
          for (int i = 0; i < rows; ++i) col[static_cast<std::size_t>(i)] -= dot * m.at(i, k);
        }
      double norm2 = 0.0;
      for (double v : col) norm2 += v * v;
      if (norm2 > 1e-12) {  // essentially always on the first draw
        const double inv = 1.0 / std::sqrt(norm2);
        for (int i = 0; i < rows; ++i) m.at(i, j) = col[static_cast<std::size_t>(i)] * inv;
        break;
      }
    }
  }
  return m;
}

}  // namespace

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg) {
  if (cfg.n_pairs < 1) throw std::invalid_argument("synth: n_pairs must be >= 1");
  if (cfg.latent_dim < 1 || cfg.latent_dim > std::min(cfg.music_dim, cfg.video_dim))
    throw std::invalid_argument("synth: need 1 <= latent_dim <= min(music_dim, video_dim)");
  if (cfg.noise_sigma < 0.0) throw std::invalid_argument("synth: noise_sigma must be >= 0");
  if (cfg.test_count < 0 || cfg.test_count >= cfg.n_pairs)
    throw std::invalid_argument("synth: test_count must be in [0, n_pairs)");

  RngStream root(cfg.seed);
  SynthDataset ds;
  ds.mixer_music = orthonormal_mixer(cfg.music_dim, cfg.latent_dim,
                                     root.substream(kMusicMixerStream));
  ds.mixer_video = orthonormal_mixer(cfg.video_dim, cfg.latent_dim,
                                     root.substream(kVideoMixerStream));

  ds.latents = DenseMatrix(cfg.n_pairs, cfg.latent_dim);
  ds.music.dim = cfg.music_dim;
  ds.music.rows = DenseMatrix(cfg.n_pairs, cfg.music_dim);
  ds.video.dim = cfg.video_dim;
  ds.video.rows = DenseMatrix(cfg.n_pairs, cfg.video_dim);

  for (int i = 0; i < cfg.n_pairs; ++i) {
    RngStream clip = root.substream(kClipStreamBase + static_cast<std::uint64_t>(i));
    double* z = ds.latents.row(i);
    for (int k = 0; k < cfg.latent_dim; ++k) z[k] = clip.next_gaussian();
    // draw order is part of the format: z, then music noise, then video noise
    double* xm = ds.music.rows.row(i);
    for (int d = 0; d < cfg.music_dim; ++d) {
      double v = 0.0;
      for (int k = 0; k < cfg.latent_dim; ++k) v += ds.mixer_music.at(d, k) * z[k];
      xm[d] = v;
    }
    if (cfg.noise_sigma > 0.0)
      for (int d = 0; d < cfg.music_dim; ++d) xm[d] += cfg.noise_sigma * clip.next_gaussian();
    double* xv = ds.video.rows.row(i);
    for (int d = 0; d < cfg.video_dim; ++d) {
      double v = 0.0;
      for (int k = 0; k < cfg.latent_dim; ++k) v += ds.mixer_video.at(d, k) * z[k];
      xv[d] = v;
    }
    if (cfg.noise_sigma > 0.0)
      for (int d = 0; d < cfg.video_dim; ++d) xv[d] += cfg.noise_sigma * clip.next_gaussian();

    const std::string id = clip_name(i);
    ds.music.clip_ids.push_back(id);
    ds.video.clip_ids.push_back(id);
    ManifestPair pair;
    pair.clip_id = id;
    pair.music_ref = "music.csv";
    pair.video_ref = "video.csv";
    ds.manifest.pairs.push_back(pair);
    ds.manifest.split[id] = i >= cfg.n_pairs - cfg.test_count ? Split::test : Split::train;
  }
  return ds;
}

void write_synth_dataset(const std::string& dir, const SynthDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_feature_table((fs::path(dir) / "music.csv").string(), ds.music);
  save_feature_table((fs::path(dir) / "video.csv").string(), ds.video);
  save_manifest((fs::path(dir) / "manifest.json").string(), ds.manifest);
}

}  // namespace mvr
