#pragma once

#include <cstdint>
#include <string>

#include "mvr/features.hpp"

namespace mvr {

struct SynthConfig {
  int n_pairs = 1200;
  int latent_dim = 16;
  int music_dim = 64;
  int video_dim = 48;
  double noise_sigma = 0.1;
  int test_count = 200;  // trailing clips marked test; the rest train
  std::uint64_t seed = 0;
};

/// Latent-correlated paired features: x_M = A z + sigma*eps_M and
/// x_V = B z + sigma*eps_V share the clip's latent z, with A and B
/// seed-derived mixing maps with orthonormal columns (so A^T x recovers z
/// when sigma = 0).
struct SynthDataset {
  Manifest manifest;
  FeatureTable music;
  FeatureTable video;
  DenseMatrix latents;       // n_pairs x latent_dim
  DenseMatrix mixer_music;   // music_dim x latent_dim
  DenseMatrix mixer_video;   // video_dim x latent_dim
};

/// Deterministic in (seed, config): clip i draws from its own substream, so
/// generation order or parallelism cannot change the result.
SynthDataset generate_synthetic_dataset(const SynthConfig& cfg);

/// Writes music.csv, video.csv and manifest.json into dir (created if
/// needed), in the features module's formats.
void write_synth_dataset(const std::string& dir, const SynthDataset& ds);

}  // namespace mvr
