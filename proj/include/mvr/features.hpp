#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvr/dense_matrix.hpp"
#include "mvr/rng.hpp"

namespace mvr {

enum class Modality { music, video };
enum class Split { train, val, test };

std::string to_string(Modality m);
std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// One clip's frame-level features, one row per analysis frame.
struct FrameFeatureSequence {
  std::string clip_id;
  Modality modality = Modality::music;
  DenseMatrix frames;  // T x D
  double frame_rate = 1.0;

  double duration_seconds() const { return frames.rows / frame_rate; }
};

/// A whole-clip ("timeless") feature vector.
struct ClipFeature {
  std::string clip_id;
  Modality modality = Modality::music;
  std::vector<double> values;
  std::string source;  // free-text tag of the upstream extractor
};

struct ClipPair {
  std::string clip_id;
  ClipFeature music;
  ClipFeature video;
};

/// concat(mean, variance, max) per dimension over frames; variance is the
/// population variance (divide by T). Output length 3*D.
ClipFeature aggregate_stats(const FrameFeatureSequence& seq);

/// Per-dimension mean only; output length D.
ClipFeature aggregate_mean(const FrameFeatureSequence& seq);

/// n_segments contiguous windows of ceil(segment_seconds * frame_rate) frames,
/// start offsets uniform with replacement. The clip must cover at least one
/// segment.
std::vector<FrameFeatureSequence> sample_segments(const FrameFeatureSequence& seq, int n_segments,
                                                  double segment_seconds, RngStream& rng);

// ---------------------------------------------------------------------------
// Dataset manifest and ingestion
// ---------------------------------------------------------------------------

struct ManifestPair {
  std::string clip_id;
  std::string music_ref;  // path of the music feature table, relative to the manifest
  std::string video_ref;
};

struct Manifest {
  std::vector<ManifestPair> pairs;
  std::map<std::string, Split> split;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& m);

/// Reassigns the non-test pairs: val_count of them (chosen by rng) become
/// val, the rest train. val_count must be smaller than the non-test pool.
Manifest split_dataset(Manifest manifest, int val_count, RngStream& rng);

/// Validated in-memory dataset: features resolved into per-modality matrices
/// whose row i corresponds to manifest.pairs[i]. Immutable after ingest.
struct Dataset {
  Manifest manifest;
  std::vector<std::string> clip_ids;
  DenseMatrix music;  // N x music_dim
  DenseMatrix video;  // N x video_dim
  std::string music_source;
  std::string video_source;

  int size() const { return static_cast<int>(clip_ids.size()); }
  int music_dim() const { return music.cols; }
  int video_dim() const { return video.cols; }
  ClipPair pair(int i) const;
  std::vector<int> rows_in_split(Split s) const;
};

/// Optional per-modality table overrides; keys replace every pair's path ref
/// for that modality (the pluggable-feature-table axis).
struct TableOverrides {
  std::optional<std::string> music;
  std::optional<std::string> video;
};

Dataset ingest_dataset(const std::string& manifest_path, const TableOverrides& overrides = {});

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Timeless feature table: header "clip_id,dim=<D>", then one line per clip
/// "<clip_id>,<v0>,...,<v(D-1)>".
struct FeatureTable {
  int dim = 0;
  std::vector<std::string> clip_ids;
  DenseMatrix rows;  // N x dim
};

FeatureTable load_feature_table(const std::string& path);
void save_feature_table(const std::string& path, const FeatureTable& table);

/// Frame feature file: header "clip_id,dim=<D>,frame_rate=<hz>", then one
/// line per frame "<clip_id>,<frame_index>,<v0>,...". Frames of a clip must
/// be contiguous and their indices consecutive from 0.
std::vector<FrameFeatureSequence> load_frame_features(const std::string& path, Modality modality);
void save_frame_features(const std::string& path, const std::vector<FrameFeatureSequence>& seqs);

}  // namespace mvr
