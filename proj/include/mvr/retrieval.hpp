#pragma once

#include <string>
#include <vector>

#include "mvr/features.hpp"
#include "mvr/model.hpp"

namespace mvr {

struct EmbeddingIndex {
  std::vector<std::string> clip_ids;
  DenseMatrix e;  // N x embedding_dim
  Modality modality = Modality::video;

  int size() const { return e.rows; }
};

/// Infer-mode embeddings for all clips; ids must be unique.
EmbeddingIndex build_index(const DenseMatrix& x, const std::vector<std::string>& clip_ids,
                           Modality modality, const ModelParams& model);

enum class Scorer { distance, fusion };
enum class ScoreKind { sq_distance, likelihood };

struct ScoredCandidate {
  std::string clip_id;
  double score = 0.0;
  int index = 0;  // insertion position in the index (the tie-break key)
};

struct RankedList {
  std::string query_id;
  ScoreKind score_kind = ScoreKind::sq_distance;
  std::vector<ScoredCandidate> candidates;  // ascending distance / descending likelihood
};

/// Scores every candidate in the opposite-modality index against the raw
/// query feature vector and sorts stably (ties keep insertion order).
RankedList rank_cross_modal(const ClipFeature& query, const EmbeddingIndex& index,
                            const ModelParams& model, Scorer scorer);

/// Rank of row i of e_queries among all index rows, where the ground truth
/// of query i is index row i (0-based ranks). Equivalent to the position in
/// rank_cross_modal's stable ordering, without materializing it.
std::vector<int> gt_ranks(const DenseMatrix& e_queries, const DenseMatrix& e_index,
                          ScoreKind kind);

enum class Direction { music_to_video, video_to_music };

std::string to_string(Direction d);

struct RecallReport {
  Direction direction = Direction::music_to_video;
  std::vector<int> ks;
  std::vector<double> recall_percent;  // parallel to ks
  int n = 0;                           // database size
};

/// Per-query binary hit (ground-truth id in the top k), averaged, x100.
/// Every ground truth must be present in its list.
RecallReport recall_at_k(const std::vector<RankedList>& lists,
                         const std::vector<std::string>& gt_ids, const std::vector<int>& ks,
                         Direction direction);

/// Same metric computed from 0-based ground-truth ranks.
RecallReport recall_from_ranks(const std::vector<int>& ranks, int n, const std::vector<int>& ks,
                               Direction direction);

/// Mean Euclidean distance of the index embeddings to their centroid.
double dispersion(const EmbeddingIndex& index);

/// CSV rows "direction,k,recall_percent,n" under a header line.
void write_recall_csv(const std::string& path, const std::vector<RecallReport>& reports);

struct RetrievalEval {
  RecallReport music_to_video;  // music queries against the video index
  RecallReport video_to_music;
  double dispersion_music = 0.0;
  double dispersion_video = 0.0;
};

/// Full protocol over aligned feature batches: row i of each modality is the
/// other's ground truth.
RetrievalEval evaluate_retrieval(const ModelParams& model, const DenseMatrix& x_music,
                                 const DenseMatrix& x_video,
                                 const std::vector<std::string>& clip_ids,
                                 const std::vector<int>& ks);

struct RecommendReport {
  std::string query_id;
  ScoreKind score_kind = ScoreKind::sq_distance;
  int n = 0;
  int gt_rank = -1;  // 1-based position of the query's own clip; -1 if absent
  std::vector<ScoredCandidate> top;
  std::vector<double> hist_edges;  // hist_counts.size() + 1 edges over raw scores
  std::vector<int> hist_counts;
  int gt_bin = -1;
};

RecommendReport recommend_report(const ClipFeature& query, const EmbeddingIndex& index,
                                 const ModelParams& model, Scorer scorer, int top_n,
                                 int histogram_bins);

/// Human-readable rendering; squared distances are shown x1000.
std::string render_report_text(const RecommendReport& report);

/// JSON sidecar {query_id, gt_rank, top: [...], histogram: {...}}.
std::string render_report_json(const RecommendReport& report);

}  // namespace mvr
