#include "mvr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mvr/io_util.hpp"

namespace mvr {

namespace {

DenseMatrix embed_infer(const DenseMatrix& x, Modality modality, const ModelParams& model) {
  return embed(x, {}, modality, model, Mode::infer, 0.0, nullptr).e;
}

// better(a, b): does score a beat score b for this kind?
bool better(double a, double b, ScoreKind kind) {
  return kind == ScoreKind::sq_distance ? a < b : a > b;
}

std::vector<double> score_against_index(const DenseMatrix& e_query, Modality query_modality,
                                        const EmbeddingIndex& index, const ModelParams& model,
                                        Scorer scorer) {
  const int n = index.size();
  std::vector<double> scores(static_cast<std::size_t>(n));
  if (scorer == Scorer::distance) {
    for (int i = 0; i < n; ++i)
      scores[static_cast<std::size_t>(i)] = sq_dist(e_query.row(0), index.e.row(i), index.e.cols);
    return scores;
  }
  // fusion head always takes concat(e_music, e_video)
  DenseMatrix rep(n, e_query.cols);
  for (int i = 0; i < n; ++i)
    std::copy(e_query.row(0), e_query.row(0) + e_query.cols, rep.row(i));
  return query_modality == Modality::music ? fusion_score(rep, index.e, model)
                                           : fusion_score(index.e, rep, model);
}

}  // namespace

EmbeddingIndex build_index(const DenseMatrix& x, const std::vector<std::string>& clip_ids,
                           Modality modality, const ModelParams& model) {
  if (x.rows != static_cast<int>(clip_ids.size()))
    throw std::invalid_argument("build_index: " + std::to_string(x.rows) + " rows vs " +
                                std::to_string(clip_ids.size()) + " clip ids");
  std::set<std::string> uniq(clip_ids.begin(), clip_ids.end());
  if (uniq.size() != clip_ids.size())
    throw std::invalid_argument("build_index: duplicate clip ids");
  EmbeddingIndex index;
  index.clip_ids = clip_ids;
  index.modality = modality;
  index.e = x.rows == 0 ? DenseMatrix(0, model.embedding_dim) : embed_infer(x, modality, model);
  check_finite(index.e, "index embeddings");
  return index;
}

RankedList rank_cross_modal(const ClipFeature& query, const EmbeddingIndex& index,
                            const ModelParams& model, Scorer scorer) {
  if (query.modality == index.modality)
    throw std::invalid_argument("rank_cross_modal: query and index share modality '" +
                                to_string(index.modality) + "'");
  if (scorer == Scorer::fusion && !model.head)
    throw std::invalid_argument("rank_cross_modal: fusion scorer needs a model with a head");

  DenseMatrix xq(1, static_cast<int>(query.values.size()));
  std::copy(query.values.begin(), query.values.end(), xq.row(0));
  const DenseMatrix e_query = embed_infer(xq, query.modality, model);

  RankedList list;
  list.query_id = query.clip_id;
  list.score_kind = scorer == Scorer::distance ? ScoreKind::sq_distance : ScoreKind::likelihood;
  const auto scores = score_against_index(e_query, query.modality, index, model, scorer);
  list.candidates.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    list.candidates[i] = ScoredCandidate{index.clip_ids[i], scores[i], static_cast<int>(i)};
  std::stable_sort(list.candidates.begin(), list.candidates.end(),
                   [&](const ScoredCandidate& a, const ScoredCandidate& b) {
                     return better(a.score, b.score, list.score_kind);
                   });
  return list;
}

std::vector<int> gt_ranks(const DenseMatrix& e_queries, const DenseMatrix& e_index,
                          ScoreKind kind) {
  if (kind != ScoreKind::sq_distance)
    throw std::invalid_argument("gt_ranks: only distance scores are rank-reducible here");
  if (e_queries.rows != e_index.rows || e_queries.cols != e_index.cols)
    throw std::invalid_argument("gt_ranks: aligned batches required (" + e_queries.shape_str() +
                                " vs " + e_index.shape_str() + ")");
  const int n = e_index.rows;
  std::vector<int> ranks(static_cast<std::size_t>(n));
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    for (int i = 0; i < n; ++i)
      scores[static_cast<std::size_t>(i)] = sq_dist(e_queries.row(q), e_index.row(i),
                                                    e_index.cols);
    const double gt = scores[static_cast<std::size_t>(q)];
    int rank = 0;
    // stable order: strictly-better candidates, then equal ones inserted earlier
    for (int i = 0; i < n; ++i) {
      if (scores[static_cast<std::size_t>(i)] < gt) ++rank;
      else if (scores[static_cast<std::size_t>(i)] == gt && i < q) ++rank;
    }
    ranks[static_cast<std::size_t>(q)] = rank;
  }
  return ranks;
}

std::string to_string(Direction d) {
  return d == Direction::music_to_video ? "music_to_video" : "video_to_music";
}

RecallReport recall_from_ranks(const std::vector<int>& ranks, int n, const std::vector<int>& ks,
                               Direction direction) {
  if (ranks.empty()) throw std::invalid_argument("recall: no queries");
  RecallReport report;
  report.direction = direction;
  report.ks = ks;
  report.n = n;
  for (int k : ks) {
    if (k < 1 || k > n)
      throw std::invalid_argument("recall: k=" + std::to_string(k) + " outside [1, " +
                                  std::to_string(n) + "]");
    int hits = 0;
    for (int r : ranks)
      if (r < k) ++hits;
    report.recall_percent.push_back(100.0 * hits / static_cast<double>(ranks.size()));
  }
  return report;
}

RecallReport recall_at_k(const std::vector<RankedList>& lists,
                         const std::vector<std::string>& gt_ids, const std::vector<int>& ks,
                         Direction direction) {
  if (lists.size() != gt_ids.size())
    throw std::invalid_argument("recall_at_k: list/ground-truth count mismatch");
  if (lists.empty()) throw std::invalid_argument("recall_at_k: no queries");
  const int n = static_cast<int>(lists.front().candidates.size());
  std::vector<int> ranks;
  ranks.reserve(lists.size());
  for (std::size_t q = 0; q < lists.size(); ++q) {
    if (static_cast<int>(lists[q].candidates.size()) != n)
      throw std::invalid_argument("recall_at_k: ranked lists of unequal size");
    int rank = -1;
    for (std::size_t i = 0; i < lists[q].candidates.size(); ++i)
      if (lists[q].candidates[i].clip_id == gt_ids[q]) {
        rank = static_cast<int>(i);
        break;
      }
    if (rank < 0)
      throw std::invalid_argument("recall_at_k: ground truth '" + gt_ids[q] +
                                  "' absent from the ranked list of '" + lists[q].query_id + "'");
    ranks.push_back(rank);
  }
  return recall_from_ranks(ranks, n, ks, direction);
}

double dispersion(const EmbeddingIndex& index) {
  if (index.size() < 1) throw std::invalid_argument("dispersion: empty index");
  const int n = index.size(), d = index.e.cols;
  std::vector<double> centroid(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) centroid[static_cast<std::size_t>(j)] += index.e.at(i, j);
  for (double& c : centroid) c /= n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = index.e.at(i, j) - centroid[static_cast<std::size_t>(j)];
      s += diff * diff;
    }
    total += std::sqrt(s);
  }
  return total / n;
}

void write_recall_csv(const std::string& path, const std::vector<RecallReport>& reports) {
  std::ostringstream out;
  out << "direction,k,recall_percent,n\n";
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.ks.size(); ++i)
      out << to_string(r.direction) << ',' << r.ks[i] << ','
          << format_double(r.recall_percent[i]) << ',' << r.n << "\n";
  write_text_file(path, out.str());
}

RetrievalEval evaluate_retrieval(const ModelParams& model, const DenseMatrix& x_music,
                                 const DenseMatrix& x_video,
                                 const std::vector<std::string>& clip_ids,
                                 const std::vector<int>& ks) {
  if (x_music.rows != x_video.rows)
    throw std::invalid_argument("evaluate_retrieval: unpaired batches");
  EmbeddingIndex music = build_index(x_music, clip_ids, Modality::music, model);
  EmbeddingIndex video = build_index(x_video, clip_ids, Modality::video, model);
  RetrievalEval eval;
  eval.music_to_video = recall_from_ranks(gt_ranks(music.e, video.e, ScoreKind::sq_distance),
                                          video.size(), ks, Direction::music_to_video);
  eval.video_to_music = recall_from_ranks(gt_ranks(video.e, music.e, ScoreKind::sq_distance),
                                          music.size(), ks, Direction::video_to_music);
  eval.dispersion_music = dispersion(music);
  eval.dispersion_video = dispersion(video);
  return eval;
}

RecommendReport recommend_report(const ClipFeature& query, const EmbeddingIndex& index,
                                 const ModelParams& model, Scorer scorer, int top_n,
                                 int histogram_bins) {
  if (top_n < 1) throw std::invalid_argument("recommend_report: top_n must be >= 1");
  if (histogram_bins < 1) throw std::invalid_argument("recommend_report: need >= 1 bin");
  if (index.size() < 1) throw std::invalid_argument("recommend_report: empty index");
  RankedList list = rank_cross_modal(query, index, model, scorer);
  RecommendReport report;
  report.query_id = query.clip_id;
  report.score_kind = list.score_kind;
  report.n = static_cast<int>(list.candidates.size());
  for (std::size_t i = 0; i < list.candidates.size(); ++i) {
    if (list.candidates[i].clip_id == query.clip_id)
      report.gt_rank = static_cast<int>(i) + 1;  // 1-based, as rendered
    if (static_cast<int>(i) < top_n) report.top.push_back(list.candidates[i]);
  }

  double lo = list.candidates.front().score, hi = lo;
  for (const auto& c : list.candidates) {
    lo = std::min(lo, c.score);
    hi = std::max(hi, c.score);
  }
  const double width = hi > lo ? hi - lo : 1.0;  // all-equal scores: one-bin degenerate case
  report.hist_counts.assign(static_cast<std::size_t>(histogram_bins), 0);
  for (int b = 0; b <= histogram_bins; ++b)
    report.hist_edges.push_back(lo + width * b / histogram_bins);
  double gt_score = 0.0;
  for (const auto& c : list.candidates) {
    int bin = static_cast<int>((c.score - lo) / width * histogram_bins);
    bin = std::clamp(bin, 0, histogram_bins - 1);
    ++report.hist_counts[static_cast<std::size_t>(bin)];
    if (c.clip_id == query.clip_id) gt_score = c.score;
  }
  if (report.gt_rank > 0) {
    int bin = static_cast<int>((gt_score - lo) / width * histogram_bins);
    report.gt_bin = std::clamp(bin, 0, histogram_bins - 1);
  }
  return report;
}

std::string render_report_text(const RecommendReport& report) {
  const bool dist = report.score_kind == ScoreKind::sq_distance;
  const double render_scale = dist ? 1000.0 : 1.0;
  std::ostringstream out;
  out << "query: " << report.query_id << "\n";
  out << "scorer: " << (dist ? "sq_distance (shown x1000)" : "likelihood") << "\n";
  out << "candidates: " << report.n << "\n";
  if (report.gt_rank > 0)
    out << "ground-truth rank: " << report.gt_rank << " of " << report.n << "\n";
  else
    out << "ground-truth rank: not in index\n";
  out << "top " << report.top.size() << ":\n";
  for (std::size_t i = 0; i < report.top.size(); ++i)
    out << "  " << (i + 1) << ". " << report.top[i].clip_id << "  "
        << format_double(report.top[i].score * render_scale) << "\n";
  out << "histogram (" << report.hist_counts.size() << " bins"
      << (dist ? ", edges x1000" : "") << "):\n";
  for (std::size_t b = 0; b < report.hist_counts.size(); ++b) {
    out << "  [" << format_double(report.hist_edges[b] * render_scale) << ", "
        << format_double(report.hist_edges[b + 1] * render_scale) << ") "
        << report.hist_counts[b];
    if (static_cast<int>(b) == report.gt_bin) out << "  <- ground truth";
    out << "\n";
  }
  return out.str();
}

std::string render_report_json(const RecommendReport& report) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& c : report.top) top.push_back({{"clip_id", c.clip_id}, {"score", c.score}});
  nlohmann::json j{
      {"query_id", report.query_id},
      {"score_kind",
       report.score_kind == ScoreKind::sq_distance ? "sq_distance" : "likelihood"},
      {"n", report.n},
      {"gt_rank", report.gt_rank},
      {"top", top},
      {"histogram",
       {{"edges", report.hist_edges}, {"counts", report.hist_counts}, {"gt_bin", report.gt_bin}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace mvr
