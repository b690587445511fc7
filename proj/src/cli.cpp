#include "mvr/cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvr/features.hpp"
#include "mvr/io_util.hpp"
#include "mvr/model.hpp"
#include "mvr/retrieval.hpp"
#include "mvr/rng.hpp"
#include "mvr/synth.hpp"
#include "mvr/training.hpp"

namespace mvr {
namespace {

// Sibling stream ids to the training loop's internal streams (1 and 2), so
// every randomized stage of one run hangs off the same --seed.
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kCarveStream = 4;
constexpr std::uint64_t kSubsetStream = 5;

Modality modality_from_string(const std::string& s) {
  if (s == "music") return Modality::music;
  if (s == "video") return Modality::video;
  throw std::invalid_argument("unknown modality '" + s + "' (expected music or video)");
}

std::string split_counts(const Manifest& m) {
  int train = 0, val = 0, test = 0;
  for (const auto& [id, s] : m.split) {
    if (s == Split::train) ++train;
    else if (s == Split::val) ++val;
    else ++test;
  }
  return std::to_string(train) + " train / " + std::to_string(val) + " val / " +
         std::to_string(test) + " test";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
};

int cmd_synth(const SynthArgs& a) {
  SynthDataset ds = generate_synthetic_dataset(a.cfg);
  write_synth_dataset(a.out, ds);
  std::cout << "wrote " << a.cfg.n_pairs << " pairs (" << split_counts(ds.manifest) << ") to "
            << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

struct AggregateArgs {
  std::string frames;
  std::string modality = "music";
  std::string mode = "stats";
  std::string out;
  int segments = 0;
  double segment_seconds = 12.0;
  std::optional<std::uint64_t> seed;
};

int cmd_aggregate(const AggregateArgs& a) {
  if (a.mode != "stats" && a.mode != "mean")
    throw std::invalid_argument("aggregate: --mode must be stats or mean");
  if (a.segments < 0) throw std::invalid_argument("aggregate: --segments must be >= 0");
  if (a.segments > 0 && !a.seed)
    throw std::invalid_argument("aggregate: segment sampling is randomized; provide --seed");

  const Modality mod = modality_from_string(a.modality);
  auto seqs = load_frame_features(a.frames, mod);
  if (seqs.empty()) throw std::runtime_error("aggregate: no clips in " + a.frames);

  auto aggregate_one = [&](const FrameFeatureSequence& seq) {
    return a.mode == "stats" ? aggregate_stats(seq) : aggregate_mean(seq);
  };

  RngStream rng(a.seed.value_or(0));
  FeatureTable table;
  for (const auto& seq : seqs) {
    std::vector<double> row;
    if (a.segments > 0) {
      // aggregate each sampled window, then mean-pool across windows
      auto windows = sample_segments(seq, a.segments, a.segment_seconds, rng);
      for (const auto& w : windows) {
        ClipFeature f = aggregate_one(w);
        if (row.empty()) row.assign(f.values.size(), 0.0);
        for (std::size_t j = 0; j < f.values.size(); ++j) row[j] += f.values[j];
      }
      for (double& v : row) v /= a.segments;
    } else {
      row = aggregate_one(seq).values;
    }
    if (table.dim == 0) table.dim = static_cast<int>(row.size());
    table.clip_ids.push_back(seq.clip_id);
    table.rows.values.insert(table.rows.values.end(), row.begin(), row.end());
  }
  table.rows.rows = static_cast<int>(table.clip_ids.size());
  table.rows.cols = table.dim;
  save_feature_table(a.out, table);
  std::cout << "aggregated " << table.rows.rows << " clips (dim " << table.dim << ") to " << a.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

struct SplitArgs {
  std::string manifest;
  std::string out;
  int val_count = 0;
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a) {
  Manifest m = load_manifest(a.manifest);
  RngStream rng(a.seed);
  m = split_dataset(std::move(m), a.val_count, rng);
  save_manifest(a.out, m);
  std::cout << "wrote " << a.out << " (" << split_counts(m) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string history;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss_mode;
  std::optional<double> margin, lr, dropout;
  std::vector<double> lambdas;
  std::optional<int> batch, epochs, patience, val_every, intra_triples;
  std::optional<int> val_count, train_size;
  std::vector<int> music_widths{2048, 1024, 512};
  std::vector<int> video_widths{2048, 512};
  std::vector<int> head_widths{1024, 128, 1};
  std::optional<std::string> music_features, video_features;
};

Dataset subset_train(Dataset ds, int train_size, RngStream rng) {
  std::vector<int> train_rows = ds.rows_in_split(Split::train);
  if (train_size < 1 || train_size > static_cast<int>(train_rows.size()))
    throw std::invalid_argument("train: --train-size " + std::to_string(train_size) +
                                " outside 1.." + std::to_string(train_rows.size()) +
                                " (current train split)");
  rng.shuffle(train_rows);
  std::set<int> drop(train_rows.begin() + train_size, train_rows.end());

  Dataset out;
  std::vector<int> keep;
  for (int i = 0; i < ds.size(); ++i) {
    if (drop.count(i)) continue;
    keep.push_back(i);
    out.clip_ids.push_back(ds.clip_ids[static_cast<std::size_t>(i)]);
    out.manifest.pairs.push_back(ds.manifest.pairs[static_cast<std::size_t>(i)]);
    out.manifest.split[ds.clip_ids[static_cast<std::size_t>(i)]] =
        ds.manifest.split.at(ds.clip_ids[static_cast<std::size_t>(i)]);
  }
  out.music = gather_rows(ds.music, keep);
  out.video = gather_rows(ds.video, keep);
  out.music_source = ds.music_source;
  out.video_source = ds.video_source;
  return out;
}

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config_path.empty()) {
    cfg = load_train_config(a.config_path);
  } else if (!a.seed) {
    throw std::invalid_argument("train: provide --seed or a --config carrying one");
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.loss_mode) cfg.mode = train_mode_from_string(*a.loss_mode);
  if (a.lr) cfg.lr = *a.lr;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.epochs) cfg.max_epochs = *a.epochs;
  if (a.patience) cfg.patience = *a.patience;
  if (a.dropout) cfg.dropout_p = *a.dropout;
  if (a.val_every) cfg.val_every = *a.val_every;
  if (a.margin) cfg.loss.margin = *a.margin;
  if (a.intra_triples) cfg.loss.intra_triples_per_batch = *a.intra_triples;
  if (!a.lambdas.empty()) {
    if (a.lambdas.size() != 4)
      throw std::invalid_argument("train: --lambdas needs four values l1,l2,l3,l4");
    cfg.loss.w_vm = a.lambdas[0];
    cfg.loss.w_mv = a.lambdas[1];
    cfg.loss.w_vv = a.lambdas[2];
    cfg.loss.w_mm = a.lambdas[3];
  }
  validate(cfg);

  TableOverrides overrides;
  if (a.music_features) overrides.music = *a.music_features;
  if (a.video_features) overrides.video = *a.video_features;
  Dataset ds = ingest_dataset(a.manifest, overrides);

  if (a.val_count) {
    RngStream carve(cfg.seed, kCarveStream);
    ds.manifest = split_dataset(std::move(ds.manifest), *a.val_count, carve);
  }
  if (a.train_size) ds = subset_train(std::move(ds), *a.train_size, RngStream(cfg.seed, kSubsetStream));

  RngStream init_rng(cfg.seed, kInitStream);
  ModelParams model =
      init_model(BranchSpec{ds.music_dim(), a.music_widths},
                 BranchSpec{ds.video_dim(), a.video_widths},
                 cfg.mode == TrainMode::bce, init_rng, a.head_widths);

  TrainResult result = train(model, ds, cfg);
  save_checkpoint(a.out, result.model, cfg);
  write_history_csv(a.history, result.history);

  std::cout << "trained " << to_string(cfg.mode) << " model on " << split_counts(ds.manifest)
            << ": " << result.history.records.size() << " evaluations";
  if (!result.history.records.empty()) {
    double best = result.history.records.front().val_loss;
    for (const auto& r : result.history.records) best = std::min(best, r.val_loss);
    std::cout << ", best val loss " << format_double(best);
  }
  std::cout << "\nwrote " << a.out << " and " << a.history << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::string split = "test";
  std::vector<int> ks{1, 10, 25};
  std::optional<std::string> music_features, video_features;
};

std::vector<int> fusion_ranks_for(const Dataset& ds, const std::vector<int>& rows,
                                  const EmbeddingIndex& index, const ModelParams& model,
                                  Modality query_modality) {
  std::vector<int> ranks;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ClipPair pair = ds.pair(rows[i]);
    const ClipFeature& q = query_modality == Modality::music ? pair.music : pair.video;
    RankedList list = rank_cross_modal(q, index, model, Scorer::fusion);
    int pos = -1;
    for (std::size_t c = 0; c < list.candidates.size(); ++c)
      if (list.candidates[c].index == static_cast<int>(i)) pos = static_cast<int>(c);
    if (pos < 0) throw std::runtime_error("eval: query '" + q.clip_id + "' missing from index");
    ranks.push_back(pos);
  }
  return ranks;
}

// Every evaluation also self-checks the recall curve: non-decreasing in k
// and exactly 100% at k = N.
void assert_recall_invariants(const std::vector<int>& ranks, int n, const std::vector<int>& ks,
                              Direction dir) {
  std::vector<int> probe(ks);
  probe.push_back(n);
  std::sort(probe.begin(), probe.end());
  probe.erase(std::unique(probe.begin(), probe.end()), probe.end());
  RecallReport r = recall_from_ranks(ranks, n, probe, dir);
  for (std::size_t i = 1; i < r.recall_percent.size(); ++i)
    if (r.recall_percent[i - 1] > r.recall_percent[i])
      throw std::runtime_error("eval: recall not monotone in k for " + to_string(dir));
  if (r.recall_percent.back() != 100.0)
    throw std::runtime_error("eval: recall at k = N is " +
                             format_double(r.recall_percent.back()) + "%, expected 100%");
}

int cmd_eval(const EvalArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  TableOverrides overrides;
  if (a.music_features) overrides.music = *a.music_features;
  if (a.video_features) overrides.video = *a.video_features;
  Dataset ds = ingest_dataset(a.manifest, overrides);

  const Split split = split_from_string(a.split);
  const std::vector<int> rows = ds.rows_in_split(split);
  if (rows.empty()) throw std::runtime_error("eval: split '" + a.split + "' is empty");
  if (a.ks.empty()) throw std::invalid_argument("eval: --k needs at least one value");
  const int n = static_cast<int>(rows.size());

  std::vector<std::string> ids;
  for (int r : rows) ids.push_back(ds.clip_ids[static_cast<std::size_t>(r)]);
  EmbeddingIndex music_index =
      build_index(gather_rows(ds.music, rows), ids, Modality::music, ckpt.model);
  EmbeddingIndex video_index =
      build_index(gather_rows(ds.video, rows), ids, Modality::video, ckpt.model);

  std::vector<int> ranks_mv, ranks_vm;
  if (ckpt.config.mode == TrainMode::tl) {
    ranks_mv = gt_ranks(music_index.e, video_index.e, ScoreKind::sq_distance);
    ranks_vm = gt_ranks(video_index.e, music_index.e, ScoreKind::sq_distance);
  } else {
    ranks_mv = fusion_ranks_for(ds, rows, video_index, ckpt.model, Modality::music);
    ranks_vm = fusion_ranks_for(ds, rows, music_index, ckpt.model, Modality::video);
  }
  assert_recall_invariants(ranks_mv, n, a.ks, Direction::music_to_video);
  assert_recall_invariants(ranks_vm, n, a.ks, Direction::video_to_music);

  RecallReport mv = recall_from_ranks(ranks_mv, n, a.ks, Direction::music_to_video);
  RecallReport vm = recall_from_ranks(ranks_vm, n, a.ks, Direction::video_to_music);
  write_recall_csv(a.out, {mv, vm});

  auto show = [](const RecallReport& r) {
    std::ostringstream line;
    line << to_string(r.direction) << ":";
    for (std::size_t i = 0; i < r.ks.size(); ++i)
      line << " R@" << r.ks[i] << "=" << format_double(r.recall_percent[i]);
    return line.str();
  };
  std::cout << "eval on " << n << " " << a.split << " pairs ("
            << (ckpt.config.mode == TrainMode::tl ? "distance" : "likelihood") << " ranking)\n"
            << show(mv) << "\n"
            << show(vm) << "\n"
            << "dispersion: music=" << format_double(dispersion(music_index))
            << " video=" << format_double(dispersion(video_index)) << "\n"
            << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// recommend
// ---------------------------------------------------------------------------

struct RecommendArgs {
  std::string checkpoint;
  std::string manifest;
  std::string query;
  std::string out;
  std::string modality = "music";
  std::string split = "test";
  int top_n = 5;
  int bins = 20;
  std::optional<std::string> music_features, video_features;
};

int cmd_recommend(const RecommendArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  TableOverrides overrides;
  if (a.music_features) overrides.music = *a.music_features;
  if (a.video_features) overrides.video = *a.video_features;
  Dataset ds = ingest_dataset(a.manifest, overrides);

  const Split split = split_from_string(a.split);
  const std::vector<int> rows = ds.rows_in_split(split);
  const Modality query_mod = modality_from_string(a.modality);

  int query_row = -1;
  for (int r : rows)
    if (ds.clip_ids[static_cast<std::size_t>(r)] == a.query) query_row = r;
  if (query_row < 0)
    throw std::runtime_error("recommend: clip '" + a.query + "' not in the " + a.split +
                             " split");

  std::vector<std::string> ids;
  for (int r : rows) ids.push_back(ds.clip_ids[static_cast<std::size_t>(r)]);
  const Modality index_mod = query_mod == Modality::music ? Modality::video : Modality::music;
  EmbeddingIndex index = build_index(
      gather_rows(index_mod == Modality::music ? ds.music : ds.video, rows), ids, index_mod,
      ckpt.model);

  ClipPair pair = ds.pair(query_row);
  const ClipFeature& q = query_mod == Modality::music ? pair.music : pair.video;
  const Scorer scorer =
      ckpt.config.mode == TrainMode::tl ? Scorer::distance : Scorer::fusion;
  RecommendReport report = recommend_report(q, index, ckpt.model, scorer, a.top_n, a.bins);
  write_text_file(a.out + ".txt", render_report_text(report));
  write_text_file(a.out + ".json", render_report_json(report));
  std::cout << "ground-truth rank " << report.gt_rank << " of " << report.n << "; wrote " << a.out
            << ".txt and " << a.out << ".json\n";
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// argument wiring
// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args) {
  CLI::App app{"cross-modal music/video embedding toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--pairs", synth_args.cfg.n_pairs, "number of clip pairs")
      ->capture_default_str();
  synth->add_option("--latent", synth_args.cfg.latent_dim, "shared latent dimension")
      ->capture_default_str();
  synth->add_option("--music-dim", synth_args.cfg.music_dim, "music feature dimension")
      ->capture_default_str();
  synth->add_option("--video-dim", synth_args.cfg.video_dim, "video feature dimension")
      ->capture_default_str();
  synth->add_option("--sigma", synth_args.cfg.noise_sigma, "additive noise level")
      ->capture_default_str();
  synth->add_option("--test-count", synth_args.cfg.test_count, "pairs held out as the test split")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.cfg.seed, "rng seed")->required();
  synth->callback([&]() { cmd_synth(synth_args); });

  AggregateArgs agg_args;
  auto* agg = app.add_subcommand("aggregate",
                                 "aggregate frame-level features into a timeless table");
  agg->add_option("--frames", agg_args.frames, "frame feature file")->required();
  agg->add_option("--modality", agg_args.modality, "music or video")->capture_default_str();
  agg->add_option("--mode", agg_args.mode, "stats (mean|var|max concat) or mean")
      ->capture_default_str();
  agg->add_option("--out", agg_args.out, "output feature table")->required();
  agg->add_option("--segments", agg_args.segments,
                  "sample this many windows per clip and mean-pool their aggregates (0 = whole clip)")
      ->capture_default_str();
  agg->add_option("--segment-seconds", agg_args.segment_seconds, "window length in seconds")
      ->capture_default_str();
  agg->add_option("--seed", agg_args.seed, "rng seed (required with --segments)");
  agg->callback([&]() { cmd_aggregate(agg_args); });

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "reassign train/val membership in a manifest");
  split->add_option("--manifest", split_args.manifest, "input manifest")->required();
  split->add_option("--val-count", split_args.val_count, "pairs to mark as validation")
      ->required();
  split->add_option("--seed", split_args.seed, "rng seed")->required();
  split->add_option("--out", split_args.out, "output manifest")->required();
  split->callback([&]() { cmd_split(split_args); });

  TrainArgs train_args;
  auto* tr = app.add_subcommand(
      "train",
      "train an embedding model (reference defaults: lr 1e-6, batch 1000, dropout 0.5, "
      "15000 epochs, margin 0.5, lambdas 1,1,0.1,0.1)");
  tr->add_option("--manifest", train_args.manifest, "dataset manifest")->required();
  tr->add_option("--out", train_args.out, "checkpoint output path")->required();
  tr->add_option("--history", train_args.history, "history CSV output path")->required();
  tr->add_option("--config", train_args.config_path, "train config JSON (flags override it)");
  tr->add_option("--seed", train_args.seed, "rng seed (required unless --config provides one)");
  tr->add_option("--loss", train_args.loss_mode, "tl (triplet) or bce [default: tl]");
  tr->add_option("--lr", train_args.lr, "learning rate [default: 1e-06]");
  tr->add_option("--batch", train_args.batch, "batch size [default: 1000]");
  tr->add_option("--epochs", train_args.epochs, "max epochs [default: 15000]");
  tr->add_option("--patience", train_args.patience,
                 "evaluations without val improvement before stopping [default: 10]");
  tr->add_option("--dropout", train_args.dropout, "dropout probability [default: 0.5]");
  tr->add_option("--val-every", train_args.val_every, "epochs between evaluations [default: 1]");
  tr->add_option("--margin", train_args.margin, "triplet margin [default: 0.5]");
  tr->add_option("--lambdas", train_args.lambdas,
                 "loss weights l1,l2,l3,l4 [default: 1,1,0.1,0.1]")
      ->delimiter(',');
  tr->add_option("--intra-triples", train_args.intra_triples,
                 "mined intra-modal triples per batch [default: 0 = batch size]");
  tr->add_option("--val-count", train_args.val_count,
                 "carve this many validation pairs out of the train split first");
  tr->add_option("--train-size", train_args.train_size,
                 "randomly keep only this many train pairs");
  tr->add_option("--music-widths", train_args.music_widths, "music branch layer widths")
      ->delimiter(',')
      ->capture_default_str();
  tr->add_option("--video-widths", train_args.video_widths, "video branch layer widths")
      ->delimiter(',')
      ->capture_default_str();
  tr->add_option("--head-widths", train_args.head_widths, "fusion head widths (bce only)")
      ->delimiter(',')
      ->capture_default_str();
  tr->add_option("--music-features", train_args.music_features,
                 "override every pair's music table path");
  tr->add_option("--video-features", train_args.video_features,
                 "override every pair's video table path");
  tr->callback([&]() { cmd_train(train_args); });

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "recall@k for both directions plus dispersion");
  ev->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint")->required();
  ev->add_option("--manifest", eval_args.manifest, "dataset manifest")->required();
  ev->add_option("--out", eval_args.out, "recall CSV output path")->required();
  ev->add_option("--split", eval_args.split, "split to evaluate")->capture_default_str();
  ev->add_option("--k", eval_args.ks, "recall cutoffs")->delimiter(',')->capture_default_str();
  ev->add_option("--music-features", eval_args.music_features,
                 "override every pair's music table path");
  ev->add_option("--video-features", eval_args.video_features,
                 "override every pair's video table path");
  ev->callback([&]() { cmd_eval(eval_args); });

  RecommendArgs rec_args;
  auto* rec = app.add_subcommand("recommend", "qualitative report for one query clip");
  rec->add_option("--checkpoint", rec_args.checkpoint, "trained checkpoint")->required();
  rec->add_option("--manifest", rec_args.manifest, "dataset manifest")->required();
  rec->add_option("--query", rec_args.query, "query clip id")->required();
  rec->add_option("--out", rec_args.out, "output path prefix (.txt and .json appended)")
      ->required();
  rec->add_option("--modality", rec_args.modality, "query modality")->capture_default_str();
  rec->add_option("--split", rec_args.split, "split holding the query and candidates")
      ->capture_default_str();
  rec->add_option("--top-n", rec_args.top_n, "candidates listed in the report")
      ->capture_default_str();
  rec->add_option("--bins", rec_args.bins, "score histogram bins")->capture_default_str();
  rec->add_option("--music-features", rec_args.music_features,
                  "override every pair's music table path");
  rec->add_option("--video-features", rec_args.video_features,
                  "override every pair's video table path");
  rec->callback([&]() { cmd_recommend(rec_args); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    auto subs = app.get_subcommands();
    std::cout << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mvr
