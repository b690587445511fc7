#include "mvr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <json.hpp>

#include "mvr/io_util.hpp"
#include "mvr/retrieval.hpp"

namespace mvr {

using nlohmann::json;

std::string to_string(TrainMode m) { return m == TrainMode::tl ? "tl" : "bce"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "tl") return TrainMode::tl;
  if (s == "bce") return TrainMode::bce;
  throw std::invalid_argument("unknown train mode '" + s + "' (expected tl or bce)");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr))
    throw std::invalid_argument("train config: lr must be positive");
  if (cfg.batch_size < 2)
    throw std::invalid_argument("train config: batch_size must be at least 2");
  if (cfg.max_epochs < 0) throw std::invalid_argument("train config: max_epochs must be >= 0");
  if (cfg.patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
  if (!(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0))
    throw std::invalid_argument("train config: dropout_p must be in [0, 1)");
  if (cfg.val_every < 1) throw std::invalid_argument("train config: val_every must be >= 1");
  if (!(cfg.loss.margin >= 0.0) || !std::isfinite(cfg.loss.margin))
    throw std::invalid_argument("train config: margin must be a non-negative number");
  for (double w : {cfg.loss.w_vm, cfg.loss.w_mv, cfg.loss.w_vv, cfg.loss.w_mm})
    if (!std::isfinite(w)) throw std::invalid_argument("train config: loss weights must be finite");
  if (cfg.loss.intra_triples_per_batch < 0)
    throw std::invalid_argument("train config: intra_triples_per_batch must be >= 0");
}

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

namespace {

void require_exact_keys(const json& j, const std::vector<std::string>& keys,
                        const std::string& ctx) {
  if (!j.is_object()) throw std::invalid_argument(ctx + ": expected a JSON object");
  for (const auto& k : keys)
    if (!j.contains(k)) throw std::invalid_argument(ctx + ": missing key '" + k + "'");
  for (const auto& item : j.items())
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
      throw std::invalid_argument(ctx + ": unknown key '" + item.key() + "'");
}

int get_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw std::invalid_argument(ctx + ": '" + std::string(key) + "' must be an integer");
  return v.get<int>();
}

double get_num(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(ctx + ": '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

json loss_to_json(const TripletLossConfig& c) {
  return {{"margin", c.margin},
          {"w_vm", c.w_vm},
          {"w_mv", c.w_mv},
          {"w_vv", c.w_vv},
          {"w_mm", c.w_mm},
          {"intra_triples_per_batch", c.intra_triples_per_batch}};
}

json config_to_json_obj(const TrainConfig& cfg) {
  return {{"mode", to_string(cfg.mode)}, {"lr", cfg.lr},
          {"batch_size", cfg.batch_size}, {"max_epochs", cfg.max_epochs},
          {"patience", cfg.patience},     {"dropout_p", cfg.dropout_p},
          {"seed", cfg.seed},             {"val_every", cfg.val_every},
          {"loss", loss_to_json(cfg.loss)}};
}

TrainConfig config_from_json(const json& j, const std::string& ctx) {
  require_exact_keys(j,
                     {"mode", "lr", "batch_size", "max_epochs", "patience", "dropout_p", "seed",
                      "val_every", "loss"},
                     ctx);
  TrainConfig cfg;
  if (!j.at("mode").is_string()) throw std::invalid_argument(ctx + ": 'mode' must be a string");
  cfg.mode = train_mode_from_string(j.at("mode").get<std::string>());
  cfg.lr = get_num(j, "lr", ctx);
  cfg.batch_size = get_int(j, "batch_size", ctx);
  cfg.max_epochs = get_int(j, "max_epochs", ctx);
  cfg.patience = get_int(j, "patience", ctx);
  cfg.dropout_p = get_num(j, "dropout_p", ctx);
  if (!j.at("seed").is_number_unsigned())
    throw std::invalid_argument(ctx + ": 'seed' must be a non-negative integer");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.val_every = get_int(j, "val_every", ctx);

  const json& l = j.at("loss");
  require_exact_keys(l, {"margin", "w_vm", "w_mv", "w_vv", "w_mm", "intra_triples_per_batch"},
                     ctx + ".loss");
  cfg.loss.margin = get_num(l, "margin", ctx + ".loss");
  cfg.loss.w_vm = get_num(l, "w_vm", ctx + ".loss");
  cfg.loss.w_mv = get_num(l, "w_mv", ctx + ".loss");
  cfg.loss.w_vv = get_num(l, "w_vv", ctx + ".loss");
  cfg.loss.w_mm = get_num(l, "w_mm", ctx + ".loss");
  cfg.loss.intra_triples_per_batch = get_int(l, "intra_triples_per_batch", ctx + ".loss");
  validate(cfg);
  return cfg;
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("train config " + path + ": " + e.what());
  }
  return config_from_json(j, "train config " + path);
}

std::string train_config_to_json(const TrainConfig& cfg) {
  return config_to_json_obj(cfg).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// History
// ---------------------------------------------------------------------------

void write_history_csv(const std::string& path, const TrainHistory& history) {
  std::string out = "epoch,train_loss,val_loss,r1_mv,r10_mv,r25_mv,r1_vm,r10_vm,r25_vm,seconds\n";
  for (const auto& r : history.records) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.val_loss, r.r1_mv, r.r10_mv, r.r25_mv, r.r1_vm, r.r10_vm,
                     r.r25_vm, r.seconds}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

BceBatch make_bce_batch(const std::vector<int>& rows, RngStream& rng) {
  const int b = static_cast<int>(rows.size());
  if (b < 2)
    throw std::invalid_argument("make_bce_batch: need at least 2 pairs, got " + std::to_string(b));
  std::vector<int> sorted(rows);
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("make_bce_batch: duplicate row index in batch");

  // Rejection-sample a derangement of the video side (~e tries in expectation).
  std::vector<int> deranged;
  for (;;) {
    deranged = rows;
    rng.shuffle(deranged);
    bool ok = true;
    for (int i = 0; i < b; ++i)
      if (deranged[static_cast<std::size_t>(i)] == rows[static_cast<std::size_t>(i)]) {
        ok = false;
        break;
      }
    if (ok) break;
  }

  BceBatch out;
  out.music_rows.reserve(2 * static_cast<std::size_t>(b));
  out.video_rows.reserve(2 * static_cast<std::size_t>(b));
  out.labels.reserve(2 * static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    out.music_rows.push_back(rows[static_cast<std::size_t>(i)]);
    out.video_rows.push_back(rows[static_cast<std::size_t>(i)]);
    out.labels.push_back(1);
  }
  for (int i = 0; i < b; ++i) {
    out.music_rows.push_back(rows[static_cast<std::size_t>(i)]);
    out.video_rows.push_back(deranged[static_cast<std::size_t>(i)]);
    out.labels.push_back(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Epoch loop
// ---------------------------------------------------------------------------

namespace {

void ensure_finite_loss(double loss, TrainMode mode, int batch_index) {
  if (std::isfinite(loss)) return;
  throw std::runtime_error("train_epoch: non-finite " + to_string(mode) + " loss " +
                           format_double(loss) + " in batch " + std::to_string(batch_index) +
                           "; aborting");
}

}  // namespace

EpochStats train_epoch(ModelParams& model, const Dataset& dataset, const TrainConfig& cfg,
                       AdamState& opt, RngStream& rng) {
  std::vector<int> order = dataset.rows_in_split(Split::train);
  if (static_cast<int>(order.size()) < cfg.batch_size)
    throw std::invalid_argument("train_epoch: train split has " + std::to_string(order.size()) +
                                " pairs, need at least batch_size = " +
                                std::to_string(cfg.batch_size));
  rng.shuffle(order);
  const int n_batches = static_cast<int>(order.size()) / cfg.batch_size;

  EpochStats stats;
  auto params = collect_tensors(model);
  for (int bi = 0; bi < n_batches; ++bi) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(bi) * cfg.batch_size;
    std::vector<int> rows(first, first + cfg.batch_size);
    double batch_loss = 0.0;

    if (cfg.mode == TrainMode::tl) {
      DenseMatrix xm = gather_rows(dataset.music, rows);
      DenseMatrix xv = gather_rows(dataset.video, rows);
      auto [em, mcache] = branch_forward(xm, model.music, Mode::train, cfg.dropout_p, &rng);
      auto [ev, vcache] = branch_forward(xv, model.video, Mode::train, cfg.dropout_p, &rng);
      CombinedLossResult loss = combined_loss(xm, xv, em, ev, cfg.loss, rng);
      batch_loss = loss.total;
      ensure_finite_loss(batch_loss, cfg.mode, bi);
      ModelGrads grads = model_backward(loss.de_music, loss.de_video, mcache, vcache, model);
      adam_step(params, collect_tensors(grads), opt);
      commit_running_stats(model.music, mcache);
      commit_running_stats(model.video, vcache);
    } else {
      BceBatch bb = make_bce_batch(rows, rng);
      DenseMatrix xm = gather_rows(dataset.music, bb.music_rows);
      DenseMatrix xv = gather_rows(dataset.video, bb.video_rows);
      auto [em, mcache] = branch_forward(xm, model.music, Mode::train, cfg.dropout_p, &rng);
      auto [ev, vcache] = branch_forward(xv, model.video, Mode::train, cfg.dropout_p, &rng);
      auto [scores, hcache] = fusion_forward(em, ev, model);
      BceLossResult bce = bce_loss(scores, bb.labels);
      batch_loss = bce.loss;
      ensure_finite_loss(batch_loss, cfg.mode, bi);
      FusionBackwardResult fb = fusion_backward(bce.dscores, hcache, model);
      ModelGrads grads = model_backward(fb.de_music, fb.de_video, mcache, vcache, model);
      grads.head = std::move(fb.head_grads);
      adam_step(params, collect_tensors(grads), opt);
      commit_running_stats(model.music, mcache);
      commit_running_stats(model.video, vcache);
    }

    stats.train_loss += batch_loss;
    ++stats.batches;
  }
  stats.train_loss /= stats.batches;
  return stats;
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kTrainStream = 1;
// Recreated from scratch at every evaluation so validation losses are
// computed on identical triples (TL) or identical derangements (BCE) and
// stay comparable across epochs.
constexpr std::uint64_t kValStream = 2;

double recall_percent(const std::vector<int>& ranks, int k) {
  if (ranks.empty()) return 0.0;
  int hits = 0;
  for (int r : ranks)
    if (r < k) ++hits;
  return 100.0 * hits / static_cast<double>(ranks.size());
}

// Rank of the aligned candidate under head-likelihood scoring (descending;
// earlier index wins exact ties), one query per row.
std::vector<int> fusion_gt_ranks(const DenseMatrix& e_queries, const DenseMatrix& e_index,
                                 const ModelParams& model, bool music_query) {
  const int n = e_queries.rows;
  std::vector<int> ranks(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    DenseMatrix rep(e_index.rows, e_queries.cols);
    for (int i = 0; i < e_index.rows; ++i)
      std::copy(e_queries.row(q), e_queries.row(q) + e_queries.cols, rep.row(i));
    std::vector<double> s = music_query ? fusion_score(rep, e_index, model)
                                        : fusion_score(e_index, rep, model);
    const double gt = s[static_cast<std::size_t>(q)];
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (s[static_cast<std::size_t>(i)] > gt) ++r;
      else if (i < q && s[static_cast<std::size_t>(i)] == gt) ++r;
    }
    ranks[static_cast<std::size_t>(q)] = r;
  }
  return ranks;
}

EvalRecord evaluate_on_val(const ModelParams& model, const Dataset& ds, const TrainConfig& cfg,
                           const RngStream& master, const std::vector<int>& val_rows, int epoch,
                           double train_loss, double seconds) {
  EvalRecord rec;
  rec.epoch = epoch;
  rec.train_loss = train_loss;
  rec.seconds = seconds;

  DenseMatrix xm = gather_rows(ds.music, val_rows);
  DenseMatrix xv = gather_rows(ds.video, val_rows);
  EmbeddingBatch em = embed(xm, {}, Modality::music, model, Mode::infer, 0.0, nullptr);
  EmbeddingBatch ev = embed(xv, {}, Modality::video, model, Mode::infer, 0.0, nullptr);

  RngStream val_rng = master.substream(kValStream);
  std::vector<int> ranks_mv, ranks_vm;
  if (cfg.mode == TrainMode::tl) {
    rec.val_loss = combined_loss(xm, xv, em.e, ev.e, cfg.loss, val_rng).total;
    ranks_mv = gt_ranks(em.e, ev.e, ScoreKind::sq_distance);
    ranks_vm = gt_ranks(ev.e, em.e, ScoreKind::sq_distance);
  } else {
    std::vector<int> idx(val_rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    BceBatch bb = make_bce_batch(idx, val_rng);
    std::vector<double> scores =
        fusion_score(gather_rows(em.e, bb.music_rows), gather_rows(ev.e, bb.video_rows), model);
    rec.val_loss = bce_loss(scores, bb.labels).loss;
    ranks_mv = fusion_gt_ranks(em.e, ev.e, model, true);
    ranks_vm = fusion_gt_ranks(ev.e, em.e, model, false);
  }
  rec.r1_mv = recall_percent(ranks_mv, 1);
  rec.r10_mv = recall_percent(ranks_mv, 10);
  rec.r25_mv = recall_percent(ranks_mv, 25);
  rec.r1_vm = recall_percent(ranks_vm, 1);
  rec.r10_vm = recall_percent(ranks_vm, 10);
  rec.r25_vm = recall_percent(ranks_vm, 25);
  return rec;
}

}  // namespace

TrainResult train(const ModelParams& init, const Dataset& dataset, const TrainConfig& cfg) {
  validate(cfg);
  if (cfg.mode == TrainMode::bce && !init.head)
    throw std::invalid_argument("train: bce mode requires a model with a fusion head");
  if (cfg.mode == TrainMode::tl && init.head)
    throw std::invalid_argument(
        "train: tl mode does not train a fusion head; build the model without one");
  const std::vector<int> train_rows = dataset.rows_in_split(Split::train);
  if (static_cast<int>(train_rows.size()) < cfg.batch_size)
    throw std::invalid_argument("train: train split has " + std::to_string(train_rows.size()) +
                                " pairs, need at least batch_size = " +
                                std::to_string(cfg.batch_size));
  const std::vector<int> val_rows = dataset.rows_in_split(Split::val);
  if (cfg.mode == TrainMode::tl && val_rows.size() < 2)
    throw std::invalid_argument(
        "train: early stopping needs a validation split of at least 2 pairs");

  TrainResult out;
  out.model = init;
  AdamState opt =
      make_adam_state(collect_tensors(static_cast<const ModelParams&>(out.model)), cfg.lr);
  RngStream master(cfg.seed);
  RngStream train_rng = master.substream(kTrainStream);

  const bool do_eval = val_rows.size() >= 2;
  double best_val = std::numeric_limits<double>::infinity();
  std::optional<ModelParams> best;
  int stale_evals = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochStats stats = train_epoch(out.model, dataset, cfg, opt, train_rng);
    if (!do_eval || epoch % cfg.val_every != 0) continue;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EvalRecord rec = evaluate_on_val(out.model, dataset, cfg, master, val_rows, epoch,
                                     stats.train_loss, seconds);
    out.history.records.push_back(rec);
    if (cfg.mode != TrainMode::tl) continue;
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = out.model;
      stale_evals = 0;
    } else if (++stale_evals >= cfg.patience) {
      break;
    }
  }
  if (cfg.mode == TrainMode::tl && best) out.model = std::move(*best);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr int kCheckpointFormat = 1;

json branch_to_json(const Branch& b) {
  json layers = json::array();
  for (const FcLayer& l : b.layers) layers.push_back({{"w", l.w.values}, {"b", l.b.values}});
  return {{"spec", {{"input_dim", b.spec.input_dim}, {"layer_widths", b.spec.layer_widths}}},
          {"layers", layers},
          {"bn",
           {{"gamma", b.bn.gamma.values},
            {"beta", b.bn.beta.values},
            {"running_mean", b.bn.running_mean.values},
            {"running_var", b.bn.running_var.values},
            {"momentum", b.bn.momentum},
            {"eps", b.bn.eps}}}};
}

DenseMatrix matrix_from_json(const json& arr, int rows, int cols, const std::string& ctx) {
  if (!arr.is_array())
    throw std::invalid_argument("checkpoint: " + ctx + " must be an array");
  if (static_cast<int>(arr.size()) != rows * cols)
    throw std::invalid_argument("checkpoint: " + ctx + " has " + std::to_string(arr.size()) +
                                " values, expected " + std::to_string(rows * cols));
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw std::invalid_argument("checkpoint: " + ctx + " holds a non-numeric entry");
    m.values[i] = arr[i].get<double>();
  }
  check_finite(m, "checkpoint " + ctx);
  return m;
}

std::vector<FcLayer> layers_from_json(const json& arr, int input_dim,
                                      const std::vector<int>& widths, const std::string& ctx) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != static_cast<int>(widths.size()))
    throw std::invalid_argument("checkpoint: " + ctx + " must hold " +
                                std::to_string(widths.size()) + " layers");
  std::vector<FcLayer> out;
  int din = input_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const int dout = widths[l];
    const std::string lctx = ctx + ".layers[" + std::to_string(l) + "]";
    require_exact_keys(arr[l], {"w", "b"}, "checkpoint " + lctx);
    out.push_back({matrix_from_json(arr[l].at("w"), din, dout, lctx + ".w"),
                   matrix_from_json(arr[l].at("b"), 1, dout, lctx + ".b")});
    din = dout;
  }
  return out;
}

Branch branch_from_json(const json& j, const std::string& ctx) {
  require_exact_keys(j, {"spec", "layers", "bn"}, "checkpoint " + ctx);
  const json& spec = j.at("spec");
  require_exact_keys(spec, {"input_dim", "layer_widths"}, "checkpoint " + ctx + ".spec");
  Branch b;
  b.spec.input_dim = get_int(spec, "input_dim", "checkpoint " + ctx + ".spec");
  if (!spec.at("layer_widths").is_array())
    throw std::invalid_argument("checkpoint: " + ctx + ".spec.layer_widths must be an array");
  for (const json& w : spec.at("layer_widths")) {
    if (!w.is_number_integer() && !w.is_number_unsigned())
      throw std::invalid_argument("checkpoint: " + ctx + ".spec.layer_widths must be integers");
    b.spec.layer_widths.push_back(w.get<int>());
  }
  if (b.spec.layer_widths.empty())
    throw std::invalid_argument("checkpoint: " + ctx + ".spec.layer_widths is empty");
  b.layers = layers_from_json(j.at("layers"), b.spec.input_dim, b.spec.layer_widths, ctx);

  const json& bn = j.at("bn");
  require_exact_keys(bn, {"gamma", "beta", "running_mean", "running_var", "momentum", "eps"},
                     "checkpoint " + ctx + ".bn");
  const int d = b.spec.layer_widths.back();
  b.bn.gamma = matrix_from_json(bn.at("gamma"), 1, d, ctx + ".bn.gamma");
  b.bn.beta = matrix_from_json(bn.at("beta"), 1, d, ctx + ".bn.beta");
  b.bn.running_mean = matrix_from_json(bn.at("running_mean"), 1, d, ctx + ".bn.running_mean");
  b.bn.running_var = matrix_from_json(bn.at("running_var"), 1, d, ctx + ".bn.running_var");
  b.bn.momentum = get_num(bn, "momentum", "checkpoint " + ctx + ".bn");
  b.bn.eps = get_num(bn, "eps", "checkpoint " + ctx + ".bn");
  return b;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& model, const TrainConfig& cfg) {
  json j{{"format", kCheckpointFormat},
         {"embedding_dim", model.embedding_dim},
         {"music", branch_to_json(model.music)},
         {"video", branch_to_json(model.video)},
         {"train_config", config_to_json_obj(cfg)}};
  if (model.head) {
    json layers = json::array();
    for (const FcLayer& l : model.head->layers)
      layers.push_back({{"w", l.w.values}, {"b", l.b.values}});
    j["head"] = {{"widths", model.head->widths}, {"layers", layers}};
  } else {
    j["head"] = nullptr;
  }
  write_text_file(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("checkpoint " + path + ": " + e.what());
  }
  require_exact_keys(j, {"format", "embedding_dim", "music", "video", "head", "train_config"},
                     "checkpoint");
  if (get_int(j, "format", "checkpoint") != kCheckpointFormat)
    throw std::invalid_argument("checkpoint " + path + ": unsupported format " +
                                j.at("format").dump());

  Checkpoint ckpt;
  ckpt.model.embedding_dim = get_int(j, "embedding_dim", "checkpoint");
  ckpt.model.music = branch_from_json(j.at("music"), "music");
  ckpt.model.video = branch_from_json(j.at("video"), "video");
  if (ckpt.model.music.spec.layer_widths.back() != ckpt.model.embedding_dim ||
      ckpt.model.video.spec.layer_widths.back() != ckpt.model.embedding_dim)
    throw std::invalid_argument("checkpoint " + path +
                                ": branch widths disagree with embedding_dim");

  const json& head = j.at("head");
  if (!head.is_null()) {
    require_exact_keys(head, {"widths", "layers"}, "checkpoint head");
    FusionHead h;
    for (const json& w : head.at("widths")) {
      if (!w.is_number_integer() && !w.is_number_unsigned())
        throw std::invalid_argument("checkpoint: head.widths must be integers");
      h.widths.push_back(w.get<int>());
    }
    if (h.widths.empty() || h.widths.back() != 1)
      throw std::invalid_argument("checkpoint: head must end in a single unit");
    h.layers = layers_from_json(head.at("layers"), 2 * ckpt.model.embedding_dim, h.widths, "head");
    ckpt.model.head = std::move(h);
  }
  ckpt.config = config_from_json(j.at("train_config"), "checkpoint train_config");
  return ckpt;
}

}  // namespace mvr
