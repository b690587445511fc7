#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mvr/model.hpp"
#include "testutil.hpp"

using namespace mvr;
using testutil::finite_diff;
using testutil::grad_rel_err;
using testutil::random_matrix;
using testutil::weighted_sum;

namespace {

BranchSpec spec(int in, std::vector<int> widths) { return BranchSpec{in, std::move(widths)}; }

// Tiny model whose preactivations stay away from ReLU kinks for FD probing.
ModelParams tiny_model_away_from_kink(const DenseMatrix& xm, const DenseMatrix& xv,
                                      bool with_head, std::uint64_t& seed_out) {
  for (std::uint64_t seed = 1; seed < 200; ++seed) {
    RngStream rng(seed);
    auto model = init_model(spec(xm.cols, {6, 5}), spec(xv.cols, {4, 5}), with_head, rng,
                            {4, 3, 1});
    BranchCache mc, vc;
    auto em = embed(xm, {}, Modality::music, model, Mode::train, 0.0, nullptr, &mc);
    auto ev = embed(xv, {}, Modality::video, model, Mode::train, 0.0, nullptr, &vc);
    bool ok = true;
    auto inspect = [&](const BranchCache& c) {
      for (const auto& fc : c.fc)
        if (fc.act == Activation::relu)
          for (double v : fc.pre.values)
            if (std::abs(v) < 2e-2) ok = false;
    };
    inspect(mc);
    inspect(vc);
    if (with_head) {
      auto [scores, hc] = fusion_forward(em.e, ev.e, model);
      for (const auto& fc : hc.fc)
        if (fc.act == Activation::relu)
          for (double v : fc.pre.values)
            if (std::abs(v) < 2e-2) ok = false;
    }
    if (ok) {
      seed_out = seed;
      return model;
    }
  }
  throw std::runtime_error("no kink-free tiny model found");
}

}  // namespace

TEST_CASE("default architecture has the canonical layer widths") {
  RngStream rng(1);
  auto model = init_model(spec(1140, {2048, 1024, 512}), spec(1024, {2048, 512}), true, rng);
  CHECK(model.embedding_dim == 512);

  REQUIRE(model.music.layers.size() == 3);
  CHECK(model.music.layers[0].w.rows == 1140);
  CHECK(model.music.layers[0].w.cols == 2048);
  CHECK(model.music.layers[1].w.cols == 1024);
  CHECK(model.music.layers[2].w.cols == 512);

  REQUIRE(model.video.layers.size() == 2);
  CHECK(model.video.layers[0].w.rows == 1024);
  CHECK(model.video.layers[0].w.cols == 2048);
  CHECK(model.video.layers[1].w.cols == 512);

  REQUIRE(model.head.has_value());
  REQUIRE(model.head->layers.size() == 3);
  CHECK(model.head->layers[0].w.rows == 1024);  // concat of two 512-d embeddings
  CHECK(model.head->layers[0].w.cols == 1024);
  CHECK(model.head->layers[1].w.cols == 128);
  CHECK(model.head->layers[2].w.cols == 1);

  // biases zero, batchnorm neutral
  for (double v : model.music.layers[0].b.values) CHECK(v == 0.0);
  for (double v : model.music.bn.gamma.values) CHECK(v == 1.0);
  for (double v : model.music.bn.running_var.values) CHECK(v == 1.0);

  // reference-scale forward: B x 1140 -> B x 512
  RngStream xr(2);
  auto x = random_matrix(2, 1140, xr);
  auto e = embed(x, {"a", "b"}, Modality::music, model, Mode::infer, 0.0, nullptr);
  CHECK(e.e.rows == 2);
  CHECK(e.e.cols == 512);
  auto xv = random_matrix(2, 1024, xr);
  auto ev = embed(xv, {"a", "b"}, Modality::video, model, Mode::infer, 0.0, nullptr);
  CHECK(ev.e.cols == 512);
}

TEST_CASE("same seed gives bit-identical parameters") {
  RngStream r1(42), r2(42);
  auto a = init_model(spec(6, {5, 4}), spec(3, {4}), true, r1, {3, 1});
  auto b = init_model(spec(6, {5, 4}), spec(3, {4}), true, r2, {3, 1});
  auto ta = collect_tensors(static_cast<const ModelParams&>(a));
  auto tb = collect_tensors(static_cast<const ModelParams&>(b));
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (std::size_t j = 0; j < ta[i]->values.size(); ++j)
      CHECK(ta[i]->values[j] == tb[i]->values[j]);
}

TEST_CASE("initialized layers keep unit-variance signals in [0.5, 2]") {
  RngStream rng(7);
  auto model = init_model(spec(256, {128, 64}), spec(256, {64}), false, rng);
  auto x = random_matrix(64, 256, rng);

  // hidden layer (ReLU): post-activation variance of He-initialized layer
  auto hidden = fc_forward(x, model.music.layers[0].w, model.music.layers[0].b,
                           Activation::relu);
  double mean = 0.0, var = 0.0;
  for (double v : hidden.y.values) mean += v;
  mean /= hidden.y.size();
  for (double v : hidden.y.values) var += (v - mean) * (v - mean);
  var /= hidden.y.size();
  CHECK(var > 0.5);
  CHECK(var < 2.0);

  // final linear layer of the video branch
  auto lin = fc_forward(x, model.video.layers[0].w, model.video.layers[0].b,
                        Activation::linear);
  mean = 0.0;
  var = 0.0;
  for (double v : lin.y.values) mean += v;
  mean /= lin.y.size();
  for (double v : lin.y.values) var += (v - mean) * (v - mean);
  var /= lin.y.size();
  CHECK(var > 0.5);
  CHECK(var < 2.0);
}

TEST_CASE("init_model validates its specs") {
  RngStream rng(3);
  CHECK_THROWS_AS(init_model(spec(4, {3}), spec(4, {5}), false, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_model(spec(4, {0}), spec(4, {1}), false, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_model(spec(4, {}), spec(4, {2}), false, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_model(spec(4, {3}), spec(4, {3}), true, rng, {4, 2}),
                  std::invalid_argument);  // head must end in one unit
}

TEST_CASE("infer-mode embedding is deterministic and input-dim checked") {
  RngStream rng(4);
  auto model = init_model(spec(5, {4, 3}), spec(6, {3}), false, rng);
  auto x = random_matrix(4, 5, rng);
  auto a = embed(x, {}, Modality::music, model, Mode::infer, 0.5, nullptr);
  auto b = embed(x, {}, Modality::music, model, Mode::infer, 0.5, nullptr);
  for (std::size_t i = 0; i < a.e.values.size(); ++i) CHECK(a.e.values[i] == b.e.values[i]);

  auto wrong = random_matrix(4, 6, rng);
  CHECK_THROWS_AS(embed(wrong, {}, Modality::music, model, Mode::infer, 0.0, nullptr),
                  std::invalid_argument);
}

TEST_CASE("identity branch with neutral stats reproduces its input") {
  Branch branch;
  branch.spec = spec(2, {2});
  branch.layers.push_back({DenseMatrix::identity(2), DenseMatrix(1, 2)});
  branch.bn.gamma = DenseMatrix(1, 2, 1.0);
  branch.bn.beta = DenseMatrix(1, 2, 0.0);
  branch.bn.running_mean = DenseMatrix(1, 2, 0.0);
  branch.bn.running_var = DenseMatrix(1, 2, 1.0);
  branch.bn.eps = 0.0;
  RngStream rng(5);
  auto x = random_matrix(3, 2, rng);
  auto [y, cache] = branch_forward(x, branch, Mode::infer, 0.0, nullptr);
  for (std::size_t i = 0; i < x.values.size(); ++i) CHECK(y.values[i] == x.values[i]);
}

TEST_CASE("train-mode dropout draws from the stream deterministically") {
  RngStream rng(6);
  auto model = init_model(spec(5, {6, 3}), spec(5, {3}), false, rng);
  auto x = random_matrix(8, 5, rng);
  RngStream d1(99), d2(99);
  auto a = embed(x, {}, Modality::music, model, Mode::train, 0.5, &d1);
  auto b = embed(x, {}, Modality::music, model, Mode::train, 0.5, &d2);
  for (std::size_t i = 0; i < a.e.values.size(); ++i) CHECK(a.e.values[i] == b.e.values[i]);
  auto c = embed(x, {}, Modality::music, model, Mode::train, 0.5, &d1);  // stream moved on
  bool any_diff = false;
  for (std::size_t i = 0; i < a.e.values.size(); ++i)
    if (a.e.values[i] != c.e.values[i]) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("fusion head: zero weights score 0.5, any input stays in (0,1)") {
  RngStream rng(8);
  auto model = init_model(spec(4, {5}), spec(4, {5}), true, rng, {3, 1});
  auto em = random_matrix(6, 5, rng, 3.0);
  auto ev = random_matrix(6, 5, rng, 3.0);
  auto scores = fusion_score(em, ev, model);
  REQUIRE(scores.size() == 6);
  for (double s : scores) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }

  for (auto& layer : model.head->layers) {
    for (double& v : layer.w.values) v = 0.0;
    for (double& v : layer.b.values) v = 0.0;
  }
  for (double s : fusion_score(em, ev, model)) CHECK(s == 0.5);

  ModelParams headless = init_model(spec(4, {5}), spec(4, {5}), false, rng);
  CHECK_THROWS_AS(fusion_score(em, ev, headless), std::invalid_argument);
  auto short_batch = random_matrix(3, 5, rng);
  CHECK_THROWS_AS(fusion_score(em, short_batch, model), std::invalid_argument);
}

TEST_CASE("zero upstream gradients give zero parameter gradients") {
  RngStream rng(9);
  auto model = init_model(spec(4, {3, 2}), spec(3, {2}), false, rng);
  auto xm = random_matrix(4, 4, rng);
  auto xv = random_matrix(4, 3, rng);
  BranchCache mc, vc;
  embed(xm, {}, Modality::music, model, Mode::train, 0.0, nullptr, &mc);
  embed(xv, {}, Modality::video, model, Mode::train, 0.0, nullptr, &vc);
  auto grads = model_backward(DenseMatrix(4, 2), DenseMatrix(4, 2), mc, vc, model);
  for (const auto* g : collect_tensors(grads))
    for (double v : g->values) CHECK(v == 0.0);
}

TEST_CASE("branch gradients match finite differences end to end") {
  RngStream xr(21);
  auto xm = random_matrix(5, 4, xr, 1.5);
  auto xv = random_matrix(5, 3, xr, 1.5);
  std::uint64_t seed = 0;
  auto model = tiny_model_away_from_kink(xm, xv, false, seed);
  RngStream ur(22);
  auto up_m = random_matrix(5, 5, ur);
  auto up_v = random_matrix(5, 5, ur);

  auto loss = [&]() {
    auto em = embed(xm, {}, Modality::music, model, Mode::train, 0.0, nullptr);
    auto ev = embed(xv, {}, Modality::video, model, Mode::train, 0.0, nullptr);
    return weighted_sum(em.e, up_m) + weighted_sum(ev.e, up_v);
  };

  BranchCache mc, vc;
  embed(xm, {}, Modality::music, model, Mode::train, 0.0, nullptr, &mc);
  embed(xv, {}, Modality::video, model, Mode::train, 0.0, nullptr, &vc);
  auto grads = model_backward(up_m, up_v, mc, vc, model);

  auto params = collect_tensors(model);
  auto analytic = collect_tensors(grads);
  REQUIRE(params.size() == analytic.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto fd = finite_diff(loss, *params[i]);
    CHECK(grad_rel_err(*analytic[i], fd) < 1e-5);
  }

  // input gradient through the music branch
  DenseMatrix dx;
  branch_backward(up_m, mc, model.music, &dx);
  auto loss_m = [&]() {
    auto em = embed(xm, {}, Modality::music, model, Mode::train, 0.0, nullptr);
    return weighted_sum(em.e, up_m);
  };
  CHECK(grad_rel_err(dx, finite_diff(loss_m, xm)) < 1e-5);
}

TEST_CASE("fusion head gradients match finite differences") {
  RngStream xr(31);
  auto xm = random_matrix(4, 4, xr, 1.5);
  auto xv = random_matrix(4, 3, xr, 1.5);
  std::uint64_t seed = 0;
  auto model = tiny_model_away_from_kink(xm, xv, true, seed);

  auto em = embed(xm, {}, Modality::music, model, Mode::train, 0.0, nullptr);
  auto ev = embed(xv, {}, Modality::video, model, Mode::train, 0.0, nullptr);
  DenseMatrix e_music = em.e, e_video = ev.e;
  RngStream ur(32);
  std::vector<double> sw;
  for (int i = 0; i < 4; ++i) sw.push_back(ur.next_gaussian());

  auto loss = [&]() {
    auto scores = fusion_score(e_music, e_video, model);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += sw[static_cast<std::size_t>(i)] * scores[i];
    return s;
  };

  auto [scores, cache] = fusion_forward(e_music, e_video, model);
  auto back = fusion_backward(sw, cache, model);

  CHECK(grad_rel_err(back.de_music, finite_diff(loss, e_music)) < 1e-5);
  CHECK(grad_rel_err(back.de_video, finite_diff(loss, e_video)) < 1e-5);
  for (std::size_t l = 0; l < model.head->layers.size(); ++l) {
    CHECK(grad_rel_err(back.head_grads[l].w, finite_diff(loss, model.head->layers[l].w)) < 1e-5);
    CHECK(grad_rel_err(back.head_grads[l].b, finite_diff(loss, model.head->layers[l].b)) < 1e-5);
  }
}

TEST_CASE("commit_running_stats applies the cached EMA update") {
  RngStream rng(11);
  auto model = init_model(spec(3, {2}), spec(3, {2}), false, rng);
  auto x = random_matrix(6, 3, rng, 2.0);
  BranchCache cache;
  embed(x, {}, Modality::music, model, Mode::train, 0.0, nullptr, &cache);
  bool moved = false;
  for (double v : cache.bn.new_running_mean.values)
    if (v != 0.0) moved = true;
  CHECK(moved);
  commit_running_stats(model.music, cache);
  for (int j = 0; j < 2; ++j) {
    CHECK(model.music.bn.running_mean.at(0, j) == cache.bn.new_running_mean.at(0, j));
    CHECK(model.music.bn.running_var.at(0, j) == cache.bn.new_running_var.at(0, j));
  }
}

TEST_CASE("collect_tensors orders parameters and gradients identically") {
  RngStream rng(13);
  auto model = init_model(spec(4, {3, 2}), spec(3, {2}), true, rng, {3, 1});
  auto tensors = collect_tensors(model);
  // music: 2 layers x (w,b) + gamma/beta; video: 1 layer x (w,b) + gamma/beta; head: 2 x (w,b)
  CHECK(tensors.size() == 4 + 2 + 2 + 2 + 4);
  auto xm = random_matrix(4, 4, rng);
  auto xv = random_matrix(4, 3, rng);
  BranchCache mc, vc;
  embed(xm, {}, Modality::music, model, Mode::train, 0.0, nullptr, &mc);
  embed(xv, {}, Modality::video, model, Mode::train, 0.0, nullptr, &vc);
  auto grads = model_backward(random_matrix(4, 2, rng), random_matrix(4, 2, rng), mc, vc, model);
  grads.head = std::vector<FcLayer>();
  for (const auto& layer : model.head->layers)
    grads.head->push_back({DenseMatrix(layer.w.rows, layer.w.cols),
                           DenseMatrix(layer.b.rows, layer.b.cols)});
  auto gts = collect_tensors(grads);
  REQUIRE(gts.size() == tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(gts[i]->rows == tensors[i]->rows);
    CHECK(gts[i]->cols == tensors[i]->cols);
  }
}
