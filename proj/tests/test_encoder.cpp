#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dysent/encoder.hpp"
#include "dysent/errors.hpp"
#include "dysent/graph.hpp"
#include "dysent/rng.hpp"

using namespace dysent;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

DynamicGraph toy_graph(int node_count = 6, int T = 4, std::uint64_t seed = 13) {
  Rng rng = make_rng(seed);
  DynamicGraph g;
  g.node_count = node_count;
  for (int t = 0; t < T; ++t) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < node_count; ++i)
      edges.emplace_back(uniform_int(rng, 0, node_count - 1),
                         uniform_int(rng, 0, node_count - 1));
    g.snapshots.push_back(Snapshot::from_edges(node_count, edges));
  }
  return g;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.d[i] - b.d[i]));
  return worst;
}

}  // namespace

TEST_CASE("unit mask equals the unmasked encoding") {
  DynamicGraph g = toy_graph();
  GraphTensors gt = precompute_graph(g);
  GcnGruEncoder enc = GcnGruEncoder::init({g.node_count, 8, 4}, 1);

  Tape tape;
  EncoderVars vars = register_encoder(tape, enc, false);
  Var plain = encode_clip(tape, vars, enc.cfg, gt, 0, g.T());
  Var ones = tape.constant(Mat::filled(1, g.T(), 1.0));
  Var masked = encode_clip(tape, vars, enc.cfg, gt, 0, g.T(), ones);
  CHECK(max_abs_diff(tape.value(plain), tape.value(masked)) == 0.0);
}

TEST_CASE("zero mask removes all structural signal") {
  DynamicGraph a = toy_graph(6, 3, 21);
  DynamicGraph b = toy_graph(6, 3, 22);  // different edges
  GcnGruEncoder enc = GcnGruEncoder::init({6, 8, 4}, 2);

  auto encode_zeroed = [&](const DynamicGraph& g) {
    GraphTensors gt = precompute_graph(g);
    Tape tape;
    EncoderVars vars = register_encoder(tape, enc, false);
    Var zeros = tape.constant(Mat::zeros(1, g.T()));
    return tape.value(encode_clip(tape, vars, enc.cfg, gt, 0, g.T(), zeros));
  };
  CHECK(max_abs_diff(encode_zeroed(a), encode_zeroed(b)) == 0.0);
}

TEST_CASE("relabeling nodes permutes the output rows") {
  const int n = 6;
  DynamicGraph g = toy_graph(n, 3, 31);
  std::vector<int> perm = {3, 0, 5, 1, 4, 2};

  DynamicGraph pg;
  pg.node_count = n;
  for (const Snapshot& s : g.snapshots) {
    std::vector<std::pair<int, int>> edges;
    for (auto [u, v] : s.edges) edges.emplace_back(perm[u], perm[v]);
    pg.snapshots.push_back(Snapshot::from_edges(n, edges));
  }

  GcnGruEncoder enc = GcnGruEncoder::init({n, 8, 4}, 3);
  GcnGruEncoder penc = enc;
  for (int v = 0; v < n; ++v)
    for (int c = 0; c < enc.cfg.hidden; ++c) penc.w1.at(perm[v], c) = enc.w1.at(v, c);

  Mat out = time_invariant_final(enc, precompute_graph(g));
  Mat pout = time_invariant_final(penc, precompute_graph(pg));
  for (int v = 0; v < n; ++v)
    for (int c = 0; c < 4; ++c)
      CHECK(pout.at(perm[v], c) == doctest::Approx(out.at(v, c)).epsilon(1e-12));
}

TEST_CASE("encode_sequence matches encode_clip at T=1 and keeps shapes") {
  DynamicGraph g = toy_graph(5, 1, 41);
  GraphTensors gt = precompute_graph(g);
  GcnGruEncoder enc = GcnGruEncoder::init({5, 6, 3}, 4);

  Tape tape;
  EncoderVars vars = register_encoder(tape, enc, false);
  std::vector<Var> seq = encode_sequence(tape, vars, enc.cfg, gt);
  REQUIRE(seq.size() == 1);
  Var clip = encode_clip(tape, vars, enc.cfg, gt, 0, 1);
  CHECK(max_abs_diff(tape.value(seq[0]), tape.value(clip)) == 0.0);

  DynamicGraph g4 = toy_graph(5, 4, 42);
  GraphTensors gt4 = precompute_graph(g4);
  Tape tape4;
  EncoderVars vars4 = register_encoder(tape4, enc, false);
  std::vector<Var> seq4 = encode_sequence(tape4, vars4, enc.cfg, gt4);
  REQUIRE(seq4.size() == 4);
  for (const Var& v : seq4) {
    CHECK(tape4.value(v).rows == 5);
    CHECK(tape4.value(v).cols == 3);
  }
}

TEST_CASE("hidden state at t ignores later snapshots") {
  DynamicGraph g = toy_graph(6, 5, 51);
  GcnGruEncoder enc = GcnGruEncoder::init({6, 8, 4}, 5);

  auto states = [&](const DynamicGraph& graph) {
    GraphTensors gt = precompute_graph(graph);
    Tape tape;
    EncoderVars vars = register_encoder(tape, enc, false);
    std::vector<Var> seq = encode_sequence(tape, vars, enc.cfg, gt);
    std::vector<Mat> out;
    for (Var v : seq) out.push_back(tape.value(v));
    return out;
  };

  std::vector<Mat> full = states(g);
  DynamicGraph truncated = g;
  for (int t = 3; t < 5; ++t)
    truncated.snapshots[t] = Snapshot::from_edges(g.node_count, {});
  std::vector<Mat> cut = states(truncated);
  for (int t = 0; t < 3; ++t) CHECK(max_abs_diff(full[t], cut[t]) == 0.0);
  CHECK(max_abs_diff(full[3], cut[3]) > 0.0);
}

TEST_CASE("encode_clip ignores snapshots outside its window") {
  DynamicGraph g = toy_graph(6, 5, 61);
  GcnGruEncoder enc = GcnGruEncoder::init({6, 8, 4}, 6);

  auto window = [&](const DynamicGraph& graph) {
    GraphTensors gt = precompute_graph(graph);
    Tape tape;
    EncoderVars vars = register_encoder(tape, enc, false);
    return tape.value(encode_clip(tape, vars, enc.cfg, gt, 1, 3));
  };

  Mat base = window(g);
  DynamicGraph scrambled = g;
  scrambled.snapshots[0] = Snapshot::from_edges(g.node_count, {{0, 1}});
  scrambled.snapshots[4] = Snapshot::from_edges(g.node_count, {{2, 3}});
  CHECK(max_abs_diff(base, window(scrambled)) == 0.0);
}

TEST_CASE("time_invariant_final equals the full-window clip and is deterministic") {
  DynamicGraph g = toy_graph(6, 4, 71);
  GraphTensors gt = precompute_graph(g);
  GcnGruEncoder enc = GcnGruEncoder::init({6, 8, 4}, 7);

  Mat s1 = time_invariant_final(enc, gt);
  Mat s2 = time_invariant_final(enc, gt);
  CHECK(s1.d == s2.d);
  CHECK(s1.rows == g.node_count);
  CHECK(s1.cols == 4);

  Tape tape;
  EncoderVars vars = register_encoder(tape, enc, false);
  Var clip = encode_clip(tape, vars, enc.cfg, gt, 0, g.T());
  CHECK(max_abs_diff(s1, tape.value(clip)) == 0.0);
}

TEST_CASE("encoder outputs differentiate w.r.t. params and mask") {
  DynamicGraph g = toy_graph(4, 3, 81);
  GraphTensors gt = precompute_graph(g);
  const EncoderConfig cfg{4, 5, 2};

  // Gradient w.r.t. a particular weight tensor and the mask jointly.
  GcnGruEncoder enc = GcnGruEncoder::init(cfg, 8);
  auto build = [&](Tape& tape, const std::vector<Var>& xs) {
    EncoderVars vars;
    vars.w1 = xs[0];
    vars.w2 = xs[1];
    vars.wz = tape.constant(enc.wz);
    vars.uz = tape.constant(enc.uz);
    vars.bz = xs[2];
    vars.wr = tape.constant(enc.wr);
    vars.ur = tape.constant(enc.ur);
    vars.br = tape.constant(enc.br);
    vars.wh = tape.constant(enc.wh);
    vars.uh = xs[3];
    vars.bh = tape.constant(enc.bh);
    vars.w_out = xs[4];
    Var out = encode_clip(tape, vars, cfg, gt, 0, 3, xs[5]);
    return tape.sum_squares(out);
  };
  Mat mask(1, 3);
  mask.d = {1.0, 0.6, 0.2};
  double err = ad::grad_check(build, {enc.w1, enc.w2, enc.bz, enc.uh, enc.w_out, mask}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("encode_clip rejects bad windows and masks") {
  DynamicGraph g = toy_graph(4, 3, 91);
  GraphTensors gt = precompute_graph(g);
  GcnGruEncoder enc = GcnGruEncoder::init({4, 5, 2}, 9);
  Tape tape;
  EncoderVars vars = register_encoder(tape, enc, false);
  CHECK_THROWS_AS(static_cast<void>(encode_clip(tape, vars, enc.cfg, gt, 2, 3)), ShapeError);
  Var short_mask = tape.constant(Mat::filled(1, 2, 1.0));
  CHECK_THROWS_AS(static_cast<void>(encode_clip(tape, vars, enc.cfg, gt, 0, 3, short_mask)),
                  ShapeError);
}
