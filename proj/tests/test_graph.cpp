#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "dysent/errors.hpp"
#include "dysent/eval.hpp"
#include "dysent/graph.hpp"
#include "dysent/rng.hpp"

using namespace dysent;

TEST_CASE("load_edge_list builds snapshots from records") {
  std::istringstream in("0 1 1\n1 2 2\n");
  LoadStats stats;
  DynamicGraph g = load_edge_list(in, 2, &stats);
  CHECK(g.node_count == 3);
  CHECK(g.T() == 2);
  CHECK(stats.edge_records == 2);
  CHECK(g.snapshots[0].edges == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(g.snapshots[1].edges == std::vector<std::pair<int, int>>{{1, 2}});
}

TEST_CASE("load_edge_list on an empty stream") {
  std::istringstream in("");
  DynamicGraph g = load_edge_list(in, 3);
  CHECK(g.node_count == 0);
  CHECK(g.T() == 3);
  for (const auto& s : g.snapshots) CHECK(s.edges.empty());
}

TEST_CASE("load_edge_list collapses duplicates and symmetrizes") {
  std::istringstream in("# comment\n0 1 1\n1 0 1\n0 1 1\n2 0 1\n");
  LoadStats stats;
  DynamicGraph g = load_edge_list(in, 1, &stats);
  CHECK(stats.edge_records == 4);
  CHECK(g.snapshots[0].edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
  CHECK(g.snapshots[0].adjacency.at(1, 0) == 1.0);
  CHECK(g.snapshots[0].adjacency.at(0, 1) == 1.0);
}

TEST_CASE("load_edge_list error paths") {
  std::istringstream bad("0 1 1\nnot numbers\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_edge_list(bad, 2)),
                       doctest::Contains("line 2"), ParseError);
  std::istringstream range("0 1 5\n");
  CHECK_THROWS_AS(static_cast<void>(load_edge_list(range, 2)), DomainError);
  std::istringstream trailing("0 1 1 9\n");
  CHECK_THROWS_AS(static_cast<void>(load_edge_list(trailing, 2)), ParseError);
}

TEST_CASE("snapshot symmetry holds for every loaded edge") {
  Rng rng = make_rng(5);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < 40; ++i) edges.emplace_back(uniform_int(rng, 0, 9), uniform_int(rng, 0, 9));
  Snapshot s = Snapshot::from_edges(10, edges);
  for (int u = 0; u < 10; ++u)
    for (int v = 0; v < 10; ++v) CHECK(s.adjacency.at(u, v) == s.adjacency.at(v, u));
}

TEST_CASE("normalize_adjacency isolated node") {
  Snapshot s = Snapshot::from_edges(1, {});
  Csr a = normalize_adjacency(s);
  CHECK(a.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("normalize_adjacency single edge") {
  Snapshot s = Snapshot::from_edges(2, {{0, 1}});
  Csr a = normalize_adjacency(s);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(a.at(i, j) == doctest::Approx(0.5));
}

TEST_CASE("normalize_adjacency path graph") {
  Snapshot s = Snapshot::from_edges(3, {{0, 1}, {1, 2}});
  Csr a = normalize_adjacency(s);
  CHECK(a.at(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(a.at(0, 0) == doctest::Approx(0.5));
  CHECK(a.at(1, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("normalize_adjacency is symmetric with entries in (0,1]") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng, 1, 12);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < 2 * n; ++i)
      edges.emplace_back(uniform_int(rng, 0, n - 1), uniform_int(rng, 0, n - 1));
    Csr a = normalize_adjacency(Snapshot::from_edges(n, edges));
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v) {
        CHECK(a.at(u, v) == doctest::Approx(a.at(v, u)));
        if (a.at(u, v) != 0.0) {
          CHECK(a.at(u, v) > 0.0);
          CHECK(a.at(u, v) <= 1.0);
        }
      }
  }
}

namespace {

PlantedConfig desk_config() {
  PlantedConfig cfg;
  cfg.node_count = 120;
  cfg.T = 6;
  cfg.static_classes = 3;
  cfg.dynamic_states = 3;
  cfg.state_transition_prob = 0.3;
  cfg.edge_base_rate = 0.05;
  cfg.seed = 42;
  return cfg;
}

double snapshot_density(const Snapshot& s) {
  const double pairs = s.node_count * (s.node_count - 1) / 2.0;
  return static_cast<double>(s.edge_count()) / pairs;
}

}  // namespace

TEST_CASE("generate_planted is deterministic in the seed") {
  PlantedConfig cfg = desk_config();
  PlantedData a = generate_planted(cfg);
  PlantedData b = generate_planted(cfg);
  REQUIRE(a.graph.T() == b.graph.T());
  for (int t = 0; t < a.graph.T(); ++t)
    CHECK(a.graph.snapshots[t].edges == b.graph.snapshots[t].edges);
  CHECK(a.static_labels.records.size() == b.static_labels.records.size());
  for (std::size_t i = 0; i < a.static_labels.records.size(); ++i)
    CHECK(a.static_labels.records[i].label == b.static_labels.records[i].label);
}

TEST_CASE("generate_planted density matches the base rate when affinities vanish") {
  PlantedConfig cfg = desk_config();
  const PlantedData data = generate_planted(cfg);
  // Binomial concentration: each snapshot has ~n(n-1)/2 independent trials.
  const double pairs = cfg.node_count * (cfg.node_count - 1) / 2.0;
  const double se = std::sqrt(cfg.edge_base_rate * (1 - cfg.edge_base_rate) / pairs);
  for (const Snapshot& s : data.graph.snapshots)
    CHECK(std::abs(snapshot_density(s) - cfg.edge_base_rate) < 3 * se);
}

TEST_CASE("generate_planted same-class excess matches the affinity") {
  PlantedConfig cfg = desk_config();
  cfg.static_affinity = 0.3;
  const PlantedData data = generate_planted(cfg);
  std::vector<int> cls(cfg.node_count);
  for (const auto& rec : data.static_labels.records) cls[rec.node] = rec.label;

  double within_edges = 0, within_pairs = 0, cross_edges = 0, cross_pairs = 0;
  for (const Snapshot& s : data.graph.snapshots) {
    for (int u = 0; u < cfg.node_count; ++u)
      for (int v = u + 1; v < cfg.node_count; ++v) {
        const bool same = cls[u] == cls[v];
        (same ? within_pairs : cross_pairs) += 1;
        if (s.has_edge(u, v)) (same ? within_edges : cross_edges) += 1;
      }
  }
  const double diff = within_edges / within_pairs - cross_edges / cross_pairs;
  const double se = std::sqrt(0.35 * 0.65 / within_pairs + 0.05 * 0.95 / cross_pairs);
  CHECK(std::abs(diff - 0.3) < 3 * se);
}

TEST_CASE("generate_planted keeps class and final state independent") {
  PlantedConfig cfg = desk_config();
  cfg.node_count = 400;
  const PlantedData data = generate_planted(cfg);
  std::vector<int> cls(cfg.node_count), last(cfg.node_count);
  for (const auto& rec : data.static_labels.records) cls[rec.node] = rec.label;
  for (const auto& rec : data.dynamic_labels.records)
    if (rec.t == cfg.T - 1) last[rec.node] = rec.label;
  // Plug-in MI of independent uniform draws concentrates near
  // (ka-1)(kb-1)/(2n) nats; allow a loose desk-scale bound.
  CHECK(discrete_mi(cls, last) < 0.05);
}

TEST_CASE("generate_planted rejects probability overflow") {
  PlantedConfig cfg = desk_config();
  cfg.edge_base_rate = 0.5;
  cfg.static_affinity = 0.4;
  cfg.dynamic_affinity = 0.2;
  CHECK_THROWS_AS(static_cast<void>(generate_planted(cfg)), ConfigError);
}

TEST_CASE("perturb_edges r=0 is the identity") {
  const PlantedData data = generate_planted(desk_config());
  DynamicGraph out = perturb_edges(data.graph, 0.0, 7);
  for (int t = 0; t < out.T(); ++t)
    CHECK(out.snapshots[t].edges == data.graph.snapshots[t].edges);
}

TEST_CASE("perturb_edges swaps exactly the quota") {
  // 100-edge snapshot at r=50: 25 deleted, 25 added, count unchanged.
  std::vector<std::pair<int, int>> edges;
  Rng rng = make_rng(3);
  std::set<std::pair<int, int>> used;
  while (edges.size() < 100) {
    int u = uniform_int(rng, 0, 39), v = uniform_int(rng, 0, 39);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (used.insert({u, v}).second) edges.emplace_back(u, v);
  }
  DynamicGraph g;
  g.node_count = 40;
  g.snapshots.push_back(Snapshot::from_edges(40, edges));

  DynamicGraph out = perturb_edges(g, 50.0, 9);
  REQUIRE(out.snapshots[0].edge_count() == 100);
  std::set<std::pair<int, int>> before(g.snapshots[0].edges.begin(), g.snapshots[0].edges.end());
  std::set<std::pair<int, int>> after(out.snapshots[0].edges.begin(),
                                      out.snapshots[0].edges.end());
  int removed = 0, added = 0;
  for (const auto& e : before) removed += after.count(e) == 0;
  for (const auto& e : after) added += before.count(e) == 0;
  CHECK(removed == 25);
  CHECK(added == 25);
}

TEST_CASE("perturb_edges is deterministic and preserves counts") {
  const PlantedData data = generate_planted(desk_config());
  DynamicGraph a = perturb_edges(data.graph, 20.0, 123);
  DynamicGraph b = perturb_edges(data.graph, 20.0, 123);
  for (int t = 0; t < a.T(); ++t) {
    CHECK(a.snapshots[t].edges == b.snapshots[t].edges);
    CHECK(a.snapshots[t].edge_count() == data.graph.snapshots[t].edge_count());
  }
}

TEST_CASE("label files round-trip") {
  std::istringstream stat("0 1\n1 0\n2 1\n");
  LabelTable t1 = load_labels(stat, LabelTable::Kind::Static);
  CHECK(t1.class_count == 2);
  CHECK(t1.records.size() == 3);
  CHECK(t1.records[2].label == 1);

  std::istringstream dyn("0 1 1\n0 2 0\n1 1 2\n");
  LabelTable t2 = load_labels(dyn, LabelTable::Kind::PerSnapshot);
  CHECK(t2.class_count == 3);
  CHECK(t2.records[1].t == 1);  // 1-based in files
}

TEST_CASE("planted config file maps keys onto fields") {
  KeyValueConfig kv = KeyValueConfig::from_string(
      "node_count = 50\nT = 4\nstatic_classes = 3\ndynamic_states = 2\n"
      "state_transition_prob = 0.25\nedge_base_rate = 0.02\n"
      "static_affinity = 0.1\ndynamic_affinity = 0.05\nseed = 9\n");
  CHECK(kv.get_int("node_count", 0) == 50);
  CHECK(kv.get_real("static_affinity", 0) == doctest::Approx(0.1));
}
