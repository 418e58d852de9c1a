#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dysent/csr.hpp"

namespace dysent {

// One static graph of the discrete-time sequence. Undirected, unweighted,
// no self loops; `edges` holds each pair once with u < v, sorted.
// `adjacency` stores both directions with unit values.
struct Snapshot {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;
  Csr adjacency;

  static Snapshot from_edges(int node_count, std::vector<std::pair<int, int>> edges);

  std::size_t edge_count() const { return edges.size(); }
  bool has_edge(int u, int v) const;
  std::vector<int> degrees() const;
};

// Ordered snapshot sequence over a shared node index space. Nodes absent
// from a snapshot simply have zero degree there.
struct DynamicGraph {
  int node_count = 0;
  std::vector<Snapshot> snapshots;

  int T() const { return static_cast<int>(snapshots.size()); }
};

// Node labels for downstream evaluation. Static tables key on node only;
// per-snapshot tables key on (node, t) with t in [0, T).
struct LabelTable {
  enum class Kind { Static, PerSnapshot };

  struct Record {
    int node = 0;
    int t = 0;  // ignored for static tables
    int label = 0;
  };

  Kind kind = Kind::Static;
  int class_count = 0;
  std::vector<Record> records;  // sorted by (node, t), unique keys
};

// Ground-truth generator for disentanglement tests: every node carries a
// fixed class and a Markov state chain; edges form from a base rate plus
// same-class and same-state affinities.
struct PlantedConfig {
  int node_count = 0;
  int T = 0;
  int static_classes = 2;        // K
  int dynamic_states = 2;        // M
  double state_transition_prob = 0.2;
  double edge_base_rate = 0.01;
  double static_affinity = 0.0;  // beta1, added when classes match
  double dynamic_affinity = 0.0; // beta2, added when states match
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct PlantedData {
  DynamicGraph graph;
  LabelTable static_labels;      // node -> class
  LabelTable dynamic_labels;     // (node, t) -> state
};

struct LoadStats {
  long edge_records = 0;  // valid data lines, before symmetrize/dedup
};

// Parses whitespace-separated `src dst t` lines, t 1-based in [1, T].
// '#' lines and blank lines are skipped; self-loop records are dropped.
// Throws ParseError (with line number) on malformed input and DomainError
// when t is out of range.
DynamicGraph load_edge_list(std::istream& in, int T, LoadStats* stats = nullptr);
DynamicGraph load_edge_list_file(const std::string& path, int T, LoadStats* stats = nullptr);

// `node label` (static) or `node t label` (per-snapshot, t 1-based).
LabelTable load_labels(std::istream& in, LabelTable::Kind kind);
LabelTable load_labels_file(const std::string& path, LabelTable::Kind kind);

// Symmetric GCN normalization with self loops: D^{-1/2} (A + I) D^{-1/2},
// where D is the degree of A + I. Isolated nodes get an identity row.
Csr normalize_adjacency(const Snapshot& s);

PlantedData generate_planted(const PlantedConfig& cfg);
PlantedConfig planted_config_from_file(const std::string& path);

// Per snapshot deletes floor((r/2)% of |E|) edges and inserts the same
// number of uniformly sampled absent pairs, so the edge count is preserved.
DynamicGraph perturb_edges(const DynamicGraph& g, double r_percent, std::uint64_t seed);

}  // namespace dysent
