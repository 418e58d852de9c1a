#include "dysent/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "dysent/config.hpp"
#include "dysent/errors.hpp"
#include "dysent/rng.hpp"

namespace dysent {

Snapshot Snapshot::from_edges(int node_count, std::vector<std::pair<int, int>> edges) {
  Snapshot s;
  s.node_count = node_count;
  for (auto& [u, v] : edges) {
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  // Drop self loops; normalization adds its own.
  edges.erase(std::remove_if(edges.begin(), edges.end(),
                             [](const auto& e) { return e.first == e.second; }),
              edges.end());
  s.edges = std::move(edges);

  // Build the symmetric adjacency.
  std::vector<int> deg(node_count, 0);
  for (const auto& [u, v] : s.edges) {
    ++deg[u];
    ++deg[v];
  }
  Csr& a = s.adjacency;
  a.rows = a.cols = node_count;
  a.row_ptr.assign(node_count + 1, 0);
  for (int i = 0; i < node_count; ++i) a.row_ptr[i + 1] = a.row_ptr[i] + deg[i];
  a.col_idx.resize(a.row_ptr[node_count]);
  a.vals.assign(a.row_ptr[node_count], 1.0);
  std::vector<int> fill(a.row_ptr.begin(), a.row_ptr.end() - 1);
  for (const auto& [u, v] : s.edges) {
    a.col_idx[fill[u]++] = v;
    a.col_idx[fill[v]++] = u;
  }
  for (int i = 0; i < node_count; ++i)
    std::sort(a.col_idx.begin() + a.row_ptr[i], a.col_idx.begin() + a.row_ptr[i + 1]);
  return s;
}

bool Snapshot::has_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(u, v));
}

std::vector<int> Snapshot::degrees() const {
  std::vector<int> deg(node_count, 0);
  for (const auto& [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

namespace {

struct EdgeRecord {
  int u, v, t;  // t zero-based
};

}  // namespace

DynamicGraph load_edge_list(std::istream& in, int T, LoadStats* stats) {
  if (T < 1) throw DomainError("load_edge_list: T must be >= 1");
  std::vector<EdgeRecord> records;
  std::string line;
  int lineno = 0;
  long count = 0;
  int max_node = -1;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long u, v, t;
    if (!(ls >> u >> v >> t))
      throw ParseError("edge list: line " + std::to_string(lineno) +
                       ": expected 'src dst t'");
    std::string rest;
    if (ls >> rest)
      throw ParseError("edge list: line " + std::to_string(lineno) +
                       ": trailing tokens after 'src dst t'");
    if (u < 0 || v < 0)
      throw ParseError("edge list: line " + std::to_string(lineno) +
                       ": negative node index");
    if (t < 1 || t > T)
      throw DomainError("edge list: line " + std::to_string(lineno) + ": t=" +
                        std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
    ++count;
    max_node = std::max(max_node, static_cast<int>(std::max(u, v)));
    if (u == v) continue;  // self loops carry no structure here
    records.push_back({static_cast<int>(u), static_cast<int>(v), static_cast<int>(t) - 1});
  }
  DynamicGraph g;
  g.node_count = max_node + 1;
  std::vector<std::vector<std::pair<int, int>>> per_t(T);
  for (const auto& r : records) per_t[r.t].emplace_back(r.u, r.v);
  g.snapshots.reserve(T);
  for (int t = 0; t < T; ++t)
    g.snapshots.push_back(Snapshot::from_edges(g.node_count, std::move(per_t[t])));
  if (stats) stats->edge_records = count;
  return g;
}

DynamicGraph load_edge_list_file(const std::string& path, int T, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw ParseError("edge list: cannot open '" + path + "'");
  return load_edge_list(in, T, stats);
}

LabelTable load_labels(std::istream& in, LabelTable::Kind kind) {
  LabelTable table;
  table.kind = kind;
  std::string line;
  int lineno = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    LabelTable::Record rec;
    bool ok;
    if (kind == LabelTable::Kind::Static) {
      ok = static_cast<bool>(ls >> rec.node >> rec.label);
    } else {
      ok = static_cast<bool>(ls >> rec.node >> rec.t >> rec.label);
      rec.t -= 1;  // 1-based in files
    }
    if (!ok)
      throw ParseError("labels: line " + std::to_string(lineno) + ": malformed record");
    if (rec.node < 0 || rec.label < 0 || rec.t < 0)
      throw ParseError("labels: line " + std::to_string(lineno) + ": negative field");
    max_label = std::max(max_label, rec.label);
    table.records.push_back(rec);
  }
  std::sort(table.records.begin(), table.records.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.node, a.t) < std::tie(b.node, b.t);
            });
  table.class_count = max_label + 1;
  return table;
}

LabelTable load_labels_file(const std::string& path, LabelTable::Kind kind) {
  std::ifstream in(path);
  if (!in) throw ParseError("labels: cannot open '" + path + "'");
  return load_labels(in, kind);
}

Csr normalize_adjacency(const Snapshot& s) {
  const int n = s.node_count;
  std::vector<int> deg = s.degrees();
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(deg[i]) + 1.0);

  const Csr& a = s.adjacency;
  Csr out;
  out.rows = out.cols = n;
  out.row_ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i)
    out.row_ptr[i + 1] = out.row_ptr[i] + (a.row_ptr[i + 1] - a.row_ptr[i]) + 1;
  out.col_idx.resize(out.row_ptr[n]);
  out.vals.resize(out.row_ptr[n]);
  for (int i = 0; i < n; ++i) {
    int w = out.row_ptr[i];
    bool diag_done = false;
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      int j = a.col_idx[k];
      if (!diag_done && j > i) {
        out.col_idx[w] = i;
        out.vals[w] = inv_sqrt[i] * inv_sqrt[i];
        ++w;
        diag_done = true;
      }
      out.col_idx[w] = j;
      out.vals[w] = inv_sqrt[i] * inv_sqrt[j];
      ++w;
    }
    if (!diag_done) {
      out.col_idx[w] = i;
      out.vals[w] = inv_sqrt[i] * inv_sqrt[i];
      ++w;
    }
  }
  return out;
}

void PlantedConfig::validate() const {
  if (node_count < 1) throw ConfigError("planted: node_count must be >= 1");
  if (T < 1) throw ConfigError("planted: T must be >= 1");
  if (static_classes < 2) throw ConfigError("planted: static_classes must be >= 2");
  if (dynamic_states < 2) throw ConfigError("planted: dynamic_states must be >= 2");
  if (state_transition_prob < 0.0 || state_transition_prob > 1.0)
    throw ConfigError("planted: state_transition_prob outside [0, 1]");
  for (double p : {edge_base_rate, static_affinity, dynamic_affinity})
    if (p < 0.0 || p > 1.0) throw ConfigError("planted: rate outside [0, 1]");
  if (edge_base_rate + static_affinity + dynamic_affinity > 1.0)
    throw ConfigError("planted: edge_base_rate + static_affinity + dynamic_affinity > 1");
}

PlantedData generate_planted(const PlantedConfig& cfg) {
  cfg.validate();
  const int n = cfg.node_count;

  PlantedData data;
  Rng class_rng = make_rng(cfg.seed, 1);
  std::vector<int> cls(n);
  for (int v = 0; v < n; ++v) cls[v] = uniform_int(class_rng, 0, cfg.static_classes - 1);

  // State chains: with prob state_transition_prob jump to a uniform state.
  Rng chain_rng = make_rng(cfg.seed, 2);
  std::vector<std::vector<int>> state(cfg.T, std::vector<int>(n));
  for (int v = 0; v < n; ++v) state[0][v] = uniform_int(chain_rng, 0, cfg.dynamic_states - 1);
  for (int t = 1; t < cfg.T; ++t)
    for (int v = 0; v < n; ++v)
      state[t][v] = (uniform_real(chain_rng) < cfg.state_transition_prob)
                        ? uniform_int(chain_rng, 0, cfg.dynamic_states - 1)
                        : state[t - 1][v];

  data.graph.node_count = n;
  data.graph.snapshots.reserve(cfg.T);
  for (int t = 0; t < cfg.T; ++t) {
    Rng edge_rng = make_rng(cfg.seed, 100 + static_cast<std::uint64_t>(t));
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) {
        double p = cfg.edge_base_rate;
        if (cls[u] == cls[v]) p += cfg.static_affinity;
        if (state[t][u] == state[t][v]) p += cfg.dynamic_affinity;
        if (uniform_real(edge_rng) < p) edges.emplace_back(u, v);
      }
    }
    data.graph.snapshots.push_back(Snapshot::from_edges(n, std::move(edges)));
  }

  data.static_labels.kind = LabelTable::Kind::Static;
  data.static_labels.class_count = cfg.static_classes;
  for (int v = 0; v < n; ++v) data.static_labels.records.push_back({v, 0, cls[v]});

  data.dynamic_labels.kind = LabelTable::Kind::PerSnapshot;
  data.dynamic_labels.class_count = cfg.dynamic_states;
  for (int v = 0; v < n; ++v)
    for (int t = 0; t < cfg.T; ++t)
      data.dynamic_labels.records.push_back({v, t, state[t][v]});
  std::sort(data.dynamic_labels.records.begin(), data.dynamic_labels.records.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.node, a.t) < std::tie(b.node, b.t);
            });
  return data;
}

PlantedConfig planted_config_from_file(const std::string& path) {
  KeyValueConfig kv = KeyValueConfig::from_file(path);
  PlantedConfig cfg;
  cfg.node_count = static_cast<int>(kv.get_int("node_count", cfg.node_count));
  cfg.T = static_cast<int>(kv.get_int("T", cfg.T));
  cfg.static_classes = static_cast<int>(kv.get_int("static_classes", cfg.static_classes));
  cfg.dynamic_states = static_cast<int>(kv.get_int("dynamic_states", cfg.dynamic_states));
  cfg.state_transition_prob = kv.get_real("state_transition_prob", cfg.state_transition_prob);
  cfg.edge_base_rate = kv.get_real("edge_base_rate", cfg.edge_base_rate);
  cfg.static_affinity = kv.get_real("static_affinity", cfg.static_affinity);
  cfg.dynamic_affinity = kv.get_real("dynamic_affinity", cfg.dynamic_affinity);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(cfg.seed)));
  return cfg;
}

DynamicGraph perturb_edges(const DynamicGraph& g, double r_percent, std::uint64_t seed) {
  if (r_percent < 0.0 || r_percent > 100.0)
    throw DomainError("perturb_edges: rate must be in [0, 100]");
  DynamicGraph out;
  out.node_count = g.node_count;
  out.snapshots.reserve(g.T());
  for (int t = 0; t < g.T(); ++t) {
    const Snapshot& s = g.snapshots[t];
    const std::size_t quota = static_cast<std::size_t>(
        std::floor(r_percent / 200.0 * static_cast<double>(s.edge_count())));
    if (quota == 0) {
      out.snapshots.push_back(s);
      continue;
    }
    Rng rng = make_rng(seed, 1000 + static_cast<std::uint64_t>(t));

    // Delete `quota` existing edges uniformly (partial Fisher-Yates).
    std::vector<std::pair<int, int>> edges = s.edges;
    const std::size_t n_del = std::min(quota, edges.size());
    for (std::size_t i = 0; i < n_del; ++i) {
      std::size_t j = i + static_cast<std::size_t>(
                              uniform_int(rng, 0, static_cast<int>(edges.size() - 1 - i)));
      std::swap(edges[i], edges[j]);
    }
    std::set<std::pair<int, int>> kept(edges.begin() + n_del, edges.end());

    // Add the same number of absent pairs.
    std::set<std::pair<int, int>> original(s.edges.begin(), s.edges.end());
    std::size_t added = 0;
    const std::size_t max_pairs =
        static_cast<std::size_t>(g.node_count) * (g.node_count - 1) / 2;
    while (added < n_del && kept.size() < max_pairs) {
      int u = uniform_int(rng, 0, g.node_count - 1);
      int v = uniform_int(rng, 0, g.node_count - 1);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      std::pair<int, int> e{u, v};
      if (original.count(e) || kept.count(e)) continue;
      kept.insert(e);
      ++added;
    }
    out.snapshots.push_back(Snapshot::from_edges(
        g.node_count, std::vector<std::pair<int, int>>(kept.begin(), kept.end())));
  }
  return out;
}

}  // namespace dysent
