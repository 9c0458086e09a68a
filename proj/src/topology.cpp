/**
 * Copyright (c) GraphVeil Contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "graphveil/topology.hpp"

#include <algorithm>
#include <fstream>
#include <queue>

#include <json.hpp>

#include "graphveil/errors.hpp"
#include "graphveil/rng.hpp"

namespace graphveil {

using nlohmann::json;

std::vector<int> DirectedTopology::in_degrees() const {
  std::vector<int> d(size_t(n), 0);
  for (auto [u, v] : edges)
    d[size_t(v)]++;
  return d;
}

std::vector<int> DirectedTopology::out_degrees() const {
  std::vector<int> d(size_t(n), 0);
  for (auto [u, v] : edges)
    d[size_t(u)]++;
  return d;
}

bool DirectedTopology::is_dag() const {
  std::vector<int> indeg = in_degrees();
  std::vector<std::vector<int>> succ(size_t(n));
  for (auto [u, v] : edges)
    succ[size_t(u)].push_back(v);
  std::queue<int> q;
  for (int v = 0; v < n; ++v)
    if (indeg[size_t(v)] == 0)
      q.push(v);
  int seen = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    ++seen;
    for (int v : succ[size_t(u)])
      if (--indeg[size_t(v)] == 0)
        q.push(v);
  }
  return seen == n;
}

namespace {

/// BFS order from root with ascending-id neighbour visits. Returns the node
/// sequence (only the root's component).
std::vector<int> bfs_order(const SimpleGraph& g, int root) {
  std::vector<bool> seen(size_t(g.n), false);
  std::vector<int> order;
  std::queue<int> q;
  seen[size_t(root)] = true;
  q.push(root);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    order.push_back(u);
    for (int v : g.adj[size_t(u)]) // adjacency lists are sorted ascending
      if (!seen[size_t(v)]) {
        seen[size_t(v)] = true;
        q.push(v);
      }
  }
  return order;
}

std::vector<int> bfs_depths(const SimpleGraph& g, int root) {
  std::vector<int> dist(size_t(g.n), -1);
  std::queue<int> q;
  dist[size_t(root)] = 0;
  q.push(root);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.adj[size_t(u)])
      if (dist[size_t(v)] < 0) {
        dist[size_t(v)] = dist[size_t(u)] + 1;
        q.push(v);
      }
  }
  return dist;
}

int farthest_node(const SimpleGraph& g, int root) {
  auto dist = bfs_depths(g, root);
  int best = root, best_d = 0;
  for (int v = 0; v < g.n; ++v)
    if (dist[size_t(v)] > best_d) { // ties keep the smaller id
      best_d = dist[size_t(v)];
      best = v;
    }
  return best;
}

} // namespace

uint64_t TopoModel::context_key(int position, int distance, uint32_t prev_bits,
                                int prev_len) const {
  int bucket = std::min(position, pos_cap);
  int keep = std::min(prev_len, ctx_bits);
  uint32_t bits = prev_bits & ((1u << keep) - 1u); // most recent `keep` bits
  return (uint64_t(bucket) << 40) | (uint64_t(distance) << 32) |
         (uint64_t(keep) << 28) | uint64_t(bits);
}

double TopoModel::prob_one(int position, int distance, uint32_t prev_bits,
                           int prev_len) const {
  auto it = row_counts.find(context_key(position, distance, prev_bits, prev_len));
  uint64_t c0 = 0, c1 = 0;
  if (it != row_counts.end()) {
    c0 = it->second[0];
    c1 = it->second[1];
  }
  return (double(c1) + laplace) / (double(c0 + c1) + 2.0 * laplace);
}

TopoModel train_topo_model(const std::vector<OpGraph>& pool, int lookback) {
  if (pool.empty())
    throw Error(Errc::invalid_argument, "empty training pool");
  if (lookback < 0 || lookback > 16)
    throw Error(Errc::invalid_argument, "lookback must be in [0, 16]");

  TopoModel m;
  m.lookback = lookback;
  for (const auto& g : pool) {
    SimpleGraph u = undirected_view(g);
    if (u.n == 0)
      continue;
    m.size_dist[u.n]++;
    auto order = bfs_order(u, 0);
    // BFS from the canonical min-id root; pool graphs are connected, but be
    // tolerant and train on the root component only.
    std::vector<int> pos(size_t(u.n), -1);
    for (size_t i = 0; i < order.size(); ++i)
      pos[size_t(order[i])] = int(i);
    for (size_t i = 1; i < order.size(); ++i) {
      int node = order[i];
      int window = std::min<int>(int(i), lookback);
      uint32_t row = 0;
      for (int w = 1; w <= window; ++w) {
        int predecessor = order[i - size_t(w)];
        bool bit = std::binary_search(u.adj[size_t(node)].begin(),
                                      u.adj[size_t(node)].end(), predecessor);
        uint64_t key = m.context_key(int(i), w, row, w - 1);
        m.row_counts[key][bit ? 1 : 0]++;
        row = (row << 1) | (bit ? 1u : 0u);
      }
    }
  }
  if (m.size_dist.empty())
    throw Error(Errc::invalid_argument, "training pool has no usable graphs");
  return m;
}

namespace {

int draw_size(const TopoModel& m, Rng& rng) {
  uint64_t total = 0;
  for (const auto& [sz, c] : m.size_dist)
    total += c;
  uint64_t pick = rng.next_below(total);
  for (const auto& [sz, c] : m.size_dist) {
    if (pick < c)
      return sz;
    pick -= c;
  }
  return m.size_dist.rbegin()->first;
}

SimpleGraph sample_one(const TopoModel& m, Rng& rng) {
  int n = draw_size(m, rng);
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) {
    int window = std::min(i, m.lookback);
    uint32_t row = 0;
    for (int w = 1; w <= window; ++w) {
      double p1 = m.prob_one(i, w, row, w - 1);
      bool bit = rng.next_double() < p1;
      if (bit)
        edges.emplace_back(i, i - w);
      row = (row << 1) | (bit ? 1u : 0u);
    }
  }
  return SimpleGraph::from_edges(n, edges);
}

bool connected(const SimpleGraph& g) {
  if (g.n == 0)
    return false;
  auto dist = bfs_depths(g, 0);
  for (int v = 0; v < g.n; ++v)
    if (dist[size_t(v)] < 0)
      return false;
  return true;
}

SimpleGraph largest_component(const SimpleGraph& g) {
  std::vector<int> best;
  std::vector<bool> seen(size_t(g.n), false);
  for (int v = 0; v < g.n; ++v) {
    if (seen[size_t(v)])
      continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(v);
    seen[size_t(v)] = true;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      comp.push_back(u);
      for (int w : g.adj[size_t(u)])
        if (!seen[size_t(w)]) {
          seen[size_t(w)] = true;
          q.push(w);
        }
    }
    if (comp.size() > best.size())
      best = std::move(comp);
  }
  std::sort(best.begin(), best.end());
  std::vector<int> relabel(size_t(g.n), -1);
  for (size_t i = 0; i < best.size(); ++i)
    relabel[size_t(best[i])] = int(i);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < g.n; ++u) {
    if (relabel[size_t(u)] < 0)
      continue;
    for (int v : g.adj[size_t(u)])
      if (u < v && relabel[size_t(v)] >= 0)
        edges.emplace_back(relabel[size_t(u)], relabel[size_t(v)]);
  }
  return SimpleGraph::from_edges(int(best.size()), edges);
}

} // namespace

TopologyPool sample_topologies(const TopoModel& model, int count, uint64_t seed) {
  if (count < 1)
    throw Error(Errc::invalid_argument, "count must be >= 1");
  TopologyPool pool;
  pool.seed = seed;
  Rng rng(seed);
  pool.graphs.reserve(size_t(count));
  for (int i = 0; i < count; ++i) {
    SimpleGraph g;
    bool ok = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      g = sample_one(model, rng);
      int64_t edge_count = 0;
      for (const auto& a : g.adj)
        edge_count += int64_t(a.size());
      if (edge_count > 0 && connected(g)) {
        ok = true;
        break;
      }
    }
    if (!ok)
      g = largest_component(g);
    pool.graphs.push_back(std::move(g));
  }
  return pool;
}

DirectedTopology induce_orientation(const SimpleGraph& u) {
  DirectedTopology t;
  t.n = u.n;
  if (u.n == 0)
    return t;
  // Double BFS: farthest node from the min-id node is a diameter endpoint.
  int endpoint = farthest_node(u, 0);
  auto order = bfs_order(u, endpoint);
  std::vector<int> ord(size_t(u.n), -1);
  for (size_t i = 0; i < order.size(); ++i)
    ord[size_t(order[i])] = int(i);
  for (int a = 0; a < u.n; ++a)
    for (int b : u.adj[size_t(a)])
      if (a < b) {
        if (ord[size_t(a)] < ord[size_t(b)])
          t.edges.emplace_back(a, b);
        else
          t.edges.emplace_back(b, a);
      }
  std::sort(t.edges.begin(), t.edges.end());
  return t;
}

FeatureVector compute_features(const DirectedTopology& t) {
  return compute_features(SimpleGraph::from_edges(t.n, t.edges));
}

std::array<double, kFeatureDim>
default_beta(const std::vector<FeatureVector>& pool_features) {
  auto sd = feature_stddev(pool_features);
  std::array<double, kFeatureDim> beta{};
  for (int j = 0; j < kFeatureDim; ++j)
    beta[size_t(j)] = std::max(0.2 * sd[size_t(j)], 1e-3);
  return beta;
}

SampleSimilarResult sample_similar_partial(const FeatureVector& protected_features,
                                           const TopologyPool& pool,
                                           const DensityModel& density,
                                           const SamplingConfig& cfg) {
  if (pool.graphs.empty())
    throw Error(Errc::invalid_argument, "empty topology pool");
  if (cfg.target_count < 1)
    throw Error(Errc::invalid_argument, "target_count must be >= 1");
  for (double b : cfg.beta)
    if (!(b > 0.0))
      throw Error(Errc::invalid_argument, "beta must be positive componentwise");

  Rng rng(cfg.seed);
  SampleSimilarResult res;

  // Place the box so the protected features sit uniformly at random inside it.
  auto centre = protected_features.as_array();
  for (int j = 0; j < kFeatureDim; ++j) {
    double alpha = rng.next_range(0.0, cfg.beta[size_t(j)]);
    res.box_lo[size_t(j)] = centre[size_t(j)] - alpha;
    res.box_hi[size_t(j)] = res.box_lo[size_t(j)] + cfg.beta[size_t(j)];
  }

  struct Candidate {
    DirectedTopology topo;
    double density = 0.0;
    bool in_box = false;
  };
  std::vector<Candidate> cands;
  cands.reserve(pool.graphs.size());
  double min_in_box = 0.0;
  bool any = false;
  for (const auto& g : pool.graphs) {
    Candidate c;
    c.topo = induce_orientation(g);
    FeatureVector f = compute_features(c.topo);
    auto x = f.as_array();
    c.in_box = true;
    for (int j = 0; j < kFeatureDim && c.in_box; ++j)
      c.in_box = x[size_t(j)] >= res.box_lo[size_t(j)] &&
                 x[size_t(j)] <= res.box_hi[size_t(j)];
    c.density = density.evaluate(x);
    if (c.in_box) {
      min_in_box = any ? std::min(min_in_box, c.density) : c.density;
      any = true;
    }
    cands.push_back(std::move(c));
  }

  // Importance acceptance: the rarest in-box member is accepted surely,
  // everything denser proportionally less often, flattening the pool density
  // to uniform over the box.
  for (auto& c : cands) {
    if (int(res.accepted.size()) >= cfg.target_count)
      break;
    if (!c.in_box)
      continue;
    double p_accept = min_in_box / c.density;
    if (rng.next_double() < p_accept)
      res.accepted.push_back(std::move(c.topo));
  }
  res.complete = int(res.accepted.size()) >= cfg.target_count;
  return res;
}

std::vector<DirectedTopology> sample_similar(const FeatureVector& protected_features,
                                             const TopologyPool& pool,
                                             const DensityModel& density,
                                             const SamplingConfig& cfg) {
  SampleSimilarResult res =
      sample_similar_partial(protected_features, pool, density, cfg);
  if (!res.complete)
    throw Error(Errc::insufficient_pool,
                "accepted " + std::to_string(res.accepted.size()) + " of " +
                    std::to_string(cfg.target_count) + " requested topologies",
                int64_t(res.accepted.size()), cfg.target_count);
  return std::move(res.accepted);
}

void save_topo_model(const TopoModel& m, const std::string& path) {
  json doc;
  doc["lookback"] = m.lookback;
  doc["ctx_bits"] = m.ctx_bits;
  doc["pos_cap"] = m.pos_cap;
  doc["laplace"] = m.laplace;
  doc["size_dist"] = json::array();
  for (const auto& [sz, c] : m.size_dist)
    doc["size_dist"].push_back({sz, c});
  doc["rows"] = json::array();
  for (const auto& [key, counts] : m.row_counts)
    doc["rows"].push_back({key, counts[0], counts[1]});
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write " + path);
  out << doc.dump() << "\n";
}

TopoModel load_topo_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("topo model: ") + e.what());
  }
  TopoModel m;
  m.lookback = doc.value("lookback", 8);
  m.ctx_bits = doc.value("ctx_bits", 4);
  m.pos_cap = doc.value("pos_cap", 16);
  m.laplace = doc.value("laplace", 1.0);
  for (const auto& js : doc.value("size_dist", json::array()))
    m.size_dist[js[0].get<int>()] = js[1].get<uint64_t>();
  for (const auto& jr : doc.value("rows", json::array()))
    m.row_counts[jr[0].get<uint64_t>()] = {jr[1].get<uint64_t>(),
                                           jr[2].get<uint64_t>()};
  if (m.size_dist.empty())
    throw Error(Errc::parse_error, "topo model: empty size distribution");
  return m;
}

void save_topology_pool(const TopologyPool& pool, const std::string& path) {
  json doc;
  doc["seed"] = pool.seed;
  doc["graphs"] = json::array();
  for (const auto& g : pool.graphs) {
    json jg;
    jg["n"] = g.n;
    json edges = json::array();
    for (int u = 0; u < g.n; ++u)
      for (int v : g.adj[size_t(u)])
        if (u < v)
          edges.push_back({u, v});
    jg["edges"] = std::move(edges);
    doc["graphs"].push_back(std::move(jg));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write " + path);
  out << doc.dump() << "\n";
}

TopologyPool load_topology_pool(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("topology pool: ") + e.what());
  }
  TopologyPool pool;
  pool.seed = doc.value("seed", 0ull);
  for (const auto& jg : doc.value("graphs", json::array())) {
    int n = jg.value("n", 0);
    std::vector<std::pair<int, int>> edges;
    for (const auto& je : jg.value("edges", json::array()))
      edges.emplace_back(je[0].get<int>(), je[1].get<int>());
    pool.graphs.push_back(SimpleGraph::from_edges(n, edges));
  }
  return pool;
}

} // namespace graphveil
