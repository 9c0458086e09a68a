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

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graphveil/density.hpp"
#include "graphveil/features.hpp"

namespace graphveil {

/// Bare directed topology: nodes 0..n-1 and directed edges, no opcodes yet.
struct DirectedTopology {
  int n = 0;
  std::vector<std::pair<int, int>> edges;

  std::vector<int> in_degrees() const;
  std::vector<int> out_degrees() const;
  bool is_dag() const;
};

/// Order-M autoregressive count model over BFS adjacency rows: for each node
/// in BFS order, the connection bits toward its M predecessors are modelled
/// by counts keyed on (BFS-position bucket, lookback distance, the last few
/// bits already emitted in the row). Counts are Laplace-smoothed when
/// sampling. size_dist is the empirical node-count histogram of the training
/// pool.
struct TopoModel {
  int lookback = 8;
  int ctx_bits = 4;  // row bits of context kept per prediction
  int pos_cap = 16;  // BFS positions bucketed at this cap
  double laplace = 1.0;
  std::map<uint64_t, std::array<uint64_t, 2>> row_counts;
  std::map<int, uint64_t> size_dist;

  double prob_one(int position, int distance, uint32_t prev_bits, int prev_len) const;
  uint64_t context_key(int position, int distance, uint32_t prev_bits,
                       int prev_len) const;
};

struct TopologyPool {
  std::vector<SimpleGraph> graphs;
  uint64_t seed = 0;
};

/// Trains the count model on the undirected views of the pool subgraphs,
/// BFS-ordered from the minimum-id node with ascending-id neighbour order.
TopoModel train_topo_model(const std::vector<OpGraph>& pool, int lookback = 8);

/// Draws `count` connected simple graphs: node count from size_dist, then
/// autoregressive adjacency rows. Disconnected or edgeless draws are redrawn
/// up to 100 times, after which the largest component is kept.
TopologyPool sample_topologies(const TopoModel& model, int count, uint64_t seed);

/// Directs an undirected connected graph into a DAG: double-BFS finds a
/// diameter endpoint (ties to the smaller node id), a BFS order `ord` from it
/// is recorded (neighbours visited in ascending id), and every edge points
/// from lower to higher ord.
DirectedTopology induce_orientation(const SimpleGraph& u);

FeatureVector compute_features(const DirectedTopology& t);

struct SamplingConfig {
  std::array<double, kFeatureDim> beta{};
  int pool_size = 0;     // informational; the pool is passed explicitly
  int target_count = 1;  // k'
  uint64_t seed = 0;
};

struct SampleSimilarResult {
  std::vector<DirectedTopology> accepted;
  bool complete = false;
  std::array<double, kFeatureDim> box_lo{};
  std::array<double, kFeatureDim> box_hi{};
};

/// Importance sampler of Alg-1 shape: positions a box of widths beta
/// uniformly at random around the protected subgraph's features, then accepts
/// each oriented pool topology whose features x land in the box with
/// probability c/p(x), where p is the fitted density and c the smallest
/// in-box density, making accepted features approximately uniform over the
/// box. Returns up to cfg.target_count topologies.
SampleSimilarResult sample_similar_partial(const FeatureVector& protected_features,
                                           const TopologyPool& pool,
                                           const DensityModel& density,
                                           const SamplingConfig& cfg);

/// Strict variant: throws Error{insufficient_pool} with {accepted, needed}
/// when the pool cannot fill cfg.target_count.
std::vector<DirectedTopology> sample_similar(const FeatureVector& protected_features,
                                             const TopologyPool& pool,
                                             const DensityModel& density,
                                             const SamplingConfig& cfg);

/// Default box widths: 20% of the pool's per-feature standard deviation.
std::array<double, kFeatureDim>
default_beta(const std::vector<FeatureVector>& pool_features);

void save_topo_model(const TopoModel& m, const std::string& path);
TopoModel load_topo_model(const std::string& path);

void save_topology_pool(const TopologyPool& pool, const std::string& path);
TopologyPool load_topology_pool(const std::string& path);

} // namespace graphveil
