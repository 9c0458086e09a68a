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

#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "graphveil/graph.hpp"

namespace graphveil {

/// Assignment of nodes to n parts plus the cross-partition edge records
/// needed for reassembly. Parts are connected in the undirected view by
/// construction (contraction only merges adjacent supernodes).
struct Partition {
  int n = 0;
  std::map<int64_t, int> assignment;                   // node id -> part
  std::vector<std::tuple<Edge, int, int>> cross_edges; // (edge, src part, dst part)
  std::vector<int> part_sizes;
};

struct PartitionConfig {
  int n = 1;
  int trials = 64;
  uint64_t seed = 0;
};

/// One run of randomized edge contraction: repeatedly pick a uniformly random
/// remaining edge (parallel edges keep their multiplicity) and merge its
/// endpoint supernodes until exactly n supernodes remain.
/// Requires an undirected-connected graph with n <= |V|; throws
/// Error{disconnected} otherwise.
Partition contract_once(const OpGraph& g, int n, uint64_t seed);

/// Runs contract_once cfg.trials times with seeds cfg.seed+0..trials-1 and
/// keeps the partition whose part sizes have the smallest population standard
/// deviation; ties go to the lower trial index.
Partition partition_balanced(const OpGraph& g, const PartitionConfig& cfg);

/// Population standard deviation of part sizes, the balance objective.
double part_size_stddev(const std::vector<int>& sizes);

/// Where one cross-partition tensor flows: producer part/output slot feeds
/// consumer part/input slot. Slots index the extracted subgraphs' interface
/// lists.
struct CrossRecord {
  int producer_part = 0;
  int producer_slot = 0;
  int consumer_part = 0;
  int consumer_slot = 0;
  TensorShape shape;
};

/// Everything needed to stitch optimized parts back into the whole graph:
/// the cross-edge wiring, each part's local-id -> original-id table, and
/// where the original interface lives among the parts.
struct Binding {
  int n = 0;
  std::vector<CrossRecord> cross;
  std::vector<std::vector<int64_t>> local_to_orig;
  std::vector<std::pair<int, int>> input_map;  // original input -> (part, slot)
  std::vector<std::pair<int, int>> output_map; // original output -> (part, slot)
};

struct ExtractResult {
  std::vector<OpGraph> parts;
  Binding binding;
};

/// Materializes each part as a standalone OpGraph. Incoming cross edges
/// become fresh `input` nodes carrying the shape the tensor has in g;
/// sources of outgoing cross edges are appended to the part's outputs.
/// Part-local node ids are canonical: part nodes in ascending original id,
/// then injected inputs.
ExtractResult extract_subgraphs(const OpGraph& g, const Partition& p);

/// Inverse of extract_subgraphs: splices the parts' boundary inputs onto the
/// producing (node, port) pairs and restores original node ids where known.
/// Parts may have been rewritten in the meantime as long as their interfaces
/// are intact.
OpGraph stitch_parts(const std::vector<OpGraph>& parts, const Binding& binding);

} // namespace graphveil
