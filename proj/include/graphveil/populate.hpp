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

#include "graphveil/corpus.hpp"
#include "graphveil/graph.hpp"
#include "graphveil/topology.hpp"

namespace graphveil {

/// Attribute domains and the set of opcodes the assigner may place. Fused
/// opcodes exist only as rewrite results, so they are not assignable.
struct VocabSpec {
  std::vector<Op> assignable;
  std::vector<int> kernels = {1, 3, 5, 7};
  std::vector<int> channels = {3, 8, 16, 32, 64, 128, 256};
  std::vector<int> strides = {1, 2};

  static VocabSpec standard();
};

/// Canonical input shapes used when populating bare topologies: 4-D first,
/// 2-D as the fallback when no 4-D assignment exists.
inline const TensorShape kCanonicalInput4d{1, 3, 32, 32};
inline const TensorShape kCanonicalInput2d{1, 128};

/// The constraint problem bound to one topology: per-node opcode domains
/// derived from in/out-degrees plus the source/sink rules (in-degree-0 nodes
/// must be `input`; out-degree-0 nodes must be `output` when
/// force_sink_output is set).
struct RuleSet {
  VocabSpec vocab;
  std::vector<std::vector<Op>> domains;
  bool force_sink_output = true;
};

/// Throws Error{unsatisfiable} naming the first node whose domain is empty
/// (e.g. in-degree above every opcode's arity).
RuleSet generate_ruleset(const DirectedTopology& topo,
                         const VocabSpec& vocab = VocabSpec::standard(),
                         bool force_sink_output = true);

/// Bigram model over directed corpus edges with Laplace smoothing:
/// P(dst | src) = (count(src,dst) + 1) / (count(src,*) + |vocab|).
struct NGramModel {
  std::array<std::array<uint64_t, kOpCount>, kOpCount> counts{};
  double laplace = 1.0;

  double prob(Op src, Op dst) const;
  double logp(Op src, Op dst) const;
  /// Sum of log P over every edge of a populated graph.
  double sequence_logprob(const OpGraph& g) const;
};

NGramModel fit_ngram(const Corpus& corpus);
void save_ngram(const NGramModel& m, const std::string& path);
NGramModel load_ngram(const std::string& path);

/// One complete operator assignment: value per topology node, its summed
/// edge-bigram log-probability, and the input shape every source received.
struct OpAssignment {
  std::vector<std::pair<Op, Attrs>> values;
  double logprob = 0.0;
  TensorShape source_shape;
};

struct EnumConfig {
  double pct = 25.0;   // top percentile kept, (0, 100]
  int max_solns = 256; // enumeration cap
  uint64_t seed = 0;
};

/// Backtracking enumeration of all arity- and shape-consistent assignments
/// (topological variable order; values in descending bigram probability given
/// assigned predecessors, ties by opcode name then canonical attribute
/// order). Stops at max_solns, then keeps the top pct percentile by logprob,
/// sorted descending. Throws Error{no_solution} when nothing satisfies.
std::vector<OpAssignment> enumerate_assignments(const DirectedTopology& topo,
                                                const RuleSet& rules,
                                                const NGramModel& ngram,
                                                const EnumConfig& cfg);

/// Builds the sentinel graph for one assignment: node ids are topology
/// indices, input ports follow ascending source index, sources become graph
/// inputs with the assignment's shape, sinks become graph outputs.
OpGraph materialize_assignment(const DirectedTopology& topo,
                               const OpAssignment& assignment);

/// Materializes up to k sentinels from distinct top-percentile assignments
/// (seeded uniform choice). Throws Error{no_solution} or
/// Error{insufficient_solutions} with {found, needed}.
std::vector<OpGraph> populate(const DirectedTopology& topo, const RuleSet& rules,
                              const NGramModel& ngram, const EnumConfig& cfg,
                              int k);

/// Applies `delta` random node insertions/removals to a valid base graph and
/// re-populates opcodes on the perturbed nodes and their immediate
/// neighbours; everything else, including the interface, is preserved.
/// Retries up to 20 perturbations before giving up with Error{no_solution}.
OpGraph perturb_popular(const OpGraph& base, int delta, const NGramModel& ngram,
                        const VocabSpec& vocab, uint64_t seed);

} // namespace graphveil
