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
#include <string>
#include <vector>

#include "graphveil/graph.hpp"

namespace graphveil {

enum class Family {
  chain_cnn,
  resnet_like,
  inception_like,
  se_like,
  transformer_like,
};

constexpr int kFamilyCount = 5;
const char* family_name(Family f);
std::optional<Family> family_from_name(const std::string& name);

struct CorpusSpec {
  std::vector<Family> families;
  int models_per_family = 1;
  int depth_min = 3;
  int depth_max = 6;
  uint64_t seed = 0;
};

struct CorpusModel {
  std::string name;
  std::string family;
  OpGraph graph;
};

struct Corpus {
  std::vector<CorpusModel> models;
  /// "synthetic:<seed>" for generated corpora, "external" for loaded ones.
  std::string provenance;
};

/// Emits models_per_family architectures per family, depths cycling through
/// [depth_min, depth_max], deterministically in spec.seed. Every emitted
/// graph validates and shape-propagates.
Corpus generate_corpus(const CorpusSpec& spec);

/// One file per model plus a corpus.json index.
void save_corpus(const Corpus& c, const std::string& dir);
Corpus load_corpus(const std::string& dir);

/// A connected induced subgraph of a corpus model, closed over its boundary
/// (incoming cross edges become `input` nodes; see extract_subgraphs).
struct PoolEntry {
  OpGraph graph;
  std::string source;              // model name
  std::vector<int64_t> orig_nodes; // ids the part covers in the source model
};

/// Partitions every corpus model with n chosen so the mean part size lands in
/// [size_min, size_max] and returns all parts. Throws Error{empty_corpus} on
/// an empty corpus.
std::vector<PoolEntry> extract_subgraph_pool(const Corpus& c, int size_min,
                                             int size_max, uint64_t seed = 0);

} // namespace graphveil
