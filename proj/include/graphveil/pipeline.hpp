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
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "graphveil/density.hpp"
#include "graphveil/partition.hpp"
#include "graphveil/populate.hpp"
#include "graphveil/topology.hpp"

namespace graphveil {

/// k+1 subgraphs for one partition index, exactly one of them real. Which one
/// is knowable only through the owner's manifest; item ids are random 128-bit
/// tokens and the slot order is a seeded shuffle.
struct Bucket {
  int index = 0;
  std::vector<std::pair<std::string, OpGraph>> items;
};

struct ObfuscatedBundle {
  int format_version = 1;
  int n = 0;
  int k = 0;
  std::vector<Bucket> buckets;
};

/// Owner-side secret: which bucket item is real plus everything needed to
/// stitch the optimized real parts back together.
struct Manifest {
  int format_version = 1;
  uint64_t seed = 0;
  int n = 0;
  int k = 0;
  std::map<int, std::string> real_map;
  Binding binding;
};

struct Models {
  TopoModel topo;
  DensityModel density;
  NGramModel ngram;
};

struct ObfuscateConfig {
  int n = 1;
  int k = 1;
  int trials = 64;
  int pool_size = 512;          // sampled topologies shared by all subgraphs
  double pct = 25.0;            // top percentile of assignments
  int max_solns = 64;           // enumeration cap per topology
  std::array<double, kFeatureDim> beta{}; // zeros -> 20% of pool feature stddev
  uint64_t seed = 0;
};

/// Full owner-side obfuscation: balanced partition into n parts, then per
/// part k sentinels — importance-sampled topologies populated with likely
/// operators, topped up by perturbing the real part when the pool runs dry —
/// shuffled into a bucket with the real subgraph. Deterministic in cfg.seed.
std::pair<ObfuscatedBundle, Manifest> obfuscate(const OpGraph& g,
                                                const ObfuscateConfig& cfg,
                                                const Models& models);

/// Extracts the optimized real subgraphs named by the manifest, verifies
/// their interfaces survived optimization, and stitches them into the
/// optimized protected graph. Throws Error{missing_item} or
/// Error{interface_changed}.
OpGraph deobfuscate(const ObfuscatedBundle& optimized, const Manifest& m);

/// (k+1)^n, exactly.
boost::multiprecision::cpp_int search_space_size(int n, int k);

/// Shuffles the real subgraph among the sentinels and assigns random item
/// ids. Returns the bucket and the real item's id.
std::pair<Bucket, std::string> assemble_bucket(int index, const OpGraph& real,
                                               const std::vector<OpGraph>& sentinels,
                                               uint64_t seed);

void save_bundle(const ObfuscatedBundle& b, const std::string& dir);
ObfuscatedBundle load_bundle(const std::string& dir);
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

} // namespace graphveil
