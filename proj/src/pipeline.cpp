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

#include "graphveil/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "graphveil/errors.hpp"
#include "graphveil/graph_io.hpp"
#include "graphveil/rng.hpp"
#include "graphveil/shape_inference.hpp"

namespace graphveil {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string random_item_id(Rng& rng) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(rng.next_u64()),
                static_cast<unsigned long long>(rng.next_u64()));
  return buf;
}

} // namespace

std::pair<Bucket, std::string> assemble_bucket(int index, const OpGraph& real,
                                               const std::vector<OpGraph>& sentinels,
                                               uint64_t seed) {
  Rng rng(seed);
  Bucket bucket;
  bucket.index = index;
  bucket.items.emplace_back(random_item_id(rng), real);
  for (const auto& s : sentinels)
    bucket.items.emplace_back(random_item_id(rng), s);
  std::string real_id = bucket.items.front().first;
  rng.shuffle(bucket.items);
  return {std::move(bucket), std::move(real_id)};
}

std::pair<ObfuscatedBundle, Manifest> obfuscate(const OpGraph& g,
                                                const ObfuscateConfig& cfg,
                                                const Models& models) {
  if (cfg.k < 1)
    throw Error(Errc::invalid_argument, "k must be >= 1");
  if (cfg.n < 1 || cfg.n > int(g.nodes.size()))
    throw Error(Errc::invalid_argument, "n must be in [1, |V|]");
  if (!validate(g).empty())
    throw Error(Errc::invalid_argument, "protected graph is invalid");
  if (!propagate_shapes(g).ok)
    throw Error(Errc::invalid_argument, "protected graph does not shape-propagate");

  Partition part = partition_balanced(g, {cfg.n, cfg.trials, derive_seed(cfg.seed, 0xA)});
  ExtractResult extracted = extract_subgraphs(g, part);

  TopologyPool pool =
      sample_topologies(models.topo, cfg.pool_size, derive_seed(cfg.seed, 0xB));

  std::array<double, kFeatureDim> beta = cfg.beta;
  bool auto_beta = true;
  for (double b : beta)
    if (b > 0.0)
      auto_beta = false;
  if (auto_beta) {
    std::vector<FeatureVector> pool_features;
    pool_features.reserve(models.density.points.size());
    for (const auto& p : models.density.points) {
      FeatureVector f;
      f.avg_degree = p[0];
      f.clustering = p[1];
      f.diameter = int(std::lround(p[2]));
      f.node_count = int(std::lround(p[3]));
      pool_features.push_back(f);
    }
    beta = default_beta(pool_features);
  }

  VocabSpec vocab = VocabSpec::standard();
  ObfuscatedBundle bundle;
  bundle.n = cfg.n;
  bundle.k = cfg.k;
  Manifest manifest;
  manifest.seed = cfg.seed;
  manifest.n = cfg.n;
  manifest.k = cfg.k;
  manifest.binding = extracted.binding;

  for (int i = 0; i < cfg.n; ++i) {
    uint64_t part_seed = derive_seed(cfg.seed, 0x100 + uint64_t(i));
    const OpGraph& real = extracted.parts[size_t(i)];

    SamplingConfig scfg;
    scfg.beta = beta;
    scfg.pool_size = cfg.pool_size;
    scfg.target_count = cfg.k;
    scfg.seed = derive_seed(part_seed, 1);
    SampleSimilarResult similar =
        sample_similar_partial(compute_features(real), pool, models.density, scfg);

    std::vector<OpGraph> sentinels;
    for (size_t t = 0; t < similar.accepted.size() && int(sentinels.size()) < cfg.k;
         ++t) {
      try {
        RuleSet rules = generate_ruleset(similar.accepted[t], vocab);
        EnumConfig ecfg{cfg.pct, cfg.max_solns, derive_seed(part_seed, 0x200 + t)};
        auto graphs = populate(similar.accepted[t], rules, models.ngram, ecfg, 1);
        sentinels.push_back(std::move(graphs.front()));
      } catch (const Error& e) {
        if (e.kind() == Errc::unsatisfiable || e.kind() == Errc::no_solution ||
            e.kind() == Errc::insufficient_solutions)
          continue; // this topology cannot host operators; use the next one
        throw Error(e.kind(),
                    std::string(e.what()) + " (subgraph " + std::to_string(i) + ")");
      }
    }

    // Pool exhausted or unsatisfiable topologies: fall back to minor
    // modifications of the real part.
    for (uint64_t attempt = 0; int(sentinels.size()) < cfg.k && attempt < 60;
         ++attempt) {
      int delta = 1 + int(attempt % 3);
      int max_delta = std::max(1, int(real.nodes.size()) / 4);
      delta = std::min(delta, max_delta);
      try {
        sentinels.push_back(perturb_popular(real, delta, models.ngram, vocab,
                                            derive_seed(part_seed, 0x300 + attempt)));
      } catch (const Error& e) {
        if (e.kind() == Errc::no_solution)
          continue;
        throw Error(e.kind(),
                    std::string(e.what()) + " (subgraph " + std::to_string(i) + ")");
      }
    }
    if (int(sentinels.size()) < cfg.k)
      throw Error(Errc::insufficient_pool,
                  "could not produce " + std::to_string(cfg.k) +
                      " sentinels for subgraph " + std::to_string(i),
                  int64_t(sentinels.size()), cfg.k);

    auto [bucket, real_id] =
        assemble_bucket(i, real, sentinels, derive_seed(part_seed, 0xF));
    bundle.buckets.push_back(std::move(bucket));
    manifest.real_map[i] = real_id;
  }
  return {std::move(bundle), std::move(manifest)};
}

OpGraph deobfuscate(const ObfuscatedBundle& optimized, const Manifest& m) {
  if (int(optimized.buckets.size()) < m.n)
    throw Error(Errc::missing_item, "bundle has fewer buckets than the manifest");

  // Expected interface of every part, reconstructed from the binding.
  std::vector<int> want_inputs(size_t(m.n), 0), want_outputs(size_t(m.n), 0);
  for (const auto& [pi, slot] : m.binding.input_map)
    want_inputs[size_t(pi)] = std::max(want_inputs[size_t(pi)], slot + 1);
  for (const auto& [pi, slot] : m.binding.output_map)
    want_outputs[size_t(pi)] = std::max(want_outputs[size_t(pi)], slot + 1);
  std::vector<std::map<int, TensorShape>> cross_shapes(size_t(m.n));
  for (const auto& r : m.binding.cross) {
    want_inputs[size_t(r.consumer_part)] =
        std::max(want_inputs[size_t(r.consumer_part)], r.consumer_slot + 1);
    want_outputs[size_t(r.producer_part)] =
        std::max(want_outputs[size_t(r.producer_part)], r.producer_slot + 1);
    cross_shapes[size_t(r.consumer_part)][r.consumer_slot] = r.shape;
  }

  std::vector<OpGraph> parts;
  parts.reserve(size_t(m.n));
  for (int i = 0; i < m.n; ++i) {
    auto real_it = m.real_map.find(i);
    if (real_it == m.real_map.end())
      throw Error(Errc::missing_item, "manifest lacks a real item for subgraph " +
                                          std::to_string(i));
    const Bucket* bucket = nullptr;
    for (const auto& b : optimized.buckets)
      if (b.index == i)
        bucket = &b;
    if (!bucket)
      throw Error(Errc::missing_item, "bucket " + std::to_string(i) + " missing");
    const OpGraph* item = nullptr;
    for (const auto& [id, graph] : bucket->items)
      if (id == real_it->second)
        item = &graph;
    if (!item)
      throw Error(Errc::missing_item,
                  "item " + real_it->second + " missing from bucket " +
                      std::to_string(i));

    if (int(item->inputs.size()) != want_inputs[size_t(i)] ||
        int(item->outputs.size()) != want_outputs[size_t(i)])
      throw Error(Errc::interface_changed,
                  "optimizer changed the interface of subgraph " +
                      std::to_string(i),
                  i);
    for (const auto& [slot, shape] : cross_shapes[size_t(i)])
      if (item->inputs[size_t(slot)].second != shape)
        throw Error(Errc::interface_changed,
                    "optimizer changed an input shape of subgraph " +
                        std::to_string(i),
                    i);
    parts.push_back(*item);
  }

  OpGraph g = stitch_parts(parts, m.binding);
  if (!validate(g).empty())
    throw Error(Errc::interface_changed, "reassembled graph is invalid");
  return g;
}

boost::multiprecision::cpp_int search_space_size(int n, int k) {
  if (n < 0 || k < 0)
    throw Error(Errc::invalid_argument, "n and k must be non-negative");
  boost::multiprecision::cpp_int base = k + 1;
  boost::multiprecision::cpp_int acc = 1;
  for (int i = 0; i < n; ++i)
    acc *= base;
  return acc;
}

namespace {

json shape_json(const TensorShape& s) {
  json arr = json::array();
  for (int64_t d : s.dims)
    if (d == TensorShape::kDynamic)
      arr.push_back("dynamic");
    else
      arr.push_back(d);
  return arr;
}

TensorShape shape_unjson(const json& arr) {
  TensorShape s;
  for (const auto& d : arr) {
    if (d.is_string())
      s.dims.push_back(TensorShape::kDynamic);
    else
      s.dims.push_back(d.get<int64_t>());
  }
  return s;
}

} // namespace

void save_bundle(const ObfuscatedBundle& b, const std::string& dir) {
  fs::create_directories(dir);
  json index;
  index["format_version"] = b.format_version;
  index["n"] = b.n;
  index["k"] = b.k;
  index["buckets"] = json::array();
  for (const auto& bucket : b.buckets) {
    fs::path bdir = fs::path(dir) / ("bucket_" + std::to_string(bucket.index));
    fs::create_directories(bdir);
    json ids = json::array();
    for (const auto& [id, graph] : bucket.items) {
      save_graph(graph, (bdir / (id + ".json")).string());
      ids.push_back(id);
    }
    index["buckets"].push_back({{"index", bucket.index}, {"items", ids}});
  }
  std::ofstream out(fs::path(dir) / "index.json", std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write bundle index in " + dir);
  out << index.dump(2) << "\n";
}

ObfuscatedBundle load_bundle(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "index.json", std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "missing bundle index in " + dir);
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("bundle index: ") + e.what());
  }
  ObfuscatedBundle b;
  b.format_version = index.value("format_version", 1);
  b.n = index.value("n", 0);
  b.k = index.value("k", 0);
  for (const auto& jb : index.value("buckets", json::array())) {
    Bucket bucket;
    bucket.index = jb.value("index", 0);
    fs::path bdir = fs::path(dir) / ("bucket_" + std::to_string(bucket.index));
    for (const auto& jid : jb.value("items", json::array())) {
      std::string id = jid.get<std::string>();
      bucket.items.emplace_back(id, load_graph((bdir / (id + ".json")).string()));
    }
    b.buckets.push_back(std::move(bucket));
  }
  return b;
}

void save_manifest(const Manifest& m, const std::string& path) {
  json doc;
  doc["format_version"] = m.format_version;
  doc["seed"] = m.seed;
  doc["n"] = m.n;
  doc["k"] = m.k;
  doc["real_map"] = json::object();
  for (const auto& [i, id] : m.real_map)
    doc["real_map"][std::to_string(i)] = id;

  json binding;
  binding["cross"] = json::array();
  for (const auto& r : m.binding.cross)
    binding["cross"].push_back({{"pp", r.producer_part},
                                {"ps", r.producer_slot},
                                {"cp", r.consumer_part},
                                {"cs", r.consumer_slot},
                                {"shape", shape_json(r.shape)}});
  binding["local_to_orig"] = m.binding.local_to_orig;
  binding["input_map"] = json::array();
  for (const auto& [part, slot] : m.binding.input_map)
    binding["input_map"].push_back({part, slot});
  binding["output_map"] = json::array();
  for (const auto& [part, slot] : m.binding.output_map)
    binding["output_map"].push_back({part, slot});
  doc["binding"] = std::move(binding);

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write " + path);
  out << doc.dump(2) << "\n";
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("manifest: ") + e.what());
  }
  Manifest m;
  m.format_version = doc.value("format_version", 1);
  m.seed = doc.value("seed", 0ull);
  m.n = doc.value("n", 0);
  m.k = doc.value("k", 0);
  for (auto it = doc["real_map"].begin(); it != doc["real_map"].end(); ++it)
    m.real_map[std::stoi(it.key())] = it.value().get<std::string>();

  const auto& jb = doc["binding"];
  m.binding.n = m.n;
  for (const auto& jr : jb.value("cross", json::array())) {
    CrossRecord r;
    r.producer_part = jr.value("pp", 0);
    r.producer_slot = jr.value("ps", 0);
    r.consumer_part = jr.value("cp", 0);
    r.consumer_slot = jr.value("cs", 0);
    r.shape = shape_unjson(jr.value("shape", json::array()));
    m.binding.cross.push_back(std::move(r));
  }
  m.binding.local_to_orig =
      jb.value("local_to_orig", std::vector<std::vector<int64_t>>{});
  for (const auto& jp : jb.value("input_map", json::array()))
    m.binding.input_map.emplace_back(jp[0].get<int>(), jp[1].get<int>());
  for (const auto& jp : jb.value("output_map", json::array()))
    m.binding.output_map.emplace_back(jp[0].get<int>(), jp[1].get<int>());
  return m;
}

} // namespace graphveil
