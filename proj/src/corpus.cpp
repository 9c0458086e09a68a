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

#include "graphveil/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "graphveil/errors.hpp"
#include "graphveil/graph_io.hpp"
#include "graphveil/partition.hpp"
#include "graphveil/rng.hpp"
#include "graphveil/shape_inference.hpp"

namespace graphveil {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFamilyNames[kFamilyCount] = {
    "chain_cnn", "resnet_like", "inception_like", "se_like", "transformer_like"};

/// Incremental graph builder with sequential node ids.
class Builder {
public:
  int64_t add(Op op, Attrs attrs, std::vector<std::pair<int64_t, int>> srcs) {
    int64_t id = next_++;
    g_.nodes.push_back({id, op, std::move(attrs)});
    int port = 0;
    for (auto [src, sp] : srcs)
      g_.edges.push_back({src, sp, id, port++});
    return id;
  }

  int64_t add_input(const TensorShape& shape) {
    int64_t id = add(Op::input, {}, {});
    g_.inputs.emplace_back(id, shape);
    return id;
  }

  void mark_output(int64_t id) { g_.outputs.emplace_back(id, 0); }

  OpGraph take() { return std::move(g_); }

private:
  OpGraph g_;
  int64_t next_ = 0;
};

int pick_channels(Rng& rng) {
  constexpr int palette[] = {8, 16, 32};
  return palette[rng.next_below(3)];
}

/// conv -> relu tail shared by the CNN families: gap -> matmul(weight) -> output.
void classifier_tail(Builder& b, int64_t features, int64_t channels) {
  int64_t w = b.add_input(TensorShape{10, channels});
  int64_t logits = b.add(Op::matmul, {}, {{features, 0}, {w, 0}});
  int64_t out = b.add(Op::output, {}, {{logits, 0}});
  b.mark_output(out);
}

OpGraph make_chain_cnn(int depth, Rng& rng) {
  Builder b;
  int64_t spatial = 4 + 2 * depth; // each k3/s1 conv trims 2
  int64_t x = b.add_input(TensorShape{1, 3, spatial, spatial});
  int cin = 3;
  for (int i = 0; i < depth; ++i) {
    int cout = pick_channels(rng);
    x = b.add(Op::conv2d, ConvAttrs{3, cin, cout, 1}, {{x, 0}});
    x = b.add(Op::relu, {}, {{x, 0}});
    cin = cout;
  }
  int64_t gap = b.add(Op::globalavgpool, {}, {{x, 0}});
  classifier_tail(b, gap, cin);
  return b.take();
}

OpGraph make_resnet_like(int depth, Rng& rng) {
  Builder b;
  int c = pick_channels(rng);
  int64_t x = b.add_input(TensorShape{1, 3, 10, 10});
  x = b.add(Op::conv2d, ConvAttrs{3, 3, c, 1}, {{x, 0}});
  x = b.add(Op::batchnorm, {}, {{x, 0}});
  x = b.add(Op::relu, {}, {{x, 0}});
  for (int i = 0; i < depth; ++i) {
    // 1x1 convs keep spatial dims so the skip add lines up.
    int64_t h = b.add(Op::conv2d, ConvAttrs{1, c, c, 1}, {{x, 0}});
    h = b.add(Op::batchnorm, {}, {{h, 0}});
    h = b.add(Op::relu, {}, {{h, 0}});
    h = b.add(Op::conv2d, ConvAttrs{1, c, c, 1}, {{h, 0}});
    h = b.add(Op::batchnorm, {}, {{h, 0}});
    x = b.add(Op::add, {}, {{x, 0}, {h, 0}});
    x = b.add(Op::relu, {}, {{x, 0}});
  }
  int64_t gap = b.add(Op::globalavgpool, {}, {{x, 0}});
  classifier_tail(b, gap, c);
  return b.take();
}

OpGraph make_inception_like(int depth, Rng& rng) {
  Builder b;
  int c = pick_channels(rng);
  int64_t spatial = 6 + 4 * depth; // stem trims 2, each block trims 4
  int64_t x = b.add_input(TensorShape{1, 3, spatial, spatial});
  x = b.add(Op::conv2d, ConvAttrs{3, 3, c, 1}, {{x, 0}});
  x = b.add(Op::relu, {}, {{x, 0}});
  for (int i = 0; i < depth; ++i) {
    int branch = c / 4;
    // All branches trim spatial dims by 4 so the concat lines up.
    int64_t a = b.add(Op::conv2d, ConvAttrs{5, c, branch, 1}, {{x, 0}});
    a = b.add(Op::relu, {}, {{a, 0}});

    int64_t d1 = b.add(Op::conv2d, ConvAttrs{3, c, branch, 1}, {{x, 0}});
    d1 = b.add(Op::relu, {}, {{d1, 0}});
    int64_t d2 = b.add(Op::conv2d, ConvAttrs{3, branch, branch, 1}, {{d1, 0}});
    d2 = b.add(Op::relu, {}, {{d2, 0}});

    int64_t e1 = b.add(Op::conv2d, ConvAttrs{1, c, branch, 1}, {{x, 0}});
    e1 = b.add(Op::relu, {}, {{e1, 0}});
    int64_t e2 = b.add(Op::conv2d, ConvAttrs{5, branch, branch, 1}, {{e1, 0}});
    e2 = b.add(Op::relu, {}, {{e2, 0}});

    int64_t f1 = b.add(Op::maxpool2d, ConvAttrs{3, c, c, 1}, {{x, 0}});
    int64_t f2 = b.add(Op::conv2d, ConvAttrs{3, c, branch, 1}, {{f1, 0}});
    f2 = b.add(Op::relu, {}, {{f2, 0}});

    x = b.add(Op::concat, AxisAttrs{1},
              {{a, 0}, {d2, 0}, {e2, 0}, {f2, 0}});
  }
  int64_t gap = b.add(Op::globalavgpool, {}, {{x, 0}});
  classifier_tail(b, gap, (c / 4) * 4);
  return b.take();
}

OpGraph make_se_like(int depth, Rng& rng) {
  Builder b;
  int c = pick_channels(rng);
  int64_t x = b.add_input(TensorShape{1, 3, 10, 10});
  x = b.add(Op::conv2d, ConvAttrs{3, 3, c, 1}, {{x, 0}});
  x = b.add(Op::batchnorm, {}, {{x, 0}});
  x = b.add(Op::relu, {}, {{x, 0}});
  for (int i = 0; i < depth; ++i) {
    int64_t h = b.add(Op::conv2d, ConvAttrs{1, c, c, 1}, {{x, 0}});
    h = b.add(Op::batchnorm, {}, {{h, 0}});
    h = b.add(Op::relu, {}, {{h, 0}});
    h = b.add(Op::conv2d, ConvAttrs{1, c, c, 1}, {{h, 0}});
    h = b.add(Op::batchnorm, {}, {{h, 0}});
    int64_t sum = b.add(Op::add, {}, {{x, 0}, {h, 0}});
    // swish: sum * sigmoid(sum)
    int64_t sig = b.add(Op::sigmoid, {}, {{sum, 0}});
    x = b.add(Op::mul, {}, {{sum, 0}, {sig, 0}});
  }
  // Squeeze-excitation head on the pooled features.
  int64_t gap = b.add(Op::globalavgpool, {}, {{x, 0}});
  int r = std::max(2, c / 4);
  int64_t w1 = b.add_input(TensorShape{r, c});
  int64_t s = b.add(Op::matmul, {}, {{gap, 0}, {w1, 0}});
  s = b.add(Op::relu, {}, {{s, 0}});
  int64_t w2 = b.add_input(TensorShape{c, r});
  s = b.add(Op::matmul, {}, {{s, 0}, {w2, 0}});
  s = b.add(Op::sigmoid, {}, {{s, 0}});
  int64_t scaled = b.add(Op::mul, {}, {{gap, 0}, {s, 0}});
  classifier_tail(b, scaled, c);
  return b.take();
}

OpGraph make_transformer_like(int depth, Rng& rng) {
  Builder b;
  int embed = rng.next_below(2) ? 128 : 64;
  int hidden = 2 * embed;
  int64_t x = b.add_input(TensorShape{1, embed});
  for (int i = 0; i < depth; ++i) {
    int64_t w1 = b.add_input(TensorShape{hidden, embed});
    int64_t h = b.add(Op::matmul, {}, {{x, 0}, {w1, 0}});
    h = b.add(Op::relu, {}, {{h, 0}});
    int64_t w2 = b.add_input(TensorShape{embed, hidden});
    h = b.add(Op::matmul, {}, {{h, 0}, {w2, 0}});
    x = b.add(Op::add, {}, {{x, 0}, {h, 0}});
    x = b.add(Op::batchnorm, {}, {{x, 0}});
  }
  int64_t w = b.add_input(TensorShape{10, embed});
  int64_t logits = b.add(Op::matmul, {}, {{x, 0}, {w, 0}});
  int64_t softm = b.add(Op::softmax, AxisAttrs{1}, {{logits, 0}});
  int64_t out = b.add(Op::output, {}, {{softm, 0}});
  b.mark_output(out);
  return b.take();
}

OpGraph make_family(Family f, int depth, Rng& rng) {
  switch (f) {
  case Family::chain_cnn: return make_chain_cnn(depth, rng);
  case Family::resnet_like: return make_resnet_like(depth, rng);
  case Family::inception_like: return make_inception_like(depth, rng);
  case Family::se_like: return make_se_like(depth, rng);
  case Family::transformer_like: return make_transformer_like(depth, rng);
  }
  throw Error(Errc::invalid_argument, "unknown family");
}

} // namespace

const char* family_name(Family f) { return kFamilyNames[size_t(f)]; }

std::optional<Family> family_from_name(const std::string& name) {
  for (int i = 0; i < kFamilyCount; ++i)
    if (name == kFamilyNames[i])
      return Family(i);
  return std::nullopt;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  if (spec.families.empty() || spec.models_per_family < 1 ||
      spec.depth_min < 1 || spec.depth_min > spec.depth_max)
    throw Error(Errc::invalid_argument, "malformed corpus spec");

  Corpus c;
  c.provenance = "synthetic:" + std::to_string(spec.seed);
  for (Family f : spec.families) {
    for (int m = 0; m < spec.models_per_family; ++m) {
      Rng rng(derive_seed(spec.seed, uint64_t(f) * 1000 + uint64_t(m)));
      int span = spec.depth_max - spec.depth_min + 1;
      int depth = spec.depth_min + m % span;
      CorpusModel model;
      model.family = family_name(f);
      model.name = model.family + std::string("_") + std::to_string(m);
      model.graph = make_family(f, depth, rng);
      c.models.push_back(std::move(model));
    }
  }
  return c;
}

void save_corpus(const Corpus& c, const std::string& dir) {
  fs::create_directories(dir);
  json index;
  index["provenance"] = c.provenance;
  index["models"] = json::array();
  for (const auto& m : c.models) {
    std::string file = m.name + ".json";
    save_graph(m.graph, (fs::path(dir) / file).string());
    index["models"].push_back({{"name", m.name}, {"family", m.family}, {"file", file}});
  }
  std::ofstream out(fs::path(dir) / "corpus.json", std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write corpus index in " + dir);
  out << index.dump(2) << "\n";
}

Corpus load_corpus(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "corpus.json", std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "missing corpus.json in " + dir);
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("corpus.json: ") + e.what());
  }
  Corpus c;
  c.provenance = index.value("provenance", "external");
  for (const auto& jm : index.value("models", json::array())) {
    CorpusModel m;
    m.name = jm.value("name", "");
    m.family = jm.value("family", "");
    m.graph = load_graph((fs::path(dir) / jm.value("file", "")).string());
    if (!validate(m.graph).empty() || !propagate_shapes(m.graph).ok)
      throw Error(Errc::parse_error, "corpus model " + m.name + " is invalid");
    c.models.push_back(std::move(m));
  }
  return c;
}

std::vector<PoolEntry> extract_subgraph_pool(const Corpus& c, int size_min,
                                             int size_max, uint64_t seed) {
  if (c.models.empty())
    throw Error(Errc::empty_corpus, "no models to partition");
  if (size_min < 2 || size_max > 64 || size_min > size_max)
    throw Error(Errc::invalid_argument, "size range must lie within (2, 64)");

  std::vector<PoolEntry> pool;
  double target = (size_min + size_max) / 2.0;
  for (size_t mi = 0; mi < c.models.size(); ++mi) {
    const auto& m = c.models[mi];
    int v = int(m.graph.nodes.size());
    int n = std::clamp(int(std::lround(v / target)), 1, v);
    PartitionConfig cfg{n, 32, derive_seed(seed, mi)};
    Partition p = partition_balanced(m.graph, cfg);
    ExtractResult ex = extract_subgraphs(m.graph, p);
    for (int i = 0; i < p.n; ++i) {
      PoolEntry entry;
      entry.graph = std::move(ex.parts[size_t(i)]);
      entry.source = m.name;
      entry.orig_nodes = ex.binding.local_to_orig[size_t(i)];
      pool.push_back(std::move(entry));
    }
  }
  return pool;
}

} // namespace graphveil
