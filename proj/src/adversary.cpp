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

#include "graphveil/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "graphveil/errors.hpp"
#include "graphveil/populate.hpp"
#include "graphveil/rng.hpp"

namespace graphveil {

using nlohmann::json;

const std::pair<Op, Op> kAdvBigramList[kAdvBigrams] = {
    {Op::conv2d, Op::relu},   {Op::conv2d, Op::batchnorm},
    {Op::batchnorm, Op::relu}, {Op::relu, Op::conv2d},
    {Op::add, Op::relu},      {Op::matmul, Op::relu},
    {Op::relu, Op::matmul},   {Op::sigmoid, Op::mul},
};

AdvFeatures adv_features(const OpGraph& g) {
  AdvFeatures f{};
  FeatureVector topo = compute_features(g);
  f[0] = topo.avg_degree;
  f[1] = topo.clustering;
  f[2] = double(topo.diameter);
  f[3] = double(topo.node_count);

  double node_count = std::max<double>(1.0, double(g.nodes.size()));
  for (const auto& n : g.nodes)
    f[size_t(kFeatureDim + int(n.op))] += 1.0 / node_count;

  double edge_count = std::max<double>(1.0, double(g.edges.size()));
  auto idx = g.node_index();
  for (const auto& e : g.edges) {
    Op src = g.nodes[idx.at(e.src)].op;
    Op dst = g.nodes[idx.at(e.dst)].op;
    for (int b = 0; b < kAdvBigrams; ++b)
      if (kAdvBigramList[b].first == src && kAdvBigramList[b].second == dst)
        f[size_t(kFeatureDim + kOpCount + b)] += 1.0 / edge_count;
  }
  return f;
}

std::string adv_feature_name(int index) {
  if (index < kFeatureDim)
    return kFeatureNames[index];
  if (index < kFeatureDim + kOpCount)
    return std::string("op_") + op_name(Op(index - kFeatureDim));
  const auto& [a, b] = kAdvBigramList[index - kFeatureDim - kOpCount];
  return std::string("bigram_") + op_name(a) + "_" + op_name(b);
}

ClassifierModel train_classifier(const std::vector<OpGraph>& real,
                                 const std::vector<OpGraph>& fake,
                                 const std::string& held_out_name, int epochs,
                                 double lr, uint64_t seed) {
  if (real.empty() || fake.empty())
    throw Error(Errc::invalid_argument, "both training sets must be nonempty");

  const int n = int(real.size() + fake.size());
  Eigen::MatrixXd X(n, kAdvFeatureDim);
  Eigen::VectorXd y(n);
  int row = 0;
  for (const auto& g : real) {
    auto f = adv_features(g);
    for (int j = 0; j < kAdvFeatureDim; ++j)
      X(row, j) = f[size_t(j)];
    y(row++) = 0.0;
  }
  for (const auto& g : fake) {
    auto f = adv_features(g);
    for (int j = 0; j < kAdvFeatureDim; ++j)
      X(row, j) = f[size_t(j)];
    y(row++) = 1.0;
  }

  ClassifierModel m;
  m.held_out = held_out_name;
  m.epochs = epochs;
  m.learning_rate = lr;
  m.seed = seed;

  Eigen::VectorXd mean = X.colwise().mean();
  Eigen::VectorXd sd(kAdvFeatureDim);
  for (int j = 0; j < kAdvFeatureDim; ++j) {
    double acc = (X.col(j).array() - mean(j)).square().sum() / double(n);
    sd(j) = std::max(std::sqrt(acc), 1e-9);
  }
  for (int j = 0; j < kAdvFeatureDim; ++j)
    X.col(j) = (X.col(j).array() - mean(j)) / sd(j);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(kAdvFeatureDim);
  double b = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Eigen::VectorXd z = X * w;
    z.array() += b;
    Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    Eigen::VectorXd err = p - y;
    Eigen::VectorXd grad_w = X.transpose() * err / double(n);
    double grad_b = err.mean();
    w -= lr * grad_w;
    b -= lr * grad_b;
  }

  for (int j = 0; j < kAdvFeatureDim; ++j) {
    m.weights[size_t(j)] = w(j);
    m.mean[size_t(j)] = mean(j);
    m.stddev[size_t(j)] = sd(j);
  }
  m.bias = b;
  return m;
}

double predict(const ClassifierModel& model, const OpGraph& g) {
  auto f = adv_features(g);
  double z = model.bias;
  for (int j = 0; j < kAdvFeatureDim; ++j)
    z += model.weights[size_t(j)] *
         ((f[size_t(j)] - model.mean[size_t(j)]) / model.stddev[size_t(j)]);
  return 1.0 / (1.0 + std::exp(-z));
}

BigFloat candidates_count(double beta, int k, int n) {
  BigFloat base = 1 + (1.0 - beta) * k;
  BigFloat acc = 1;
  for (int i = 0; i < n; ++i)
    acc *= base;
  return acc;
}

std::string AdversaryReport::candidates_string() const {
  using boost::multiprecision::cpp_int;
  BigFloat rounded = candidates + BigFloat(0.5);
  cpp_int as_int(rounded);
  return as_int.str();
}

AdversaryReport min_threshold(const ClassifierModel& model,
                              const std::vector<OpGraph>& real_eval,
                              const std::vector<OpGraph>& fake_eval, int k, int n) {
  if (real_eval.empty() || fake_eval.empty())
    throw Error(Errc::invalid_argument, "evaluation sets must be nonempty");

  double max_real = 0.0;
  for (const auto& g : real_eval)
    max_real = std::max(max_real, predict(model, g));
  double gamma = std::min(1.0, max_real + 1e-9);

  int eliminated = 0;
  for (const auto& g : fake_eval)
    if (predict(model, g) >= gamma)
      ++eliminated;
  double beta = double(eliminated) / double(fake_eval.size());

  int kept_real = 0;
  for (const auto& g : real_eval)
    if (predict(model, g) < gamma)
      ++kept_real;

  AdversaryReport r;
  r.protected_model = model.held_out;
  r.n = n;
  r.k = k;
  r.sensitivity = double(kept_real) / double(real_eval.size());
  r.specificity = beta;
  r.min_gamma = gamma;
  r.candidates = candidates_count(beta, k, n);
  return r;
}

namespace {

double ks_p_value(double d, double n1, double n2) {
  double ne = n1 * n2 / (n1 + n2);
  double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = 2.0 * ((j % 2) ? 1.0 : -1.0) *
                  std::exp(-2.0 * double(j) * double(j) * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12)
      break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

} // namespace

KsRow ks_two_sample(std::vector<double> a, std::vector<double> b,
                    const std::string& name) {
  KsRow row;
  row.feature = name;
  if (a.empty() || b.empty())
    return row;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x)
      ++i;
    while (j < b.size() && b[j] <= x)
      ++j;
    d = std::max(d, std::fabs(double(i) / double(a.size()) -
                              double(j) / double(b.size())));
  }
  row.statistic = d;
  row.p_value = ks_p_value(d, double(a.size()), double(b.size()));
  row.flagged = row.p_value < 0.01;
  return row;
}

std::vector<KsRow> compare_distributions(const std::vector<OpGraph>& real,
                                         const std::vector<OpGraph>& fake) {
  if (real.size() < 20 || fake.size() < 20)
    throw Error(Errc::invalid_argument, "need at least 20 graphs per side");
  std::vector<std::vector<double>> rv(kFeatureDim), fv(kFeatureDim);
  for (const auto& g : real) {
    auto x = compute_features(g).as_array();
    for (int j = 0; j < kFeatureDim; ++j)
      rv[size_t(j)].push_back(x[size_t(j)]);
  }
  for (const auto& g : fake) {
    auto x = compute_features(g).as_array();
    for (int j = 0; j < kFeatureDim; ++j)
      fv[size_t(j)].push_back(x[size_t(j)]);
  }
  std::vector<KsRow> rows;
  for (int j = 0; j < kFeatureDim; ++j)
    rows.push_back(ks_two_sample(rv[size_t(j)], fv[size_t(j)], kFeatureNames[j]));
  return rows;
}

std::vector<KsRow> compare_adversary_features(const std::vector<OpGraph>& real,
                                              const std::vector<OpGraph>& fake) {
  std::vector<std::vector<double>> rv(kAdvFeatureDim), fv(kAdvFeatureDim);
  for (const auto& g : real) {
    auto x = adv_features(g);
    for (int j = 0; j < kAdvFeatureDim; ++j)
      rv[size_t(j)].push_back(x[size_t(j)]);
  }
  for (const auto& g : fake) {
    auto x = adv_features(g);
    for (int j = 0; j < kAdvFeatureDim; ++j)
      fv[size_t(j)].push_back(x[size_t(j)]);
  }
  std::vector<KsRow> rows;
  for (int j = 0; j < kAdvFeatureDim; ++j)
    rows.push_back(ks_two_sample(rv[size_t(j)], fv[size_t(j)], adv_feature_name(j)));
  return rows;
}

std::vector<OpGraph> random_opcode_baseline(const std::vector<DirectedTopology>& topologies,
                                            uint64_t seed) {
  if (topologies.empty())
    throw Error(Errc::invalid_argument, "no topologies given");
  VocabSpec vocab = VocabSpec::standard();
  std::vector<OpGraph> out;
  for (size_t t = 0; t < topologies.size(); ++t) {
    Rng rng(derive_seed(seed, t));
    RuleSet rules;
    try {
      rules = generate_ruleset(topologies[t], vocab);
    } catch (const Error&) {
      continue; // arity-impossible topology; the baseline just skips it
    }
    const DirectedTopology& topo = topologies[t];
    OpAssignment a;
    a.source_shape = kCanonicalInput4d;
    for (int v = 0; v < topo.n; ++v) {
      const auto& dom = rules.domains[size_t(v)];
      Op op = dom[rng.next_below(dom.size())];
      Attrs attrs;
      if (op_has_conv_attrs(op)) {
        int kernel = vocab.kernels[rng.next_below(vocab.kernels.size())];
        int cin = vocab.channels[rng.next_below(vocab.channels.size())];
        int cout = op == Op::conv2d
                       ? vocab.channels[rng.next_below(vocab.channels.size())]
                       : cin;
        int stride = vocab.strides[rng.next_below(vocab.strides.size())];
        attrs = ConvAttrs{kernel, cin, cout, stride};
      } else if (op_has_axis_attrs(op)) {
        attrs = AxisAttrs{1};
      }
      a.values.emplace_back(op, attrs);
    }
    out.push_back(materialize_assignment(topo, a));
  }
  return out;
}

void save_report(const AdversaryReport& r, const std::string& path) {
  json doc;
  doc["protected_model"] = r.protected_model;
  doc["n"] = r.n;
  doc["k"] = r.k;
  doc["sensitivity"] = r.sensitivity;
  doc["specificity"] = r.specificity;
  doc["min_gamma"] = r.min_gamma;
  doc["candidates"] = r.candidates_string();
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write " + path);
  out << doc.dump(2) << "\n";
}

} // namespace graphveil
