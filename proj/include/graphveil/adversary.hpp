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
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "graphveil/features.hpp"
#include "graphveil/topology.hpp"

namespace graphveil {

using BigFloat = boost::multiprecision::cpp_bin_float_50;

/// Engineered graph features for the real-vs-sentinel classifier: the four
/// topology statistics, the normalized 20-bin opcode histogram, and the
/// frequencies of eight fixed common opcode bigrams.
constexpr int kAdvBigrams = 8;
constexpr int kAdvFeatureDim = kFeatureDim + kOpCount + kAdvBigrams;

extern const std::pair<Op, Op> kAdvBigramList[kAdvBigrams];

using AdvFeatures = std::array<double, kAdvFeatureDim>;

AdvFeatures adv_features(const OpGraph& g);
std::string adv_feature_name(int index);

/// Logistic model over standardized AdvFeatures; outputs the confidence
/// y in [0,1] that a graph is a sentinel.
struct ClassifierModel {
  std::array<double, kAdvFeatureDim> weights{};
  double bias = 0.0;
  std::array<double, kAdvFeatureDim> mean{};
  std::array<double, kAdvFeatureDim> stddev{};
  // training metadata
  std::string held_out;
  int epochs = 0;
  double learning_rate = 0.0;
  uint64_t seed = 0;
};

/// Full-batch gradient descent on the logistic loss, features standardized by
/// the training set. Deterministic (zero init). Labels: sentinel = 1.
ClassifierModel train_classifier(const std::vector<OpGraph>& real,
                                 const std::vector<OpGraph>& fake,
                                 const std::string& held_out_name,
                                 int epochs = 500, double lr = 0.1,
                                 uint64_t seed = 0);

double predict(const ClassifierModel& model, const OpGraph& g);

/// Sensitivity/specificity at the minimal threshold with alpha = 1, and the
/// residual search space [1 + (1-beta)k]^n.
struct AdversaryReport {
  std::string protected_model;
  int n = 0;
  int k = 0;
  double sensitivity = 1.0;
  double specificity = 0.0;
  double min_gamma = 1.0;
  BigFloat candidates = 0;

  std::string candidates_string() const; // rounded to integer
};

/// gamma = max real confidence + 1e-9 (clamped to 1), beta = share of fakes
/// at or above gamma, candidates computed in high precision.
AdversaryReport min_threshold(const ClassifierModel& model,
                              const std::vector<OpGraph>& real_eval,
                              const std::vector<OpGraph>& fake_eval, int k, int n);

/// The same arithmetic without a classifier, for reporting and regression
/// against the published operating points.
BigFloat candidates_count(double beta, int k, int n);

struct KsRow {
  std::string feature;
  double statistic = 0.0;
  double p_value = 1.0;
  bool flagged = false; // p < 0.01
};

/// Two-sample Kolmogorov-Smirnov per topology feature; features with
/// p < 0.01 are flagged as distinguishable.
std::vector<KsRow> compare_distributions(const std::vector<OpGraph>& real,
                                         const std::vector<OpGraph>& fake);

/// Same comparison over the full adversary feature set (topology + opcode
/// histogram + bigram frequencies).
std::vector<KsRow> compare_adversary_features(const std::vector<OpGraph>& real,
                                              const std::vector<OpGraph>& fake);

/// Two-sample KS test on raw samples.
KsRow ks_two_sample(std::vector<double> a, std::vector<double> b,
                    const std::string& name);

/// Weak baseline: uniformly random opcodes subject only to the arity rules,
/// no shape checking and no likelihood ranking.
std::vector<OpGraph> random_opcode_baseline(const std::vector<DirectedTopology>& topologies,
                                            uint64_t seed);

void save_report(const AdversaryReport& r, const std::string& path);

} // namespace graphveil
