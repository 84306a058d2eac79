// Copyright 2026 The Polyframe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "polyframe/metrics/metrics.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "polyframe/common/error.hpp"

namespace polyframe {

using nlohmann::json;

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (std::size_t v : row) n += v;
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < kNumCategories; ++i) t += counts[i][i];
  return t;
}

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw DataError(fmt::format("label sequences differ in length ({} vs {})", a, b));
  if (a == 0) throw DataError("cannot evaluate an empty label sequence");
}

double safe_div(double num, double den, bool& zero) {
  if (den == 0.0) {
    zero = true;
    return 0.0;
  }
  return num / den;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const Category> pred, std::span<const Category> gold) {
  check_pair(pred.size(), gold.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.size(); ++i) ++cm.counts[index_of(gold[i])][index_of(pred[i])];
  return cm;
}

MetricsReport report_from_confusion(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.confusion = cm;
  r.n = cm.total();
  if (r.n == 0) throw DataError("cannot evaluate an empty confusion matrix");
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.n);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    std::size_t tp = cm.counts[c][c], row = 0, col = 0;
    for (std::size_t k = 0; k < kNumCategories; ++k) {
      row += cm.counts[c][k];
      col += cm.counts[k][c];
    }
    auto& m = r.per_class[c];
    m.support = row;
    m.precision = safe_div(static_cast<double>(tp), static_cast<double>(col), m.zero_division);
    m.recall = safe_div(static_cast<double>(tp), static_cast<double>(row), m.zero_division);
    m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall, m.zero_division);
    if (row == 0 && col == 0) r.has_absent_class = true;
    r.macro_f1 += m.f1 / static_cast<double>(kNumCategories);
    r.weighted_f1 += m.f1 * static_cast<double>(row) / static_cast<double>(r.n);
  }
  return r;
}

MetricsReport classification_report(std::span<const Category> pred, std::span<const Category> gold) {
  return report_from_confusion(confusion_matrix(pred, gold));
}

double percent_agreement(std::span<const Category> a, std::span<const Category> b) {
  check_pair(a.size(), b.size());
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

KappaResult cohen_kappa(std::span<const Category> a, std::span<const Category> b) {
  check_pair(a.size(), b.size());
  const double n = static_cast<double>(a.size());
  std::array<double, kNumCategories> ma{}, mb{};
  double po = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[index_of(a[i])] += 1.0;
    mb[index_of(b[i])] += 1.0;
    po += a[i] == b[i];
  }
  po /= n;
  double pe = 0.0;
  for (std::size_t c = 0; c < kNumCategories; ++c) pe += (ma[c] / n) * (mb[c] / n);
  if (pe >= 1.0) return {po >= 1.0 ? 1.0 : 0.0, true};
  return {(po - pe) / (1.0 - pe), false};
}

KappaResult weighted_kappa(std::span<const Category> a, std::span<const Category> b, KappaWeights weights) {
  check_pair(a.size(), b.size());
  constexpr std::size_t K = kNumCategories;
  const double n = static_cast<double>(a.size());
  std::array<std::array<double, K>, K> observed{};
  std::array<double, K> ma{}, mb{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    observed[index_of(a[i])][index_of(b[i])] += 1.0 / n;
    ma[index_of(a[i])] += 1.0 / n;
    mb[index_of(b[i])] += 1.0 / n;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      const double d = std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(K - 1);
      const double w = weights == KappaWeights::Linear ? d : d * d;
      num += w * observed[i][j];
      den += w * ma[i] * mb[j];
    }
  }
  if (den <= 0.0) return {num <= 0.0 ? 1.0 : 0.0, true};
  return {1.0 - num / den, false};
}

AgreementReport agreement_report(std::span<const Category> a, std::span<const Category> b, KappaWeights weights) {
  AgreementReport r;
  r.n = a.size();
  r.weights = weights;
  r.percent_agreement = percent_agreement(a, b);
  const auto k = cohen_kappa(a, b);
  const auto kw = weighted_kappa(a, b, weights);
  r.kappa = k.value;
  r.weighted_kappa = kw.value;
  r.degenerate = k.degenerate || kw.degenerate;
  const auto rep = classification_report(b, a);
  r.macro_f1 = rep.macro_f1;
  r.weighted_f1 = rep.weighted_f1;
  return r;
}

json to_json(const MetricsReport& r) {
  json per_class = json::object();
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& m = r.per_class[c];
    per_class[std::string(category_name(category_at(c)))] = {{"precision", m.precision},
                                                             {"recall", m.recall},
                                                             {"f1", m.f1},
                                                             {"support", m.support},
                                                             {"zero_division", m.zero_division}};
  }
  json cm = json::array();
  for (const auto& row : r.confusion.counts) cm.push_back(row);
  return {{"n", r.n},
          {"accuracy", r.accuracy},
          {"macro_f1", r.macro_f1},
          {"weighted_f1", r.weighted_f1},
          {"per_class", per_class},
          {"confusion", cm},
          {"has_absent_class", r.has_absent_class}};
}

json to_json(const AgreementReport& r) {
  return {{"n", r.n},
          {"percent_agreement", r.percent_agreement},
          {"kappa", r.kappa},
          {"weighted_kappa", r.weighted_kappa},
          {"weights", r.weights == KappaWeights::Linear ? "linear" : "quadratic"},
          {"degenerate", r.degenerate},
          {"macro_f1", r.macro_f1},
          {"weighted_f1", r.weighted_f1}};
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "gold\\pred,problem,solution,other\n";
  for (std::size_t r = 0; r < kNumCategories; ++r) {
    out << category_name(category_at(r));
    for (std::size_t c = 0; c < kNumCategories; ++c) out << ',' << cm.counts[r][c];
    out << '\n';
  }
}

}  // namespace polyframe
