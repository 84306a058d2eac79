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

#include <gtest/gtest.h>

#include <sstream>

#include "polyframe/common/rng.hpp"
#include "polyframe/metrics/metrics.hpp"
#include "support.hpp"

using namespace polyframe;
using namespace polyframe::testing;

namespace {

using C = Category;

}  // namespace

TEST(Metrics, WorkedExample) {
  std::vector<C> gold{C::Problem, C::Problem, C::Solution, C::Other};
  std::vector<C> pred{C::Problem, C::Solution, C::Solution, C::Other};
  auto r = classification_report(pred, gold);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_NEAR(r.macro_f1, 7.0 / 9.0, 1e-12);
  EXPECT_NEAR(r.per_class[0].f1, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.per_class[1].precision, 0.5, 1e-12);
  EXPECT_NEAR(cohen_kappa(pred, gold).value, 0.6363636363636364, 1e-12);
}

TEST(Metrics, AgreesWithBruteForceOnRandomLabelings) {
  Rng seeds(11);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + seeds.uniform_index(60);
    std::array<double, 3> w{seeds.uniform01() + 0.05, seeds.uniform01() * (trial % 5 == 0 ? 0 : 1), seeds.uniform01()};
    auto gold = random_labels(seeds.next(), n, w);
    auto pred = random_labels(seeds.next(), n, {1, 1, 1});
    auto r = classification_report(pred, gold);
    auto ref = ref_report(pred, gold);
    ASSERT_NEAR(r.accuracy, ref.accuracy, 1e-12);
    ASSERT_NEAR(r.macro_f1, ref.macro_f1, 1e-12);
    ASSERT_NEAR(r.weighted_f1, ref.weighted_f1, 1e-12);
    for (std::size_t k = 0; k < 3; ++k) {
      ASSERT_NEAR(r.per_class[k].precision, ref.precision[k], 1e-12);
      ASSERT_NEAR(r.per_class[k].recall, ref.recall[k], 1e-12);
      ASSERT_NEAR(r.per_class[k].f1, ref.f1[k], 1e-12);
    }
    ASSERT_EQ(r.confusion.total(), n);
    ASSERT_NEAR(cohen_kappa(pred, gold).value, ref_kappa(pred, gold), 1e-12);
    ASSERT_NEAR(weighted_kappa(pred, gold, KappaWeights::Linear).value, ref_weighted_kappa(pred, gold, false), 1e-12);
    ASSERT_NEAR(weighted_kappa(pred, gold, KappaWeights::Quadratic).value, ref_weighted_kappa(pred, gold, true),
                1e-12);
  }
}

TEST(Metrics, BoundsAndSymmetry) {
  Rng seeds(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 2 + seeds.uniform_index(40);
    auto a = random_labels(seeds.next(), n);
    auto b = random_labels(seeds.next(), n);
    auto r = classification_report(a, b);
    for (double v : {r.accuracy, r.macro_f1, r.weighted_f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NEAR(cohen_kappa(a, b).value, cohen_kappa(b, a).value, 1e-12);
    EXPECT_LE(cohen_kappa(a, b).value, 1.0 + 1e-12);
    EXPECT_DOUBLE_EQ(percent_agreement(a, b), r.accuracy);
  }
}

TEST(Metrics, PerfectAgreementIsOne) {
  auto a = random_labels(5, 50);
  EXPECT_DOUBLE_EQ(cohen_kappa(a, a).value, 1.0);
  EXPECT_DOUBLE_EQ(classification_report(a, a).macro_f1, 1.0);
}

TEST(Metrics, AbsentClassCountsAsZeroWithFlag) {
  std::vector<C> gold{C::Problem, C::Problem, C::Other};
  std::vector<C> pred{C::Problem, C::Problem, C::Other};
  auto r = classification_report(pred, gold);
  EXPECT_TRUE(r.has_absent_class);
  EXPECT_TRUE(r.per_class[1].zero_division);
  EXPECT_NEAR(r.macro_f1, 2.0 / 3.0, 1e-12);
}

TEST(Metrics, DegenerateKappa) {
  std::vector<C> a(10, C::Other);
  auto k = cohen_kappa(a, a);
  EXPECT_TRUE(k.degenerate);
  EXPECT_DOUBLE_EQ(k.value, 1.0);
}

TEST(Metrics, EmptyAndMismatchedInputsThrow) {
  std::vector<C> a{C::Problem}, b;
  EXPECT_THROW(classification_report(a, b), DataError);
  EXPECT_THROW(classification_report(b, b), DataError);
  EXPECT_THROW(cohen_kappa(b, b), DataError);
}

TEST(Metrics, ReportFromConfusionMatchesDirect) {
  auto a = random_labels(1, 80), b = random_labels(2, 80);
  auto r1 = classification_report(a, b);
  auto r2 = report_from_confusion(r1.confusion);
  EXPECT_DOUBLE_EQ(r1.macro_f1, r2.macro_f1);
  EXPECT_DOUBLE_EQ(r1.accuracy, r2.accuracy);
}

TEST(Metrics, ConfusionCsvHasGoldRows) {
  std::vector<C> gold{C::Problem, C::Solution};
  std::vector<C> pred{C::Solution, C::Solution};
  std::ostringstream ss;
  write_confusion_csv(ss, confusion_matrix(pred, gold));
  auto s = ss.str();
  EXPECT_NE(s.find("gold"), std::string::npos);
  EXPECT_EQ(confusion_matrix(pred, gold).at(C::Problem, C::Solution), 1u);
}

TEST(Metrics, AgreementReportJson) {
  auto a = random_labels(3, 40), b = random_labels(4, 40);
  auto r = agreement_report(a, b);
  auto j = to_json(r);
  EXPECT_TRUE(j.contains("kappa"));
  EXPECT_NEAR(r.percent_agreement, percent_agreement(a, b), 1e-15);
}
