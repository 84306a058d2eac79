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

#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "polyframe/common/rng.hpp"
#include "polyframe/models/classifier.hpp"

namespace polyframe::testing {

ConfidenceVector ref_softmax(const ScoreVector& y) {
  long double mx = std::max({y[0], y[1], y[2]});
  std::array<long double, 3> e{};
  long double sum = 0;
  for (int i = 0; i < 3; ++i) {
    e[i] = std::exp(static_cast<long double>(y[i]) - mx);
    sum += e[i];
  }
  return {static_cast<double>(e[0] / sum), static_cast<double>(e[1] / sum), static_cast<double>(e[2] / sum)};
}

double ref_cross_entropy(const ScoreVector& y, Category t) {
  // -log softmax_t = log(sum exp(y)) - y_t, computed in extended precision.
  long double mx = std::max({y[0], y[1], y[2]});
  long double sum = 0;
  for (double v : y) sum += std::exp(static_cast<long double>(v) - mx);
  return static_cast<double>(mx + std::log(sum) - static_cast<long double>(y[index_of(t)]));
}

void RefAdamW::step(long double g, const AdamWHyper& h) {
  ++t;
  m = h.beta1 * m + (1 - h.beta1) * g;
  v = h.beta2 * v + (1 - h.beta2) * g * g;
  long double mhat = m / (1 - std::pow(static_cast<long double>(h.beta1), t));
  long double vhat = v / (1 - std::pow(static_cast<long double>(h.beta2), t));
  theta = theta - h.schedule * (h.learning_rate * mhat / (std::sqrt(vhat) + h.epsilon) + h.weight_decay * theta);
}

RefReport ref_report(std::span<const Category> pred, std::span<const Category> gold) {
  RefReport r;
  const std::size_t n = pred.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += pred[i] == gold[i] ? 1 : 0;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  for (auto c : kCategories) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    auto k = index_of(c);
    r.precision[k] = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    r.recall[k] = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    // F1 = 2TP / (2TP + FP + FN), the harmonic mean written without P and R.
    r.f1[k] = 2 * tp + fp + fn == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    r.macro_f1 += r.f1[k] / 3.0;
    r.weighted_f1 += r.f1[k] * static_cast<double>(tp + fn) / static_cast<double>(n);
  }
  return r;
}

double ref_kappa(std::span<const Category> a, std::span<const Category> b) {
  const std::size_t n = a.size();
  double po = 0, pe = 0;
  for (std::size_t i = 0; i < n; ++i) po += a[i] == b[i] ? 1.0 : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) pe += a[i] == b[j] ? 1.0 : 0.0;
  po /= static_cast<double>(n);
  pe /= static_cast<double>(n * n);
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

double ref_weighted_kappa(std::span<const Category> a, std::span<const Category> b, bool quadratic) {
  auto w = [&](Category x, Category y) {
    double d = std::abs(code_of(x) - code_of(y)) / 2.0;
    return quadratic ? d * d : d;
  };
  const std::size_t n = a.size();
  double obs = 0, exp = 0;
  for (std::size_t i = 0; i < n; ++i) obs += w(a[i], b[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) exp += w(a[i], b[j]);
  obs /= static_cast<double>(n);
  exp /= static_cast<double>(n * n);
  if (exp == 0.0) return obs == 0.0 ? 1.0 : 0.0;
  return 1.0 - obs / exp;
}

Category ref_decide(const ConfidenceAnswer& c, double k) {
  if (c.conf3 > k) return Category::Other;
  return c.conf2 > c.conf1 ? Category::Solution : Category::Problem;
}

RefGrid ref_grid(std::span<const ScoredConfidence> scored) {
  RefGrid g;
  double best_acc = -1, best_f1 = -1;
  for (int k = 1; k <= 100; ++k) {
    std::vector<Category> pred, gold;
    for (const auto& s : scored) {
      pred.push_back(ref_decide(s.confs, k));
      gold.push_back(s.gold);
    }
    auto r = ref_report(pred, gold);
    g.accuracy.push_back(r.accuracy);
    g.macro_f1.push_back(r.macro_f1);
    if (r.accuracy > best_acc + 1e-15) {
      best_acc = r.accuracy;
      g.best_k_accuracy = k;
    }
    if (r.macro_f1 > best_f1 + 1e-15) {
      best_f1 = r.macro_f1;
      g.best_k_macro_f1 = k;
    }
  }
  return g;
}

double max_fd_relative_error(const SequenceClassifier<double>& net, std::span<const std::int32_t> ids, Category target,
                             std::span<const std::size_t> indices, double h) {
  std::vector<double> grad(net.parameters().size(), 0.0);
  net.accumulate_gradient(ids, target, 1.0, nullptr, grad, 1.0);
  SequenceClassifier<double> probe = net;
  std::vector<double> scratch(grad.size(), 0.0);
  double worst = 0.0;
  for (std::size_t i : indices) {
    const double orig = probe.parameters()[i];
    probe.parameters()[i] = orig + h;
    double up = probe.accumulate_gradient(ids, target, 1.0, nullptr, scratch, 0.0);
    probe.parameters()[i] = orig - h;
    double down = probe.accumulate_gradient(ids, target, 1.0, nullptr, scratch, 0.0);
    probe.parameters()[i] = orig;
    double numeric = (up - down) / (2.0 * h);
    // Gradients below 1e-4 are compared absolutely against that floor.
    double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-4});
    worst = std::max(worst, std::abs(numeric - grad[i]) / denom);
  }
  return worst;
}

std::vector<Category> random_labels(std::uint64_t seed, std::size_t n, std::array<double, 3> weights) {
  Rng rng(seed);
  double total = weights[0] + weights[1] + weights[2];
  std::vector<Category> out(n);
  for (auto& c : out) {
    double u = rng.uniform01() * total;
    c = u < weights[0] ? Category::Problem : (u < weights[0] + weights[1] ? Category::Solution : Category::Other);
  }
  return out;
}

LabeledSet synthetic_label_set(std::uint64_t seed, std::size_t n, double agree, std::array<double, 3> weights) {
  Rng rng(seed);
  auto labels = random_labels(seed ^ 0x9e3779b97f4a7c15ULL, n, weights);
  LabeledSet out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledExample e;
    e.tweet.id = "t" + std::to_string(i);
    e.tweet.text = "tweet number " + std::to_string(i);
    e.tweet.author_id = "a" + std::to_string(rng.uniform_index(20));
    e.tweet.posted_at = {2008 + static_cast<int>(rng.uniform_index(16)), 1 + static_cast<int>(rng.uniform_index(12)),
                         1 + static_cast<int>(rng.uniform_index(28))};
    e.label_ar = labels[i];
    e.label_mb = rng.bernoulli(agree) ? labels[i] : category_at((index_of(labels[i]) + 1 + rng.uniform_index(2)) % 3);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<TrainItem> keyword_items(std::uint64_t seed, std::size_t n) {
  static const std::array<std::vector<std::string>, 3> keys{
      std::vector<std::string>{"crisis", "broken", "failing", "shortage"},
      std::vector<std::string>{"bill", "plan", "fix", "funding"},
      std::vector<std::string>{"honored", "congrats", "visit", "thanks"}};
  static const std::vector<std::string> filler{"the", "our", "today", "we", "state", "people", "this", "week"};
  Rng rng(seed);
  std::vector<TrainItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto c = i % 3;
    std::string text;
    std::size_t words = 3 + rng.uniform_index(4);
    std::size_t key_pos = rng.uniform_index(words);
    for (std::size_t w = 0; w < words; ++w) {
      if (!text.empty()) text += ' ';
      text += w == key_pos ? keys[c][rng.uniform_index(keys[c].size())] : filler[rng.uniform_index(filler.size())];
    }
    out.push_back({"k" + std::to_string(i), text, category_at(c)});
  }
  return out;
}

EncoderConfig tiny_encoder_config(std::size_t vocab_size) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.hidden_size = 32;
  c.num_layers = 1;
  c.num_heads = 2;
  c.intermediate_size = 64;
  c.max_positions = 40;
  return c;
}

std::filesystem::path write_tiny_checkpoint(const std::filesystem::path& dir, const std::vector<std::string>& texts,
                                            std::uint64_t seed) {
  RandomEncoderOptions o;
  o.encoder = tiny_encoder_config(0);
  o.vocab_limit = 500;
  o.seed = seed;
  write_random_checkpoint(dir, texts, o);
  return dir;
}

TempDir::TempDir() {
  static int counter = 0;
  Rng rng(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()) + counter++);
  path_ = std::filesystem::temp_directory_path() / ("polyframe_test_" + std::to_string(rng.next()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

std::filesystem::path golden_dir() { return POLYFRAME_GOLDEN_DIR; }

}  // namespace polyframe::testing
