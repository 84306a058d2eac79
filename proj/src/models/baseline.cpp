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

#include "polyframe/models/baseline.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "polyframe/common/error.hpp"

namespace polyframe {

AuthorIndex::AuthorIndex(std::span<const Tweet> tweets) {
  // Slots in sorted author order so the layout does not depend on input order.
  std::set<std::string> authors;
  for (const auto& t : tweets) authors.insert(t.author_id);
  std::size_t next = 1;
  for (const auto& a : authors) slots_.emplace(a, next++);
}

std::size_t AuthorIndex::slot(const std::string& author_id) const {
  auto it = slots_.find(author_id);
  return it == slots_.end() ? 0 : it->second;
}

std::vector<double> featurize_baseline(const Tweet& tweet, const AuthorIndex& authors) {
  std::vector<double> x(1 + authors.slots(), 0.0);
  x[0] = static_cast<double>(tweet.posted_at.year - kYearMin) / static_cast<double>(kYearMax - kYearMin);
  x[1 + authors.slot(tweet.author_id)] = 1.0;
  return x;
}

namespace {

void check_fit_set(std::span<const BaselineExample> fit) {
  if (fit.empty()) throw DataError("baseline fit set is empty");
  const Category first = fit.front().label;
  if (std::all_of(fit.begin(), fit.end(), [&](const BaselineExample& e) { return e.label == first; })) {
    throw DataError("single-class fit set");
  }
}

std::vector<Tweet> tweets_of(std::span<const BaselineExample> data) {
  std::vector<Tweet> out;
  out.reserve(data.size());
  for (const auto& e : data) out.push_back(e.tweet);
  return out;
}

class LogRegModel final : public BaselineModel {
 public:
  LogRegModel(AuthorIndex authors, std::vector<double> weights, std::size_t dim)
      : authors_(std::move(authors)), weights_(std::move(weights)), dim_(dim) {}

  ConfidenceVector predict(const Tweet& tweet) const override { return predict_features(featurize_baseline(tweet, authors_)); }

  ConfidenceVector predict_features(const std::vector<double>& x) const {
    ScoreVector y{};
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const double* w = &weights_[c * (dim_ + 1)];
      double s = w[dim_];  // bias
      for (std::size_t d = 0; d < dim_; ++d) s += w[d] * x[d];
      y[c] = s;
    }
    return softmax(y);
  }

 private:
  AuthorIndex authors_;
  std::vector<double> weights_;  // per class: dim weights then bias
  std::size_t dim_;
};

}  // namespace

std::unique_ptr<BaselineModel> train_logreg(std::span<const BaselineExample> fit, const LogRegParams& params) {
  check_fit_set(fit);
  const auto tweets = tweets_of(fit);
  AuthorIndex authors(tweets);
  std::vector<std::vector<double>> xs;
  xs.reserve(fit.size());
  for (const auto& e : fit) xs.push_back(featurize_baseline(e.tweet, authors));
  const std::size_t dim = xs.front().size();
  const std::size_t stride = dim + 1;

  std::vector<double> w(kNumCategories * stride, 0.0);
  AdamWState<double> state(w.size());
  AdamWHyper h;
  h.learning_rate = params.learning_rate;
  h.weight_decay = 0.0;  // L2 enters through the gradient below
  const double n = static_cast<double>(fit.size());
  std::vector<double> grad(w.size());
  for (std::size_t it = 0; it < params.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    LogRegModel current(authors, w, dim);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto g = cross_entropy_grad(current.predict_features(xs[i]), fit[i].label);
      for (std::size_t c = 0; c < kNumCategories; ++c) {
        double* gc = &grad[c * stride];
        for (std::size_t d = 0; d < dim; ++d) gc[d] += g[c] * xs[i][d] / n;
        gc[dim] += g[c] / n;
      }
    }
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      for (std::size_t d = 0; d < dim; ++d) grad[c * stride + d] += params.l2 * w[c * stride + d];
    }
    adamw_step<double>(w, grad, state, h);
  }
  return std::make_unique<LogRegModel>(std::move(authors), std::move(w), dim);
}

namespace {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double eval(const std::vector<double>& x) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& xs, const std::vector<std::vector<std::size_t>>& sorted,
              const GbTreeParams& p)
      : xs_(xs), sorted_(sorted), p_(p) {}

  Tree build(const std::vector<double>& g, const std::vector<double>& h) {
    g_ = &g;
    h_ = &h;
    Tree t;
    std::vector<char> member(xs_.size(), 1);
    grow(t, member, 0);
    return t;
  }

 private:
  int grow(Tree& t, std::vector<char>& member, std::size_t depth) {
    double gs = 0.0, hs = 0.0;
    for (std::size_t i = 0; i < member.size(); ++i) {
      if (member[i]) gs += (*g_)[i], hs += (*h_)[i];
    }
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({});
    t.nodes[id].value = -gs / (hs + p_.lambda) * p_.eta;
    if (depth >= p_.max_depth || hs < 2.0 * p_.min_child_weight) return id;

    const double parent = gs * gs / (hs + p_.lambda);
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (std::size_t f = 0; f < sorted_.size(); ++f) {
      double gl = 0.0, hl = 0.0;
      double prev = 0.0;
      bool have_prev = false;
      for (std::size_t i : sorted_[f]) {
        if (!member[i]) continue;
        const double v = xs_[i][f];
        if (have_prev && v > prev && hl >= p_.min_child_weight && hs - hl >= p_.min_child_weight) {
          const double gr = gs - gl, hr = hs - hl;
          const double gain = gl * gl / (hl + p_.lambda) + gr * gr / (hr + p_.lambda) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(f);
            best_threshold = 0.5 * (prev + v);
          }
        }
        gl += (*g_)[i];
        hl += (*h_)[i];
        prev = v;
        have_prev = true;
      }
    }
    if (best_feature < 0) return id;

    std::vector<char> left(member.size(), 0), right(member.size(), 0);
    for (std::size_t i = 0; i < member.size(); ++i) {
      if (!member[i]) continue;
      (xs_[i][best_feature] < best_threshold ? left : right)[i] = 1;
    }
    const int l = grow(t, left, depth + 1);
    const int r = grow(t, right, depth + 1);
    t.nodes[id].feature = best_feature;
    t.nodes[id].threshold = best_threshold;
    t.nodes[id].left = l;
    t.nodes[id].right = r;
    return id;
  }

  const std::vector<std::vector<double>>& xs_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  const GbTreeParams& p_;
  const std::vector<double>* g_ = nullptr;
  const std::vector<double>* h_ = nullptr;
};

class GbTreeModel final : public BaselineModel {
 public:
  GbTreeModel(AuthorIndex authors, std::vector<std::array<Tree, kNumCategories>> rounds)
      : authors_(std::move(authors)), rounds_(std::move(rounds)) {}

  ConfidenceVector predict(const Tweet& tweet) const override { return predict_features(featurize_baseline(tweet, authors_)); }

  ConfidenceVector predict_features(const std::vector<double>& x) const {
    ScoreVector y{};
    for (const auto& round : rounds_)
      for (std::size_t c = 0; c < kNumCategories; ++c) y[c] += round[c].eval(x);
    return softmax(y);
  }

 private:
  AuthorIndex authors_;
  std::vector<std::array<Tree, kNumCategories>> rounds_;
};

}  // namespace

std::unique_ptr<BaselineModel> train_gbtree(std::span<const BaselineExample> fit, const GbTreeParams& params) {
  check_fit_set(fit);
  const auto tweets = tweets_of(fit);
  AuthorIndex authors(tweets);
  std::vector<std::vector<double>> xs;
  for (const auto& e : fit) xs.push_back(featurize_baseline(e.tweet, authors));
  const std::size_t n = xs.size();
  const std::size_t dim = xs.front().size();

  std::vector<std::vector<std::size_t>> sorted(dim, std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < dim; ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0);
    std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](std::size_t a, std::size_t b) { return xs[a][f] < xs[b][f]; });
  }

  std::vector<ScoreVector> margin(n, ScoreVector{});
  std::vector<std::array<Tree, kNumCategories>> rounds;
  TreeBuilder builder(xs, sorted, params);
  std::vector<double> g(n), h(n);
  for (std::size_t r = 0; r < params.rounds; ++r) {
    std::vector<ConfidenceVector> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = softmax(margin[i]);
    std::array<Tree, kNumCategories> round;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = probs[i][c];
        g[i] = p - (index_of(fit[i].label) == c ? 1.0 : 0.0);
        h[i] = std::max(p * (1.0 - p), 1e-16);
      }
      round[c] = builder.build(g, h);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < kNumCategories; ++c) margin[i][c] += round[c].eval(xs[i]);
    rounds.push_back(std::move(round));
  }
  return std::make_unique<GbTreeModel>(std::move(authors), std::move(rounds));
}

MetricsReport evaluate_baseline(const BaselineModel& model, std::span<const BaselineExample> data) {
  std::vector<Category> pred, gold;
  for (const auto& e : data) {
    pred.push_back(argmax(model.predict(e.tweet)));
    gold.push_back(e.label);
  }
  return classification_report(pred, gold);
}

BaselineResult train_baseline(BaselineKind kind, std::span<const BaselineExample> fit,
                              std::span<const BaselineExample> validate) {
  check_fit_set(fit);
  if (validate.empty()) throw DataError("baseline validation set is empty");
  BaselineResult best;
  double best_f1 = -1.0;
  auto consider = [&](std::unique_ptr<BaselineModel> m, std::string desc) {
    auto rep = evaluate_baseline(*m, validate);
    spdlog::debug("baseline {}: validation macro F1 {:.4f}", desc, rep.macro_f1);
    if (rep.macro_f1 > best_f1) {
      best_f1 = rep.macro_f1;
      best.model = std::move(m);
      best.validation = rep;
      best.chosen = std::move(desc);
    }
  };
  if (kind == BaselineKind::LogReg) {
    for (double l2 : {1e-4, 1e-3, 1e-2}) {
      LogRegParams p;
      p.l2 = l2;
      consider(train_logreg(fit, p), fmt::format("logreg l2={}", l2));
    }
  } else {
    for (std::size_t depth : {2, 4}) {
      for (std::size_t rounds : {30, 80}) {
        GbTreeParams p;
        p.max_depth = depth;
        p.rounds = rounds;
        consider(train_gbtree(fit, p), fmt::format("gbtree depth={} rounds={}", depth, rounds));
      }
    }
  }
  return best;
}

}  // namespace polyframe
