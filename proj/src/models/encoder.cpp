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

#include "polyframe/models/encoder.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "polyframe/common/error.hpp"
#include "polyframe/common/rng.hpp"

namespace polyframe {

std::string_view to_string(EncoderArch arch) { return arch == EncoderArch::Bert ? "bert" : "roberta"; }

EncoderArch encoder_arch_from_string(std::string_view s) {
  if (s == "bert") return EncoderArch::Bert;
  if (s == "roberta") return EncoderArch::Roberta;
  throw ConfigError(fmt::format("unknown encoder architecture '{}'", s));
}

void EncoderConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("encoder vocab_size must be positive");
  if (hidden_size == 0 || num_layers == 0 || num_heads == 0 || intermediate_size == 0) {
    throw ConfigError("encoder sizes must be positive");
  }
  if (hidden_size % num_heads != 0) {
    throw ConfigError(fmt::format("hidden_size {} is not divisible by num_heads {}", hidden_size, num_heads));
  }
  if (type_vocab_size == 0) throw ConfigError("encoder type_vocab_size must be positive");
  if (max_positions <= position_offset + 1) throw ConfigError("encoder max_positions too small for position_offset");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
  for (double p : {hidden_dropout, attention_dropout}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("encoder dropout must be in [0, 1)");
  }
}

std::size_t EncoderConfig::parameter_count() const { return ParameterLayout(*this).total(); }

ParameterLayout::ParameterLayout(const EncoderConfig& cfg) {
  const std::size_t h = cfg.hidden_size;
  add("embeddings.word_embeddings.weight", {cfg.vocab_size, h});
  add("embeddings.position_embeddings.weight", {cfg.max_positions, h});
  add("embeddings.token_type_embeddings.weight", {cfg.type_vocab_size, h});
  add("embeddings.LayerNorm.weight", {h});
  add("embeddings.LayerNorm.bias", {h});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = fmt::format("encoder.layer.{}.", l);
    for (const char* m : {"query", "key", "value"}) {
      add(p + "attention.self." + m + ".weight", {h, h});
      add(p + "attention.self." + m + ".bias", {h});
    }
    add(p + "attention.output.dense.weight", {h, h});
    add(p + "attention.output.dense.bias", {h});
    add(p + "attention.output.LayerNorm.weight", {h});
    add(p + "attention.output.LayerNorm.bias", {h});
    add(p + "intermediate.dense.weight", {cfg.intermediate_size, h});
    add(p + "intermediate.dense.bias", {cfg.intermediate_size});
    add(p + "output.dense.weight", {h, cfg.intermediate_size});
    add(p + "output.dense.bias", {h});
    add(p + "output.LayerNorm.weight", {h});
    add(p + "output.LayerNorm.bias", {h});
  }
  head_offset_ = total_;
  add("classifier.weight", {kNumCategories, h});
  add("classifier.bias", {kNumCategories});
}

void ParameterLayout::add(std::string name, std::vector<std::size_t> shape) {
  TensorInfo info;
  info.size = 1;
  for (auto d : shape) info.size *= d;
  info.offset = total_;
  info.shape = std::move(shape);
  info.name = std::move(name);
  total_ += info.size;
  index_.emplace(info.name, tensors_.size());
  tensors_.push_back(std::move(info));
}

const TensorInfo* ParameterLayout::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &tensors_[it->second];
}

const TensorInfo& ParameterLayout::at(std::string_view name) const {
  const auto* t = find(name);
  if (t == nullptr) throw DataError(fmt::format("no parameter tensor named '{}'", name));
  return *t;
}

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using RowMap = Eigen::Map<Row<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const Row<T>>;

struct LayerOffsets {
  std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, wi, bi, wo2, bo2, ln2_g, ln2_b;
};

struct Offsets {
  std::size_t word, position, type, emb_g, emb_b, cls_w, cls_b;
  std::vector<LayerOffsets> layers;

  Offsets(const ParameterLayout& lay, std::size_t num_layers) {
    auto at = [&](const std::string& n) { return lay.at(n).offset; };
    word = at("embeddings.word_embeddings.weight");
    position = at("embeddings.position_embeddings.weight");
    type = at("embeddings.token_type_embeddings.weight");
    emb_g = at("embeddings.LayerNorm.weight");
    emb_b = at("embeddings.LayerNorm.bias");
    cls_w = at("classifier.weight");
    cls_b = at("classifier.bias");
    for (std::size_t l = 0; l < num_layers; ++l) {
      const std::string p = fmt::format("encoder.layer.{}.", l);
      layers.push_back({at(p + "attention.self.query.weight"), at(p + "attention.self.query.bias"),
                        at(p + "attention.self.key.weight"), at(p + "attention.self.key.bias"),
                        at(p + "attention.self.value.weight"), at(p + "attention.self.value.bias"),
                        at(p + "attention.output.dense.weight"), at(p + "attention.output.dense.bias"),
                        at(p + "attention.output.LayerNorm.weight"), at(p + "attention.output.LayerNorm.bias"),
                        at(p + "intermediate.dense.weight"), at(p + "intermediate.dense.bias"),
                        at(p + "output.dense.weight"), at(p + "output.dense.bias"),
                        at(p + "output.LayerNorm.weight"), at(p + "output.LayerNorm.bias")});
    }
  }
};

template <typename T>
struct LnCache {
  Mat<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
struct LayerCache {
  Mat<T> x_in, q, k, v, context, x1, inter, act;
  std::vector<Mat<T>> probs;
  std::vector<Mat<T>> attn_masks;  // empty without dropout
  Mat<T> attn_drop, ffn_drop;      // empty without dropout
  LnCache<T> ln1, ln2;
};

template <typename T>
struct ForwardCache {
  LnCache<T> emb_ln;
  Mat<T> emb_drop;
  std::vector<LayerCache<T>> layers;
  Row<T> head_in;    // start-token state after dropout
  Row<T> head_drop;  // empty without dropout
};

// Entries are 0 (dropped) or 1 / (1 - p) (kept); empty when p == 0.
template <typename T>
Mat<T> dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double p) {
  if (p <= 0.0) return {};
  Mat<T> m(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(p) ? T(0) : keep;
  return m;
}

template <typename T>
void apply_mask(Mat<T>& x, const Mat<T>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, ConstRowMap<T> gamma, ConstRowMap<T> beta, double eps, LnCache<T>* cache) {
  const Eigen::Index n = x.cols();
  Mat<T> xhat(x.rows(), n);
  std::vector<T> inv(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    xhat.row(r) = (x.row(r).array() - mean) * is;
    inv[static_cast<std::size_t>(r)] = is;
  }
  Mat<T> y = (xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LnCache<T>& c, ConstRowMap<T> gamma, RowMap<T> dgamma,
                           RowMap<T> dbeta) {
  const T n = static_cast<T>(dy.cols());
  dgamma += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbeta += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * gamma.array();
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T s1 = dxhat.row(r).sum();
    const T s2 = dxhat.row(r).dot(c.xhat.row(r));
    dx.row(r) = (c.inv_std[static_cast<std::size_t>(r)] / n) *
                (n * dxhat.row(r).array() - s1 - c.xhat.row(r).array() * s2);
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

template <typename T>
void softmax_rows(Mat<T>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const T top = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - top).exp();
    s.row(r) /= s.row(r).sum();
  }
}

// y = x W^T + b for a [out, in] weight.
template <typename T>
Mat<T> linear(const Mat<T>& x, const T* w, const T* b, Eigen::Index out, Eigen::Index in) {
  ConstMatMap<T> W(w, out, in);
  Mat<T> y = x * W.transpose();
  y.rowwise() += ConstRowMap<T>(b, out);
  return y;
}

// Accumulates weight/bias gradients and returns dx.
template <typename T>
Mat<T> linear_backward(const Mat<T>& dy, const Mat<T>& x, const T* w, T* dw, T* db, Eigen::Index out,
                       Eigen::Index in) {
  MatMap<T>(dw, out, in).noalias() += dy.transpose() * x;
  RowMap<T>(db, out) += dy.colwise().sum();
  return dy * ConstMatMap<T>(w, out, in);
}

template <typename T>
class Pass {
 public:
  Pass(const EncoderConfig& cfg, const ParameterLayout& layout, const std::vector<T>& params)
      : cfg_(cfg), off_(layout, cfg.num_layers), p_(params.data()) {}

  void check_ids(std::span<const std::int32_t> ids) const {
    if (ids.empty()) throw DataError("empty token id sequence");
    if (ids.size() > cfg_.max_sequence_length()) {
      throw DataError(fmt::format("sequence of {} tokens exceeds the position table ({})", ids.size(),
                                  cfg_.max_sequence_length()));
    }
    for (auto id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
        throw DataError(fmt::format("token id {} outside vocabulary of {}", id, cfg_.vocab_size));
      }
    }
  }

  // Final hidden states; fills `cache` when given. `rng` enables dropout.
  Mat<T> encode(std::span<const std::int32_t> ids, Rng* rng, const DropoutSpec* drop, ForwardCache<T>* cache) const {
    check_ids(ids);
    const auto L = static_cast<Eigen::Index>(ids.size());
    const auto H = static_cast<Eigen::Index>(cfg_.hidden_size);
    const auto I = static_cast<Eigen::Index>(cfg_.intermediate_size);
    const auto nh = static_cast<Eigen::Index>(cfg_.num_heads);
    const Eigen::Index dh = H / nh;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Mat<T> e(L, H);
    for (Eigen::Index i = 0; i < L; ++i) {
      const auto pos = cfg_.position_offset + static_cast<std::size_t>(i);
      e.row(i) = ConstRowMap<T>(p_ + off_.word + static_cast<std::size_t>(ids[i]) * H, H) +
                 ConstRowMap<T>(p_ + off_.position + pos * H, H) + ConstRowMap<T>(p_ + off_.type, H);
    }
    Mat<T> x = layer_norm<T>(e, row(off_.emb_g, H), row(off_.emb_b, H), cfg_.layer_norm_eps,
                             cache ? &cache->emb_ln : nullptr);
    Mat<T> mask = rng ? dropout_mask<T>(*rng, L, H, drop->hidden) : Mat<T>();
    apply_mask(x, mask);
    if (cache) {
      cache->emb_drop = std::move(mask);
      cache->layers.resize(cfg_.num_layers);
    }

    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      const auto& o = off_.layers[l];
      LayerCache<T>* lc = cache ? &cache->layers[l] : nullptr;
      Mat<T> q = linear<T>(x, p_ + o.wq, p_ + o.bq, H, H);
      Mat<T> k = linear<T>(x, p_ + o.wk, p_ + o.bk, H, H);
      Mat<T> v = linear<T>(x, p_ + o.wv, p_ + o.bv, H, H);
      Mat<T> context(L, H);
      if (lc) {
        lc->probs.resize(static_cast<std::size_t>(nh));
        lc->attn_masks.resize(static_cast<std::size_t>(nh));
      }
      for (Eigen::Index h = 0; h < nh; ++h) {
        Mat<T> s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
        softmax_rows(s);
        Mat<T> am = rng ? dropout_mask<T>(*rng, L, L, drop->attention) : Mat<T>();
        if (am.size() != 0) {
          context.middleCols(h * dh, dh) = (s.array() * am.array()).matrix() * v.middleCols(h * dh, dh);
        } else {
          context.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
        }
        if (lc) {
          lc->probs[static_cast<std::size_t>(h)] = std::move(s);
          lc->attn_masks[static_cast<std::size_t>(h)] = std::move(am);
        }
      }
      Mat<T> a = linear<T>(context, p_ + o.wo, p_ + o.bo, H, H);
      Mat<T> amask = rng ? dropout_mask<T>(*rng, L, H, drop->hidden) : Mat<T>();
      apply_mask(a, amask);
      a += x;
      Mat<T> x1 = layer_norm<T>(a, row(o.ln1_g, H), row(o.ln1_b, H), cfg_.layer_norm_eps, lc ? &lc->ln1 : nullptr);
      Mat<T> inter = linear<T>(x1, p_ + o.wi, p_ + o.bi, I, H);
      Mat<T> act = inter.unaryExpr([](T z) { return gelu(z); });
      Mat<T> out = linear<T>(act, p_ + o.wo2, p_ + o.bo2, H, I);
      Mat<T> fmask = rng ? dropout_mask<T>(*rng, L, H, drop->hidden) : Mat<T>();
      apply_mask(out, fmask);
      out += x1;
      Mat<T> x2 = layer_norm<T>(out, row(o.ln2_g, H), row(o.ln2_b, H), cfg_.layer_norm_eps, lc ? &lc->ln2 : nullptr);
      if (lc) {
        lc->x_in = std::move(x);
        lc->q = std::move(q);
        lc->k = std::move(k);
        lc->v = std::move(v);
        lc->context = std::move(context);
        lc->attn_drop = std::move(amask);
        lc->x1 = std::move(x1);
        lc->inter = std::move(inter);
        lc->act = std::move(act);
        lc->ffn_drop = std::move(fmask);
      }
      x = std::move(x2);
    }
    return x;
  }

  ScoreVector head(const Row<T>& h0) const {
    const auto H = static_cast<Eigen::Index>(cfg_.hidden_size);
    ScoreVector y{};
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      y[c] = static_cast<double>(ConstRowMap<T>(p_ + off_.cls_w + c * cfg_.hidden_size, H).dot(h0) +
                                 p_[off_.cls_b + c]);
    }
    return y;
  }

  void backward(std::span<const std::int32_t> ids, const ForwardCache<T>& cache, const ScoreVector& dy, T* g) const {
    const auto L = static_cast<Eigen::Index>(ids.size());
    const auto H = static_cast<Eigen::Index>(cfg_.hidden_size);
    const auto I = static_cast<Eigen::Index>(cfg_.intermediate_size);
    const auto nh = static_cast<Eigen::Index>(cfg_.num_heads);
    const Eigen::Index dh = H / nh;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Row<T> dh0 = Row<T>::Zero(H);
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const T d = static_cast<T>(dy[c]);
      RowMap<T>(g + off_.cls_w + c * cfg_.hidden_size, H) += d * cache.head_in;
      g[off_.cls_b + c] += d;
      dh0 += d * ConstRowMap<T>(p_ + off_.cls_w + c * cfg_.hidden_size, H);
    }
    if (cache.head_drop.size() != 0) dh0.array() *= cache.head_drop.array();

    Mat<T> dx = Mat<T>::Zero(L, H);
    dx.row(0) = dh0;
    for (std::size_t li = cfg_.num_layers; li-- > 0;) {
      const auto& o = off_.layers[li];
      const auto& lc = cache.layers[li];
      Mat<T> dsum2 = layer_norm_backward<T>(dx, lc.ln2, row(o.ln2_g, H), grow(g, o.ln2_g, H), grow(g, o.ln2_b, H));
      Mat<T> dout = dsum2;
      apply_mask(dout, lc.ffn_drop);
      Mat<T> dact = linear_backward<T>(dout, lc.act, p_ + o.wo2, g + o.wo2, g + o.bo2, H, I);
      Mat<T> dinter(L, I);
      for (Eigen::Index i = 0; i < dinter.size(); ++i) dinter.data()[i] = dact.data()[i] * gelu_grad(lc.inter.data()[i]);
      Mat<T> dx1 = dsum2 + linear_backward<T>(dinter, lc.x1, p_ + o.wi, g + o.wi, g + o.bi, I, H);

      Mat<T> dsum1 = layer_norm_backward<T>(dx1, lc.ln1, row(o.ln1_g, H), grow(g, o.ln1_g, H), grow(g, o.ln1_b, H));
      Mat<T> da = dsum1;
      apply_mask(da, lc.attn_drop);
      Mat<T> dcontext = linear_backward<T>(da, lc.context, p_ + o.wo, g + o.wo, g + o.bo, H, H);

      Mat<T> dq(L, H), dk(L, H), dv(L, H);
      for (Eigen::Index h = 0; h < nh; ++h) {
        const auto& p = lc.probs[static_cast<std::size_t>(h)];
        const auto& am = lc.attn_masks[static_cast<std::size_t>(h)];
        const auto dc = dcontext.middleCols(h * dh, dh);
        Mat<T> dp = dc * lc.v.middleCols(h * dh, dh).transpose();
        if (am.size() != 0) {
          dv.middleCols(h * dh, dh) = (p.array() * am.array()).matrix().transpose() * dc;
          dp.array() *= am.array();
        } else {
          dv.middleCols(h * dh, dh) = p.transpose() * dc;
        }
        Mat<T> ds(L, L);
        for (Eigen::Index r = 0; r < L; ++r) {
          const T dot = dp.row(r).dot(p.row(r));
          ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
        }
        ds *= scale;
        dq.middleCols(h * dh, dh) = ds * lc.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh) = ds.transpose() * lc.q.middleCols(h * dh, dh);
      }
      Mat<T> dx_in = dsum1;
      dx_in += linear_backward<T>(dq, lc.x_in, p_ + o.wq, g + o.wq, g + o.bq, H, H);
      dx_in += linear_backward<T>(dk, lc.x_in, p_ + o.wk, g + o.wk, g + o.bk, H, H);
      dx_in += linear_backward<T>(dv, lc.x_in, p_ + o.wv, g + o.wv, g + o.bv, H, H);
      dx = std::move(dx_in);
    }
    apply_mask(dx, cache.emb_drop);
    Mat<T> de = layer_norm_backward<T>(dx, cache.emb_ln, row(off_.emb_g, H), grow(g, off_.emb_g, H),
                                       grow(g, off_.emb_b, H));
    for (Eigen::Index i = 0; i < L; ++i) {
      const auto pos = cfg_.position_offset + static_cast<std::size_t>(i);
      RowMap<T>(g + off_.word + static_cast<std::size_t>(ids[i]) * H, H) += de.row(i);
      RowMap<T>(g + off_.position + pos * H, H) += de.row(i);
      RowMap<T>(g + off_.type, H) += de.row(i);
    }
  }

 private:
  ConstRowMap<T> row(std::size_t offset, Eigen::Index n) const { return ConstRowMap<T>(p_ + offset, n); }
  static RowMap<T> grow(T* g, std::size_t offset, Eigen::Index n) { return RowMap<T>(g + offset, n); }

  const EncoderConfig& cfg_;
  Offsets off_;
  const T* p_;
};

}  // namespace

template <typename T>
SequenceClassifier<T>::SequenceClassifier(EncoderConfig cfg)
    : cfg_((cfg.validate(), cfg)), layout_(cfg_), params_(layout_.total(), T(0)) {}

template <typename T>
std::span<T> SequenceClassifier<T>::tensor(std::string_view name) {
  const auto& t = layout_.at(name);
  return {params_.data() + t.offset, t.size};
}

template <typename T>
std::span<const T> SequenceClassifier<T>::tensor(std::string_view name) const {
  const auto& t = layout_.at(name);
  return {params_.data() + t.offset, t.size};
}

namespace {

template <typename T>
void init_tensor(std::span<T> data, const std::string& name, Rng& rng, double stddev) {
  if (name.ends_with("LayerNorm.weight")) {
    std::fill(data.begin(), data.end(), T(1));
  } else if (name.ends_with("bias")) {
    std::fill(data.begin(), data.end(), T(0));
  } else {
    for (auto& v : data) v = static_cast<T>(rng.normal() * stddev);
  }
}

}  // namespace

template <typename T>
void SequenceClassifier<T>::init_random(std::uint64_t seed, double stddev) {
  Rng rng(seed);
  for (const auto& t : layout_.tensors()) {
    init_tensor<T>(std::span<T>(params_.data() + t.offset, t.size), t.name, rng, stddev);
  }
}

template <typename T>
void SequenceClassifier<T>::init_head(std::uint64_t seed, double stddev) {
  Rng rng(seed);
  for (const char* name : {"classifier.weight", "classifier.bias"}) init_tensor<T>(tensor(name), name, rng, stddev);
}

template <typename T>
ScoreVector SequenceClassifier<T>::logits(std::span<const std::int32_t> ids) const {
  Pass<T> pass(cfg_, layout_, params_);
  const Mat<T> x = pass.encode(ids, nullptr, nullptr, nullptr);
  return pass.head(x.row(0));
}

template <typename T>
std::vector<T> SequenceClassifier<T>::start_embedding(std::span<const std::int32_t> ids) const {
  Pass<T> pass(cfg_, layout_, params_);
  const Mat<T> x = pass.encode(ids, nullptr, nullptr, nullptr);
  return std::vector<T>(x.row(0).data(), x.row(0).data() + x.cols());
}

template <typename T>
double SequenceClassifier<T>::accumulate_gradient(std::span<const std::int32_t> ids, Category target, double weight,
                                                  const DropoutSpec* dropout, std::span<T> grad, double scale,
                                                  ScoreVector* logits_out) const {
  if (grad.size() != params_.size()) {
    throw DataError(fmt::format("gradient buffer has {} entries, model has {}", grad.size(), params_.size()));
  }
  Pass<T> pass(cfg_, layout_, params_);
  ForwardCache<T> cache;
  std::optional<Rng> rng;
  if (dropout != nullptr) rng.emplace(dropout->seed);
  const Mat<T> x = pass.encode(ids, rng ? &*rng : nullptr, dropout, &cache);
  cache.head_in = x.row(0);
  if (rng && dropout->head > 0.0) {
    Mat<T> m = dropout_mask<T>(*rng, 1, x.cols(), dropout->head);
    cache.head_drop = m.row(0);
    cache.head_in.array() *= cache.head_drop.array();
  }
  const ScoreVector y = pass.head(cache.head_in);
  if (logits_out != nullptr) *logits_out = y;
  const ConfidenceVector p = softmax(y);
  ScoreVector dy = cross_entropy_grad(p, target);
  for (double& d : dy) d *= weight * scale;
  pass.backward(ids, cache, dy, grad.data());
  return weight * cross_entropy(p, target);
}

template class SequenceClassifier<float>;
template class SequenceClassifier<double>;

}  // namespace polyframe
