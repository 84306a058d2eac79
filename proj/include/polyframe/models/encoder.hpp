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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polyframe/corpus/types.hpp"
#include "polyframe/models/math.hpp"

namespace polyframe {

enum class EncoderArch { Bert, Roberta };

std::string_view to_string(EncoderArch arch);
EncoderArch encoder_arch_from_string(std::string_view s);  // throws ConfigError

// Post-LN transformer encoder hyperparameters (BERT / RoBERTa family).
struct EncoderConfig {
  EncoderArch arch = EncoderArch::Bert;
  std::size_t vocab_size = 0;
  std::size_t hidden_size = 768;
  std::size_t num_layers = 12;
  std::size_t num_heads = 12;
  std::size_t intermediate_size = 3072;
  std::size_t max_positions = 512;
  std::size_t type_vocab_size = 2;
  double layer_norm_eps = 1e-12;
  double hidden_dropout = 0.1;
  double attention_dropout = 0.1;
  // Position ids run from position_offset (RoBERTa: pad id + 1).
  std::size_t position_offset = 0;

  void validate() const;  // throws ConfigError
  // Longest id sequence the position table admits.
  std::size_t max_sequence_length() const { return max_positions - position_offset; }
  std::size_t parameter_count() const;
};

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Named tensors packed into one flat buffer. Encoder tensors come first, the
// classification head ("classifier.weight" [3, hidden], "classifier.bias" [3])
// last, so [0, head_offset()) is exactly the encoder.
class ParameterLayout {
 public:
  explicit ParameterLayout(const EncoderConfig& cfg);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& at(std::string_view name) const;  // throws DataError
  const TensorInfo* find(std::string_view name) const;
  std::size_t total() const { return total_; }
  std::size_t head_offset() const { return head_offset_; }

 private:
  void add(std::string name, std::vector<std::size_t> shape);

  std::vector<TensorInfo> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t total_ = 0;
  std::size_t head_offset_ = 0;
};

// Training-mode dropout: probabilities plus a seed that fixes every mask.
struct DropoutSpec {
  std::uint64_t seed = 0;
  double hidden = 0.1;
  double attention = 0.1;
  double head = 0.1;
};

// Encoder plus start-token classification head: the first token's final
// hidden state goes through dropout and a linear map to 3 scores.
template <typename T>
class SequenceClassifier {
 public:
  explicit SequenceClassifier(EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }
  const ParameterLayout& layout() const { return layout_; }
  std::vector<T>& parameters() { return params_; }
  const std::vector<T>& parameters() const { return params_; }
  std::span<T> tensor(std::string_view name);
  std::span<const T> tensor(std::string_view name) const;

  // Normal(0, stddev) weights, zero biases, unit layer-norm gains.
  void init_random(std::uint64_t seed, double stddev = 0.02);
  // Re-initializes only the classification head.
  void init_head(std::uint64_t seed, double stddev = 0.02);

  // Evaluation mode (no dropout). Throws DataError on an empty, overlong or
  // out-of-vocabulary id sequence.
  ScoreVector logits(std::span<const std::int32_t> ids) const;
  std::vector<T> start_embedding(std::span<const std::int32_t> ids) const;

  // Forward and backward pass for one example. Returns weight * cross-entropy
  // and adds scale * weight * d(cross-entropy)/d(theta) into `grad`. With
  // `dropout == nullptr` the pass is deterministic (evaluation mode).
  double accumulate_gradient(std::span<const std::int32_t> ids, Category target, double weight,
                             const DropoutSpec* dropout, std::span<T> grad, double scale,
                             ScoreVector* logits_out = nullptr) const;

 private:
  EncoderConfig cfg_;
  ParameterLayout layout_;
  std::vector<T> params_;
};

extern template class SequenceClassifier<float>;
extern template class SequenceClassifier<double>;

}  // namespace polyframe
