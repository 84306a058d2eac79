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
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polyframe/corpus/types.hpp"
#include "polyframe/models/encoder.hpp"
#include "polyframe/models/math.hpp"
#include "polyframe/models/tokenizer.hpp"

namespace polyframe {

struct TokenizerSpec {
  TokenizerKind kind = TokenizerKind::WordPiece;
  bool lowercase = true;   // WordPiece only
  bool normalize = true;   // fastBPE only: tweet normalization
  Vocabulary vocab;
  std::vector<std::pair<std::string, std::string>> merges;  // fastBPE only
};

std::unique_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec);

// Named float32 tensors as stored in weights.bin ("PFW1" magic, tensor count,
// then per tensor: name, rank, dims, little-endian data).
struct NamedTensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};
using TensorMap = std::map<std::string, NamedTensor>;

TensorMap read_weights(const std::filesystem::path& path);
void write_weights(const std::filesystem::path& path, const TensorMap& tensors);

struct Prediction {
  Category label = Category::Other;
  ConfidenceVector confidence{};

  double top_confidence() const { return confidence[index_of(label)]; }
};

// Tokenizer plus encoder-with-head, loaded from and saved to a checkpoint
// directory (config.json, vocab.txt, optional merges.txt, weights.bin).
class TextClassifier {
 public:
  TextClassifier(TokenizerSpec tokenizer, SequenceClassifier<float> network, std::size_t max_seq_len);

  // Throws DataError when the directory or any required file or tensor is
  // missing. A checkpoint without classifier tensors gets a fresh head drawn
  // from `head_seed`.
  static TextClassifier load(const std::filesystem::path& dir, std::size_t max_seq_len, std::uint64_t head_seed);
  void save(const std::filesystem::path& dir) const;

  std::vector<std::int32_t> encode(std::string_view text) const;
  Prediction predict(std::string_view text) const;
  // Evaluation mode; results are in input order and independent of `threads`
  // (0 = hardware concurrency).
  std::vector<Prediction> predict_batch(std::span<const Tweet> tweets, std::size_t threads = 0) const;
  std::vector<Prediction> predict_texts(std::span<const std::string> texts, std::size_t threads = 0) const;

  SequenceClassifier<float>& network() { return network_; }
  const SequenceClassifier<float>& network() const { return network_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }
  std::size_t max_seq_len() const { return max_seq_len_; }

 private:
  TokenizerSpec spec_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  SequenceClassifier<float> network_;
  std::size_t max_seq_len_;
};

// A checkpoint identifier resolves to itself when it is a directory, else to
// $POLYFRAME_MODEL_DIR/<id>. Throws DataError when neither exists.
std::filesystem::path resolve_checkpoint(const std::string& model_name);

struct RandomEncoderOptions {
  EncoderConfig encoder;  // vocab_size is filled from the built vocabulary
  std::size_t vocab_limit = 8000;
  bool lowercase = true;
  std::uint64_t seed = 2025;
};

// Writes a randomly initialised WordPiece checkpoint whose vocabulary is
// built from `texts`.
void write_random_checkpoint(const std::filesystem::path& dir, const std::vector<std::string>& texts,
                             RandomEncoderOptions options);

}  // namespace polyframe
