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

#include "polyframe/models/classifier.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "polyframe/common/error.hpp"
#include "polyframe/common/parallel.hpp"

namespace polyframe {

static_assert(std::endian::native == std::endian::little, "weights.bin I/O assumes a little-endian host");

std::unique_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec) {
  if (spec.kind == TokenizerKind::WordPiece) return std::make_unique<WordPieceTokenizer>(spec.vocab, spec.lowercase);
  return std::make_unique<FastBpeTokenizer>(spec.vocab, spec.merges, spec.normalize);
}

namespace {

constexpr char kMagic[4] = {'P', 'F', 'W', '1'};

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in, const std::filesystem::path& path) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw DataError(fmt::format("{}: truncated", path.string()));
  return v;
}

}  // namespace

TensorMap read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read weights {}", path.string()));
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(fmt::format("{}: not a weights file", path.string()));
  }
  const auto count = get<std::uint32_t>(in, path);
  TensorMap out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError(fmt::format("{}: truncated", path.string()));
    const auto rank = get<std::uint32_t>(in, path);
    NamedTensor tensor;
    std::size_t size = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      tensor.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in, path)));
      size *= tensor.shape.back();
    }
    tensor.data.resize(size);
    if (!in.read(reinterpret_cast<char*>(tensor.data.data()), static_cast<std::streamsize>(size * sizeof(float)))) {
      throw DataError(fmt::format("{}: truncated tensor {}", path.string(), name));
    }
    out.emplace(std::move(name), std::move(tensor));
  }
  return out;
}

void write_weights(const std::filesystem::path& path, const TensorMap& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write weights {}", path.string()));
  out.write(kMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw DataError(fmt::format("failed writing {}", path.string()));
}

TextClassifier::TextClassifier(TokenizerSpec tokenizer, SequenceClassifier<float> network, std::size_t max_seq_len)
    : spec_(std::move(tokenizer)),
      tokenizer_(make_tokenizer(spec_)),
      network_(std::move(network)),
      max_seq_len_(std::min(max_seq_len, network_.config().max_sequence_length())) {
  if (spec_.vocab.size() != network_.config().vocab_size) {
    throw DataError(fmt::format("tokenizer vocabulary has {} entries but the encoder expects {}", spec_.vocab.size(),
                                network_.config().vocab_size));
  }
  if (max_seq_len_ < 2) throw ConfigError("max_seq_len must be at least 2");
}

namespace {

nlohmann::json config_to_json(const EncoderConfig& c, const TokenizerSpec& t) {
  return {{"arch", std::string(to_string(c.arch))},
          {"vocab_size", c.vocab_size},
          {"hidden_size", c.hidden_size},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"intermediate_size", c.intermediate_size},
          {"max_positions", c.max_positions},
          {"type_vocab_size", c.type_vocab_size},
          {"layer_norm_eps", c.layer_norm_eps},
          {"hidden_dropout", c.hidden_dropout},
          {"attention_dropout", c.attention_dropout},
          {"position_offset", c.position_offset},
          {"tokenizer", std::string(to_string(t.kind))},
          {"lowercase", t.lowercase},
          {"normalization", t.normalize}};
}

}  // namespace

TextClassifier TextClassifier::load(const std::filesystem::path& dir, std::size_t max_seq_len,
                                    std::uint64_t head_seed) {
  if (!std::filesystem::is_directory(dir)) throw DataError(fmt::format("checkpoint directory {} not found", dir.string()));
  std::ifstream cin(dir / "config.json");
  if (!cin) throw DataError(fmt::format("checkpoint {} lacks config.json", dir.string()));
  nlohmann::json j;
  EncoderConfig cfg;
  TokenizerSpec spec;
  try {
    cin >> j;
    cfg.arch = encoder_arch_from_string(j.at("arch").get<std::string>());
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.hidden_size = j.at("hidden_size").get<std::size_t>();
    cfg.num_layers = j.at("num_layers").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.intermediate_size = j.at("intermediate_size").get<std::size_t>();
    cfg.max_positions = j.at("max_positions").get<std::size_t>();
    cfg.type_vocab_size = j.value("type_vocab_size", std::size_t{2});
    cfg.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
    cfg.hidden_dropout = j.value("hidden_dropout", 0.1);
    cfg.attention_dropout = j.value("attention_dropout", 0.1);
    cfg.position_offset = j.value("position_offset", std::size_t{0});
    spec.kind = tokenizer_kind_from_string(j.at("tokenizer").get<std::string>());
    spec.lowercase = j.value("lowercase", true);
    spec.normalize = j.value("normalization", true);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}/config.json: {}", dir.string(), e.what()));
  }
  spec.vocab = Vocabulary::load(dir / "vocab.txt");
  if (spec.kind == TokenizerKind::FastBpe) spec.merges = FastBpeTokenizer::load_merges(dir / "merges.txt");

  SequenceClassifier<float> net(cfg);
  const auto tensors = read_weights(dir / "weights.bin");
  bool head_loaded = false;
  for (const auto& info : net.layout().tensors()) {
    auto it = tensors.find(info.name);
    const bool is_head = info.offset >= net.layout().head_offset();
    if (it == tensors.end()) {
      if (is_head) continue;
      throw DataError(fmt::format("checkpoint {} lacks tensor {}", dir.string(), info.name));
    }
    if (it->second.shape != info.shape) {
      throw DataError(fmt::format("checkpoint tensor {} has shape [{}], expected [{}]", info.name,
                                  fmt::join(it->second.shape, ","), fmt::join(info.shape, ",")));
    }
    std::copy(it->second.data.begin(), it->second.data.end(), net.parameters().begin() + info.offset);
    head_loaded = head_loaded || is_head;
  }
  for (const auto& [name, t] : tensors) {
    if (net.layout().find(name) == nullptr) spdlog::debug("ignoring checkpoint tensor {}", name);
  }
  if (!head_loaded) {
    spdlog::info("checkpoint {} has no classification head; initialising one", dir.string());
    net.init_head(head_seed);
  }
  return TextClassifier(std::move(spec), std::move(net), max_seq_len);
}

void TextClassifier::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    if (!out) throw DataError(fmt::format("cannot write {}", (dir / "config.json").string()));
    out << config_to_json(network_.config(), spec_).dump(2) << '\n';
  }
  spec_.vocab.save(dir / "vocab.txt");
  if (spec_.kind == TokenizerKind::FastBpe) {
    std::ofstream out(dir / "merges.txt", std::ios::binary);
    for (const auto& [a, b] : spec_.merges) out << a << ' ' << b << '\n';
  }
  TensorMap tensors;
  const auto& params = network_.parameters();
  for (const auto& info : network_.layout().tensors()) {
    NamedTensor t;
    t.shape = info.shape;
    t.data.assign(params.begin() + info.offset, params.begin() + info.offset + info.size);
    tensors.emplace(info.name, std::move(t));
  }
  write_weights(dir / "weights.bin", tensors);
}

std::vector<std::int32_t> TextClassifier::encode(std::string_view text) const {
  return tokenizer_->encode(text, max_seq_len_);
}

Prediction TextClassifier::predict(std::string_view text) const {
  const auto p = softmax(network_.logits(encode(text)));
  return {argmax(p), p};
}

std::vector<Prediction> TextClassifier::predict_texts(std::span<const std::string> texts, std::size_t threads) const {
  std::vector<Prediction> out(texts.size());
  parallel_for(texts.size(), threads, [&](std::size_t, std::size_t i) { out[i] = predict(texts[i]); });
  return out;
}

std::vector<Prediction> TextClassifier::predict_batch(std::span<const Tweet> tweets, std::size_t threads) const {
  std::vector<Prediction> out(tweets.size());
  parallel_for(tweets.size(), threads, [&](std::size_t, std::size_t i) { out[i] = predict(tweets[i].text); });
  return out;
}

std::filesystem::path resolve_checkpoint(const std::string& model_name) {
  if (std::filesystem::is_directory(model_name)) return model_name;
  if (const char* root = std::getenv("POLYFRAME_MODEL_DIR"); root != nullptr) {
    const auto candidate = std::filesystem::path(root) / model_name;
    if (std::filesystem::is_directory(candidate)) return candidate;
  }
  throw DataError(fmt::format(
      "checkpoint '{}' not found: pass a checkpoint directory or export it into $POLYFRAME_MODEL_DIR/{}", model_name,
      model_name));
}

void write_random_checkpoint(const std::filesystem::path& dir, const std::vector<std::string>& texts,
                             RandomEncoderOptions options) {
  TokenizerSpec spec;
  spec.kind = TokenizerKind::WordPiece;
  spec.lowercase = options.lowercase;
  spec.vocab = build_wordpiece_vocab(texts, options.vocab_limit, options.lowercase);
  options.encoder.vocab_size = spec.vocab.size();
  options.encoder.arch = EncoderArch::Bert;
  SequenceClassifier<float> net(options.encoder);
  net.init_random(options.seed);
  TextClassifier model(std::move(spec), std::move(net), options.encoder.max_sequence_length());
  model.save(dir);
}

}  // namespace polyframe
