#!/usr/bin/env python3
# Copyright 2026 The Polyframe Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Convert a Hugging Face BERT or RoBERTa/BERTweet checkpoint into a polyframe checkpoint directory.

Writes config.json, vocab.txt, merges.txt (fastBPE models only) and weights.bin.
Pooler weights are dropped. Classifier weights are copied when the source has a
3-way ``classifier.weight``; otherwise the C++ loader draws a fresh head.
"""

import argparse
import json
import struct
import sys
from pathlib import Path

MAGIC = b"PFW1"


def write_weights(path, tensors):
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            data = tensors[name]
            encoded = name.encode("utf-8")
            out.write(struct.pack("<I", len(encoded)))
            out.write(encoded)
            out.write(struct.pack("<I", data.ndim))
            for d in data.shape:
                out.write(struct.pack("<Q", d))
            out.write(data.astype("<f4", copy=False).tobytes(order="C"))


def strip_prefix(name):
    for prefix in ("bert.", "roberta."):
        if name.startswith(prefix):
            return name[len(prefix):]
    return name


def collect_tensors(state_dict):
    tensors = {}
    for raw, value in state_dict.items():
        name = strip_prefix(raw)
        if name.startswith(("pooler.", "lm_head.", "cls.")) or name.endswith("position_ids"):
            continue
        if name.startswith("classifier.") and not name.startswith(("classifier.weight", "classifier.bias")):
            continue
        if name == "classifier.weight" and value.shape[0] != 3:
            continue
        if name == "classifier.bias" and value.shape[0] != 3:
            continue
        tensors[name] = value.detach().cpu().float().numpy()
    return tensors


def vocab_in_id_order(tokenizer):
    vocab = tokenizer.get_vocab()
    tokens = [None] * (max(vocab.values()) + 1)
    for token, index in vocab.items():
        tokens[index] = token
    missing = [i for i, t in enumerate(tokens) if t is None]
    if missing:
        sys.exit(f"vocabulary has gaps at ids {missing[:5]}")
    for t in tokens:
        if "\n" in t:
            sys.exit(f"vocabulary token {t!r} contains a newline")
    return tokens


def export(source, out_dir):
    from transformers import AutoConfig, AutoModel, AutoModelForSequenceClassification, AutoTokenizer

    config = AutoConfig.from_pretrained(source)
    tokenizer = AutoTokenizer.from_pretrained(source)
    try:
        model = AutoModelForSequenceClassification.from_pretrained(source)
    except (OSError, ValueError):
        model = AutoModel.from_pretrained(source)
    model.eval()

    arch = "roberta" if config.model_type in ("roberta", "bertweet", "xlm-roberta") else "bert"
    fastbpe = hasattr(tokenizer, "merges_file") and hasattr(tokenizer, "bpe_ranks")
    pad = getattr(config, "pad_token_id", 0) or 0
    tokens = vocab_in_id_order(tokenizer)
    tensors = collect_tensors(model.state_dict())

    expected_vocab = tensors["embeddings.word_embeddings.weight"].shape[0]
    if len(tokens) != expected_vocab:
        tokens = tokens[:expected_vocab]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = {
        "arch": arch,
        "vocab_size": expected_vocab,
        "hidden_size": config.hidden_size,
        "num_layers": config.num_hidden_layers,
        "num_heads": config.num_attention_heads,
        "intermediate_size": config.intermediate_size,
        "max_positions": config.max_position_embeddings,
        "type_vocab_size": config.type_vocab_size,
        "layer_norm_eps": config.layer_norm_eps,
        "hidden_dropout": config.hidden_dropout_prob,
        "attention_dropout": config.attention_probs_dropout_prob,
        "position_offset": pad + 1 if arch == "roberta" else 0,
        "tokenizer": "fastbpe" if fastbpe else "wordpiece",
        "lowercase": bool(getattr(tokenizer, "do_lower_case", True)),
        "normalization": bool(getattr(tokenizer, "normalization", True)),
    }
    if config.hidden_act != "gelu":
        sys.exit(f"unsupported activation {config.hidden_act}")
    (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    (out / "vocab.txt").write_text("".join(t + "\n" for t in tokens), encoding="utf-8")
    if fastbpe:
        ranked = sorted(tokenizer.bpe_ranks.items(), key=lambda kv: kv[1])
        (out / "merges.txt").write_text("".join(f"{a} {b}\n" for (a, b), _ in ranked), encoding="utf-8")
    write_weights(out / "weights.bin", tensors)
    return cfg


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("source", help="model id or local directory, e.g. vinai/bertweet-base")
    parser.add_argument("out_dir", help="destination checkpoint directory")
    args = parser.parse_args()
    cfg = export(args.source, args.out_dir)
    print(json.dumps(cfg))


if __name__ == "__main__":
    main()
