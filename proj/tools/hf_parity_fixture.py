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

"""Build small random BERT and RoBERTa models with transformers, convert them,
and record reference token ids and start-token logits in expected.json."""

import json
import sys
from pathlib import Path

import torch
from transformers import BertConfig, BertForSequenceClassification, BertTokenizer, RobertaConfig, \
    RobertaForSequenceClassification

sys.path.insert(0, str(Path(__file__).resolve().parent))
from export_hf_checkpoint import collect_tensors, export, write_weights  # noqa: E402

TEXTS = ["the senator proposed a new bill", "Crisis at the border!", "unaffable budget talks"]
WORDS = ["the", "senator", "proposed", "a", "new", "bill", "crisis", "at", "border", "!", "un", "##aff", "##able",
         "budget", "talks", ","]


def start_logits(body, weight, bias, ids):
    with torch.no_grad():
        hidden = body(input_ids=torch.tensor([ids])).last_hidden_state[0, 0]
        return (weight @ hidden + bias).tolist()


def main(root):
    root = Path(root)
    torch.manual_seed(7)
    expected = {}

    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS
    src = root / "bert_src"
    src.mkdir(parents=True, exist_ok=True)
    (src / "vocab.txt").write_text("".join(t + "\n" for t in vocab))
    cfg = BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=2, num_attention_heads=2,
                     intermediate_size=32, max_position_embeddings=64, num_labels=3)
    model = BertForSequenceClassification(cfg).eval()
    model.save_pretrained(src)
    tok = BertTokenizer(str(src / "vocab.txt"), do_lower_case=True)
    tok.save_pretrained(src)
    export(str(src), str(root / "bert"))
    w, b = model.classifier.weight.detach(), model.classifier.bias.detach()
    expected["bert"] = [
        {"text": t, "ids": tok(t)["input_ids"], "logits": start_logits(model.bert, w, b, tok(t)["input_ids"])}
        for t in TEXTS
    ]

    rcfg = RobertaConfig(vocab_size=40, hidden_size=16, num_hidden_layers=2, num_attention_heads=4,
                         intermediate_size=24, max_position_embeddings=34, num_labels=3, type_vocab_size=1,
                         pad_token_id=1)
    rmodel = RobertaForSequenceClassification(rcfg).eval()
    # The sequence-classification head is dense+tanh+out_proj; the converter
    # only carries a plain 3-way linear head, so attach one for the comparison.
    head = torch.nn.Linear(16, 3)
    state = {k: v for k, v in rmodel.state_dict().items() if not k.startswith("classifier.")}
    state["classifier.weight"] = head.weight.detach()
    state["classifier.bias"] = head.bias.detach()
    out = root / "roberta"
    out.mkdir(parents=True, exist_ok=True)
    write_weights(out / "weights.bin", collect_tensors(state))
    w, b = head.weight.detach(), head.bias.detach()
    ids = [[0, 5, 9, 17, 2], [0, 33, 2], [0] + list(range(4, 34)) + [2]]
    expected["roberta"] = {
        "config": {"vocab_size": 40, "hidden_size": 16, "num_layers": 2, "num_heads": 4, "intermediate_size": 24,
                   "max_positions": 34, "type_vocab_size": 1, "position_offset": 2,
                   "layer_norm_eps": rcfg.layer_norm_eps},
        "cases": [{"ids": i, "logits": start_logits(rmodel.roberta, w, b, i)} for i in ids],
    }
    (root / "expected.json").write_text(json.dumps(expected, indent=2))


if __name__ == "__main__":
    main(sys.argv[1])
