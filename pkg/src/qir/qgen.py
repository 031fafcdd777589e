"""Seq2seq question generator: BiLSTM encoder, dual attention, coverage.

The encoder is a 2-layer bidirectional LSTM whose top-layer states feed two
attention paths: a word-level attention with a learned context vector, and
a bilinear general attention driven by the decoder state.  Their contexts
are combined by elementwise maximum, the general-attention path is coverage
adjusted, and a 2-layer LSTM decoder with an attentional output layer emits
the question.  All gate math is written out explicitly on float64 tensors;
gradients come from reverse-mode autodiff.

Sequences are processed one at a time (no padding/batching) so losses are
exact and runs are reproducible bit-for-bit under a fixed seed.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from .corpus import load_stopwords

torch.set_num_threads(1)  # fixed reduction order; tensors here are tiny

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")

DEFAULT_EMBED_DIM = 100
DEFAULT_HIDDEN_DIM = 128
DEFAULT_MAX_LEN = 30
DEFAULT_WORDS_PER_ANSWER = 5   # G_i: word-mode inputs taken per answer
MAX_SEQ_LEN = 400

_GATES = ("i", "f", "g", "o")


class QgenError(RuntimeError):
    pass


class Vocab:
    """Word <-> id bijection with fixed reserved ids 0..3."""

    def __init__(self, words: Sequence[str]):
        for w in words:
            if w in RESERVED:
                raise QgenError(f"reserved token in vocabulary: {w!r}")
        self.word_of: list[str] = list(RESERVED) + list(words)
        if len(set(self.word_of)) != len(self.word_of):
            raise QgenError("duplicate words in vocabulary")
        self.id_of: dict[str, int] = {w: i for i, w in enumerate(self.word_of)}

    def __len__(self) -> int:
        return len(self.word_of)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id_of.get(t, UNK) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.word_of[i] for i in ids]


@dataclass(frozen=True)
class TrainingCorpus:
    """Answer/question token pairs; both sides non-empty."""

    pairs: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def __post_init__(self):
        if not self.pairs:
            raise QgenError("training corpus is empty")
        for answer, question in self.pairs:
            if not answer or not question:
                raise QgenError("training pairs need non-empty answer and question")

    @classmethod
    def from_texts(cls, pairs: Iterable[tuple[str, str]]) -> "TrainingCorpus":
        return cls(tuple((tuple(a.lower().split()), tuple(q.lower().split()))
                         for a, q in pairs))

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "TrainingCorpus":
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                record = json.loads(line)
                if "answer" not in record or "question" not in record:
                    raise QgenError(f'line {line_no}: need "answer" and "question" fields')
                pairs.append((str(record["answer"]), str(record["question"])))
        return cls.from_texts(pairs)


def build_vocab(corpus: TrainingCorpus, min_count: int = 1) -> Vocab:
    """Keep words appearing at least ``min_count`` times across both sides."""
    counts: dict[str, int] = {}
    for answer, question in corpus.pairs:
        for w in list(answer) + list(question):
            counts[w] = counts.get(w, 0) + 1
    return Vocab([w for w, c in counts.items() if c >= min_count])


class Seq2SeqModel:
    """All trainable parameters, addressable by name."""

    def __init__(self, vocab: Vocab, embed_dim: int = DEFAULT_EMBED_DIM,
                 hidden_dim: int = DEFAULT_HIDDEN_DIM, seed: int = 0,
                 init_scale: float = 0.1):
        self.vocab = vocab
        self.embed_dim = int(embed_dim)
        self.hidden_dim = int(hidden_dim)
        self.params: dict[str, torch.Tensor] = {}
        rng = np.random.default_rng(seed)
        V, E, H = len(vocab), self.embed_dim, self.hidden_dim
        H2 = 2 * H

        def param(name: str, *shape: int) -> None:
            data = rng.uniform(-init_scale, init_scale, size=shape)
            self.params[name] = torch.tensor(data, dtype=torch.float64, requires_grad=True)

        param("embed", V, E)
        for layer, in_dim in ((0, E), (1, H2)):
            for direction in ("fw", "bw"):
                for gate in _GATES:
                    param(f"enc_l{layer}_{direction}_W{gate}", H, in_dim)
                    param(f"enc_l{layer}_{direction}_U{gate}", H, H)
                    param(f"enc_l{layer}_{direction}_b{gate}", H)
        for layer, in_dim in ((0, E), (1, H2)):
            for gate in _GATES:
                param(f"dec_l{layer}_W{gate}", H2, in_dim)
                param(f"dec_l{layer}_U{gate}", H2, H2)
                param(f"dec_l{layer}_b{gate}", H2)
        param("attn_Ww", H2, H2)
        param("attn_bw", H2)
        param("attn_uw", H2)
        param("attn_Wa", H2, H2)
        param("cov_wc", H2)
        param("out_Wx", H2, 2 * H2)
        param("out_W", V, H2)
        param("out_b", V)
        # forget-gate bias at 1: standard aid to gradient flow through time
        with torch.no_grad():
            for name, tensor in self.params.items():
                if name.endswith("_bf"):
                    tensor.fill_(1.0)

    def zero_grad(self) -> None:
        for p in self.params.values():
            if p.grad is not None:
                p.grad.zero_()

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not torch.isfinite(p).all():
                raise QgenError(f"non-finite values in parameter {name}")


def _lstm_cell(model: Seq2SeqModel, prefix: str, x: torch.Tensor,
               h: torch.Tensor, c: torch.Tensor):
    p = model.params
    i = torch.sigmoid(p[f"{prefix}_Wi"] @ x + p[f"{prefix}_Ui"] @ h + p[f"{prefix}_bi"])
    f = torch.sigmoid(p[f"{prefix}_Wf"] @ x + p[f"{prefix}_Uf"] @ h + p[f"{prefix}_bf"])
    g = torch.tanh(p[f"{prefix}_Wg"] @ x + p[f"{prefix}_Ug"] @ h + p[f"{prefix}_bg"])
    o = torch.sigmoid(p[f"{prefix}_Wo"] @ x + p[f"{prefix}_Uo"] @ h + p[f"{prefix}_bo"])
    c_new = f * c + i * g
    h_new = o * torch.tanh(c_new)
    return h_new, c_new


def _run_direction(model: Seq2SeqModel, prefix: str, inputs: list[torch.Tensor],
                   reverse: bool) -> list[torch.Tensor]:
    H = model.hidden_dim
    h = torch.zeros(H, dtype=torch.float64)
    c = torch.zeros(H, dtype=torch.float64)
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    states: dict[int, torch.Tensor] = {}
    for idx in order:
        h, c = _lstm_cell(model, prefix, inputs[idx], h, c)
        states[idx] = h
    return [states[i] for i in range(len(inputs))]


def encode(model: Seq2SeqModel, token_ids: Sequence[int]) -> torch.Tensor:
    """Top-layer hidden states h_i = [forward_i; backward_i], shape (n, 2H)."""
    if len(token_ids) == 0:
        raise QgenError("cannot encode an empty sequence")
    if len(token_ids) > MAX_SEQ_LEN:
        raise QgenError(f"sequence longer than {MAX_SEQ_LEN}")
    layer_in = [model.params["embed"][i] for i in token_ids]
    for layer in (0, 1):
        fw = _run_direction(model, f"enc_l{layer}_fw", layer_in, reverse=False)
        bw = _run_direction(model, f"enc_l{layer}_bw", layer_in, reverse=True)
        layer_in = [torch.cat([f, b]) for f, b in zip(fw, bw)]
    return torch.stack(layer_in)


def word_attention(model: Seq2SeqModel, states: torch.Tensor):
    """Word-level attention: returns (context vector s, weights alpha)."""
    p = model.params
    u = torch.tanh(states @ p["attn_Ww"].T + p["attn_bw"])
    alpha = torch.softmax(u @ p["attn_uw"], dim=0)
    s = alpha @ states
    return s, alpha


def general_attention(model: Seq2SeqModel, decoder_state: torch.Tensor,
                      states: torch.Tensor) -> torch.Tensor:
    """Bilinear attention weights a_t(i) = softmax_i(h_t^T W_a h_i)."""
    scores = states @ (model.params["attn_Wa"].T @ decoder_state)
    return torch.softmax(scores, dim=0)


def combined_context(attn_weights: torch.Tensor, word_weights: torch.Tensor,
                     states: torch.Tensor) -> torch.Tensor:
    """Elementwise max of the general and word-level attention contexts."""
    return torch.maximum(attn_weights @ states, word_weights @ states)


def apply_coverage(model: Seq2SeqModel, states: torch.Tensor,
                   coverage: torch.Tensor) -> torch.Tensor:
    """h_i <- tanh(h_i + w_c * c_t(i)) per source position."""
    if coverage.shape[0] != states.shape[0]:
        raise QgenError("coverage length must match source length")
    return torch.tanh(states + coverage[:, None] * model.params["cov_wc"])


@dataclass
class DecodeState:
    """Decoder recurrence state plus the coverage bookkeeping."""

    step: int
    hidden: list[torch.Tensor]
    cell: list[torch.Tensor]
    coverage: torch.Tensor
    emitted: list[int] = field(default_factory=list)
    attention_log: list[torch.Tensor] = field(default_factory=list)


def init_decode_state(model: Seq2SeqModel, source_len: int) -> DecodeState:
    H2 = 2 * model.hidden_dim
    zeros = lambda: torch.zeros(H2, dtype=torch.float64)
    return DecodeState(step=0, hidden=[zeros(), zeros()], cell=[zeros(), zeros()],
                       coverage=torch.zeros(source_len, dtype=torch.float64))


def decode_step(model: Seq2SeqModel, state: DecodeState, prev_token: int,
                states: torch.Tensor, word_weights: torch.Tensor):
    """One decoder step; returns (log token distribution, next state, a_t)."""
    p = model.params
    x = p["embed"][prev_token]
    hidden, cell = [], []
    layer_in = x
    for layer in (0, 1):
        h, c = _lstm_cell(model, f"dec_l{layer}", layer_in,
                          state.hidden[layer], state.cell[layer])
        hidden.append(h)
        cell.append(c)
        layer_in = h
    h_t = hidden[-1]

    adjusted = apply_coverage(model, states, state.coverage)
    a_t = general_attention(model, h_t, adjusted)
    s_t = a_t @ adjusted
    q_t = combined_context(a_t, word_weights, states)
    h_tilde = torch.tanh(p["out_Wx"] @ torch.cat([s_t, q_t]))
    log_probs = torch.log_softmax(p["out_W"] @ h_tilde + p["out_b"], dim=0)

    next_state = DecodeState(
        step=state.step + 1,
        hidden=hidden,
        cell=cell,
        coverage=state.coverage + a_t,   # keeps the graph: later steps see earlier attention
        emitted=state.emitted + [prev_token],
        attention_log=state.attention_log + [a_t.detach()],
    )
    return log_probs, next_state, a_t


def sequence_nll(model: Seq2SeqModel, source_ids: Sequence[int],
                 target_ids: Sequence[int]):
    """Teacher-forced NLL of target given source.

    Returns (total NLL tensor, per-token NLL list, argmax-match count); the
    target is consumed with EOS appended.
    """
    states = encode(model, source_ids)
    _, alpha = word_attention(model, states)
    decode = init_decode_state(model, len(source_ids))
    prev = BOS
    total = torch.zeros((), dtype=torch.float64)
    token_nlls: list[float] = []
    correct = 0
    for gold in list(target_ids) + [EOS]:
        log_probs, decode, _ = decode_step(model, decode, prev, states, alpha)
        nll = -log_probs[gold]
        total = total + nll
        token_nlls.append(float(nll.detach()))
        if int(torch.argmax(log_probs)) == gold:
            correct += 1
        prev = gold
    return total, token_nlls, correct


@dataclass(frozen=True)
class Hyperparams:
    optimizer: str = "adam"       # "adam" or "sgd"
    learning_rate: float = 0.01
    epochs: int = 20
    clip_norm: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    plateau_patience: int = 10    # sgd only: halve lr after this many stale epochs
    lr_floor: float = 1e-3
    min_count: int = 1
    words_per_answer: int = DEFAULT_WORDS_PER_ANSWER


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    perplexity: float
    accuracy: float


def word_mode_instances(corpus: TrainingCorpus, stopwords: frozenset[str],
                        words_per_answer: int = DEFAULT_WORDS_PER_ANSWER,
                        ) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """One instance per selected answer word: highest-TF non-stop-words first."""
    instances = []
    for answer, question in corpus.pairs:
        counts: dict[str, int] = {}
        for w in answer:
            if w not in stopwords:
                counts[w] = counts.get(w, 0) + 1
        ranked = sorted(counts, key=lambda w: (-counts[w], answer.index(w)))
        for w in ranked[:words_per_answer]:
            instances.append(((w,), question))
    return instances


def training_instances(corpus: TrainingCorpus, mode: str,
                       hyper: Hyperparams,
                       stopwords: frozenset[str] | None = None):
    if mode == "sentence":
        return list(corpus.pairs)
    if mode == "word":
        stops = stopwords if stopwords is not None else load_stopwords()
        instances = word_mode_instances(corpus, stops, hyper.words_per_answer)
        if not instances:
            raise QgenError("word mode found no usable (non-stop-word) answer tokens")
        return instances
    raise QgenError(f"unknown training mode: {mode!r}")


def corpus_loss(model: Seq2SeqModel, instances, vocab: Vocab) -> torch.Tensor:
    """Total teacher-forced NLL over encoded instances (used for grad checks)."""
    total = torch.zeros((), dtype=torch.float64)
    for answer, question in instances:
        nll, _, _ = sequence_nll(model, vocab.encode(answer), vocab.encode(question))
        total = total + nll
    return total


def _clip_gradients(model: Seq2SeqModel, max_norm: float) -> None:
    total = 0.0
    for p in model.params.values():
        if p.grad is not None:
            total += float((p.grad ** 2).sum())
    norm = math.sqrt(total)
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in model.params.values():
            if p.grad is not None:
                p.grad.mul_(scale)


def train(model: Seq2SeqModel, corpus: TrainingCorpus, mode: str = "sentence",
          hyper: Hyperparams = Hyperparams(),
          stopwords: frozenset[str] | None = None) -> list[EpochStats]:
    """Gradient-clipped Adam (default) or SGD with plateau lr halving.

    Instances are visited in a fixed order each epoch, so a (model seed,
    corpus, hyper) triple always produces the same losses.
    """
    if hyper.optimizer not in ("adam", "sgd"):
        raise QgenError(f"unknown optimizer: {hyper.optimizer!r}")
    instances = training_instances(corpus, mode, hyper, stopwords)
    lr = hyper.learning_rate
    adam_m = {n: torch.zeros_like(p) for n, p in model.params.items()}
    adam_v = {n: torch.zeros_like(p) for n, p in model.params.items()}
    step = 0
    best = math.inf
    stale = 0
    stats: list[EpochStats] = []
    for epoch in range(1, hyper.epochs + 1):
        nll_sum = 0.0
        token_count = 0
        correct = 0
        for answer, question in instances:
            model.zero_grad()
            nll, token_nlls, match = sequence_nll(
                model, model.vocab.encode(answer), model.vocab.encode(question))
            if not torch.isfinite(nll):
                raise QgenError(f"NaN loss at epoch {epoch} on instance {answer!r}")
            nll.backward()
            _clip_gradients(model, hyper.clip_norm)
            step += 1
            with torch.no_grad():
                if hyper.optimizer == "adam":
                    b1, b2 = hyper.adam_beta1, hyper.adam_beta2
                    for name, p in model.params.items():
                        if p.grad is None:
                            continue
                        adam_m[name].mul_(b1).add_(p.grad, alpha=1.0 - b1)
                        adam_v[name].mul_(b2).addcmul_(p.grad, p.grad, value=1.0 - b2)
                        m_hat = adam_m[name] / (1.0 - b1 ** step)
                        v_hat = adam_v[name] / (1.0 - b2 ** step)
                        p.addcdiv_(m_hat, v_hat.sqrt().add_(hyper.adam_eps), value=-lr)
                else:
                    for p in model.params.values():
                        if p.grad is not None:
                            p.add_(p.grad, alpha=-lr)
            nll_sum += float(nll.detach())
            token_count += len(token_nlls)
            correct += match
        mean_nll = nll_sum / token_count
        stats.append(EpochStats(epoch=epoch, loss=nll_sum,
                                perplexity=math.exp(mean_nll),
                                accuracy=correct / token_count))
        if nll_sum < best - 1e-6:
            best = nll_sum
            stale = 0
        else:
            stale += 1
            if hyper.optimizer == "sgd" and stale >= hyper.plateau_patience and lr > hyper.lr_floor:
                lr = max(lr / 2.0, hyper.lr_floor)
                stale = 0
    model.check_finite()
    return stats


def generate_question(model: Seq2SeqModel, input_tokens: Sequence[str],
                      max_len: int = DEFAULT_MAX_LEN) -> list[str]:
    """Greedy decode; emitted UNKs become the most-attended source token."""
    if not input_tokens:
        raise QgenError("generate_question needs at least one input token")
    source = [str(t) for t in input_tokens]
    with torch.no_grad():
        states = encode(model, model.vocab.encode(source))
        _, alpha = word_attention(model, states)
        decode = init_decode_state(model, len(source))
        prev = BOS
        words: list[str] = []
        for _ in range(max_len):
            log_probs, decode, a_t = decode_step(model, decode, prev, states, alpha)
            token = int(torch.argmax(log_probs))
            if token == EOS:
                break
            if token == UNK:
                words.append(source[int(torch.argmax(a_t))])
            else:
                words.append(model.vocab.word_of[token])
            prev = token
    return words


def score_for_eval(model: Seq2SeqModel, answer: Sequence[str], question: Sequence[str]):
    """(greedy prediction, per-token reference NLLs) for evaluation reports."""
    predicted = generate_question(model, answer)
    with torch.no_grad():
        _, token_nlls, _ = sequence_nll(
            model, model.vocab.encode(list(answer)), model.vocab.encode(list(question)))
    return predicted, token_nlls


CHECKPOINT_FORMAT = "qir-seq2seq"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: Seq2SeqModel, path: str | Path) -> None:
    """Single JSON document: versioned header, dims, vocab, base64 tensors."""
    tensors = {}
    for name, p in model.params.items():
        arr = p.detach().numpy().astype("<f8")
        tensors[name] = {
            "shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        }
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dims": {"embed": model.embed_dim, "hidden": model.hidden_dim},
        "vocab": model.vocab.word_of[len(RESERVED):],
        "tensors": tensors,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> Seq2SeqModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise QgenError(f"not a {CHECKPOINT_FORMAT} checkpoint: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise QgenError(f"unsupported checkpoint version {doc.get('version')}")
    vocab = Vocab(doc["vocab"])
    model = Seq2SeqModel(vocab, embed_dim=doc["dims"]["embed"],
                         hidden_dim=doc["dims"]["hidden"], seed=0)
    for name, spec in doc["tensors"].items():
        if name not in model.params:
            raise QgenError(f"unknown tensor in checkpoint: {name}")
        raw = base64.b64decode(spec["data"])
        arr = np.frombuffer(raw, dtype="<f8").reshape(spec["shape"]).copy()
        if tuple(arr.shape) != tuple(model.params[name].shape):
            raise QgenError(f"tensor {name} has shape {arr.shape}, "
                            f"expected {tuple(model.params[name].shape)}")
        model.params[name] = torch.tensor(arr, dtype=torch.float64, requires_grad=True)
    model.check_finite()
    return model
