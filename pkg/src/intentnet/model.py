"""The full classifier: assembly, training loop, evaluation, persistence.

One utterance flows embedding -> {bidirectional recurrence, width-3
convolution + max-over-time pooling} -> concatenation -> dropout -> dense
softmax head. Both subnetworks read the same embedding table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import container, layers, optim
from .data import LABELS, Utterance, Vocab, build_vocab, encode
from .errors import CorpusError, NumericError
from .tensor import Rng, softmax, uniform_init

# Named sub-streams of the training seed.
_STREAM_INIT = 1
_STREAM_DROPOUT = 2
_STREAM_SHUFFLE_BASE = 1000


@dataclass
class TrainConfig:
    """Training hyperparameters. The convolution width is fixed at 3."""

    batch_size: int = 10
    hidden: int = 50           # recurrent units per direction
    filters: int = 50          # convolution feature maps
    embed_dim: int = 64
    max_len: int = 30
    lr: float = 0.001
    dropout: float = 0.5
    seed: int = 0
    max_epochs: int = 100
    plateau_patience: int = 3
    stop_patience: int = 8
    lr_factor: float = 0.1
    min_lr: float = 1e-6
    min_count: int = 1
    clip_norm: float = 5.0

    def validate(self) -> None:
        positive = ("batch_size", "hidden", "filters", "embed_dim", "max_len",
                    "lr", "max_epochs", "plateau_patience", "stop_patience",
                    "min_count")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def cross_entropy(probs: np.ndarray, gold: int) -> tuple[float, np.ndarray]:
    """Negative log-likelihood and the fused softmax gradient (probs - onehot)."""
    if not 0 <= gold < probs.shape[0]:
        raise ValueError(f"gold class {gold} out of range")
    loss = -math.log(float(probs[gold]))
    d_logits = probs.copy()
    d_logits[gold] -= 1.0
    return loss, d_logits


class HybridModel:
    """Embedding + bidirectional recurrence + convolution + dense head."""

    def __init__(self, vocab: Vocab, labels: Sequence[str], embed_dim: int,
                 hidden: int, filters: int, max_len: int, rng: Rng,
                 dropout_rate: float = 0.5, dtype=np.float32):
        self.vocab = vocab
        self.labels = list(labels)
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}
        self.embed_dim = embed_dim
        self.hidden = hidden
        self.filters = filters
        self.max_len = max_len
        self.dropout_rate = dropout_rate
        self.dtype = dtype

        limit = layers.glorot_limit(len(vocab), embed_dim)
        self.embedding = uniform_init(rng, (len(vocab), embed_dim), limit, dtype)
        self.embedding[0] = 0  # PAD row stays zero
        self.fwd = layers.init_lstm_params(rng, embed_dim, hidden, dtype)
        self.bwd = layers.init_lstm_params(rng, embed_dim, hidden, dtype)
        self.conv = layers.init_conv_params(rng, embed_dim, filters, dtype)
        fused_dim = 2 * hidden + filters
        self.dense = layers.init_dense_params(rng, fused_dim, len(self.labels), dtype)

    @property
    def num_classes(self) -> int:
        return len(self.labels)

    def parameters(self) -> dict[str, np.ndarray]:
        params = {"embedding": self.embedding}
        for prefix, block in (("fwd", self.fwd), ("bwd", self.bwd),
                              ("conv", self.conv), ("out", self.dense)):
            for name, arr in block.blocks().items():
                params[f"{prefix}.{name}"] = arr
        return params

    def set_parameters(self, values: Mapping[str, np.ndarray]) -> None:
        own = self.parameters()
        if set(values) != set(own):
            raise ValueError("parameter names do not match this model")
        for name, arr in own.items():
            arr[...] = values[name]

    def forward(self, indices: Sequence[int], true_len: int, training: bool = False,
                rng: Rng | None = None):
        """Class probabilities plus the caches the backward pass consumes."""
        X = layers.embedding_forward(list(indices)[:true_len], self.embedding)
        h_fwd, h_bwd, bi_cache = layers.bilstm_forward(X, true_len, self.fwd, self.bwd)
        fmap, conv_cache = layers.conv_forward(X, self.conv, true_len)
        pooled, argmax = layers.maxpool_over_time(fmap)
        fused = np.concatenate([h_fwd, h_bwd, pooled])
        dropped, mask = layers.dropout(fused, self.dropout_rate, training, rng)
        logits = layers.dense_forward(dropped, self.dense)
        probs = softmax(logits)
        caches = (bi_cache, conv_cache, argmax, dropped, mask, true_len,
                  list(indices)[:true_len])
        return probs, caches

    def _backward(self, caches, d_logits, grads: dict[str, np.ndarray]) -> None:
        bi_cache, conv_cache, argmax, dropped, mask, true_len, used = caches
        dense_grads = {"weight": grads["out.weight"], "bias": grads["out.bias"]}
        d_dropped = layers.dense_backward(dropped, self.dense, d_logits, dense_grads)
        d_fused = layers.dropout_backward(d_dropped, mask)
        d_h_fwd = d_fused[:self.hidden]
        d_h_bwd = d_fused[self.hidden:2 * self.hidden]
        d_pooled = d_fused[2 * self.hidden:]
        d_fmap = layers.maxpool_backward(argmax, d_pooled, true_len - 2)
        conv_grads = {"filters": grads["conv.filters"], "bias": grads["conv.bias"]}
        dX = layers.conv_backward(conv_cache, d_fmap, conv_grads)
        grads_fwd = {name: grads[f"fwd.{name}"] for name in self.fwd.blocks()}
        grads_bwd = {name: grads[f"bwd.{name}"] for name in self.bwd.blocks()}
        dX += layers.bilstm_backward(bi_cache, d_h_fwd, d_h_bwd, grads_fwd, grads_bwd)
        layers.embedding_backward(used, dX, grads["embedding"])

    def loss(self, sample) -> float:
        indices, true_len, gold = sample
        probs, _ = self.forward(indices, true_len, training=False)
        return cross_entropy(probs, gold)[0]

    def loss_and_gradients(self, sample, training: bool = False, rng: Rng | None = None):
        """Loss and full parameter gradients for one encoded sample."""
        indices, true_len, gold = sample
        probs, caches = self.forward(indices, true_len, training=training, rng=rng)
        loss, d_logits = cross_entropy(probs, gold)
        grads = {name: np.zeros_like(arr) for name, arr in self.parameters().items()}
        self._backward(caches, d_logits, grads)
        return loss, grads

    def predict(self, text: str):
        """Top label (lowest index on ties) and the full probability vector."""
        indices, true_len = encode(text, self.vocab, self.max_len)
        probs, _ = self.forward(indices, true_len, training=False)
        return self.labels[int(np.argmax(probs))], probs

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        header = {
            "format_version": container.FORMAT_VERSION,
            "kind": "hybrid",
            "embed_dim": self.embed_dim,
            "hidden": self.hidden,
            "filters": self.filters,
            "num_classes": self.num_classes,
            "vocab_size": len(self.vocab),
            "max_len": self.max_len,
            "dropout": self.dropout_rate,
            "labels": self.labels,
            "vocab": self.vocab.tokens,
        }
        container.write_container(path, header, self.parameters())

    @classmethod
    def load(cls, path) -> "HybridModel":
        header, blocks = container.read_container(path)
        if header.get("kind") != "hybrid":
            raise CorpusError(f"{path}: expected a hybrid model, found {header.get('kind')!r}")
        model = cls(
            vocab=Vocab(header["vocab"]),
            labels=header["labels"],
            embed_dim=header["embed_dim"],
            hidden=header["hidden"],
            filters=header["filters"],
            max_len=header["max_len"],
            rng=Rng(0),
            dropout_rate=header.get("dropout", 0.5),
            dtype=np.float32,
        )
        model.set_parameters(blocks)
        return model


# ---------------------------------------------------------------------------
# training

def encode_dataset(records: Sequence[Utterance], vocab: Vocab, max_len: int,
                   label_index: Mapping[str, int]):
    samples = []
    for utt in records:
        if utt.label not in label_index:
            raise CorpusError(f"label {utt.label!r} absent from the training label set")
        indices, true_len = encode(utt.text, vocab, max_len)
        samples.append((indices, true_len, label_index[utt.label]))
    return samples


def _canonical(records: Sequence[Utterance]) -> list[Utterance]:
    # fixed ordering so shuffling depends only on (seed, epoch), not file order
    return sorted(records, key=lambda u: (u.id, u.label, u.text))


def train(config: TrainConfig, corpus: Mapping[str, Sequence[Utterance]],
          log: Callable[[optim.EpochRecord], None] | None = None):
    """Train a fresh model; returns (best-validation model, history)."""
    config.validate()
    train_records = _canonical(corpus.get("train", []))
    dev_records = _canonical(corpus.get("dev", []))
    if not train_records:
        raise CorpusError("training split is empty")
    if not dev_records:
        raise CorpusError("validation split is empty")

    vocab = build_vocab(train_records, min_count=config.min_count)
    labels = sorted({utt.label for utt in train_records})
    root = Rng(config.seed)
    model = HybridModel(vocab, labels, config.embed_dim, config.hidden,
                        config.filters, config.max_len, rng=root.spawn(_STREAM_INIT),
                        dropout_rate=config.dropout)
    train_set = encode_dataset(train_records, vocab, config.max_len, model.label_index)
    dev_set = encode_dataset(dev_records, vocab, config.max_len, model.label_index)

    params = model.parameters()
    state = optim.AdamState(params)
    dropout_rng = root.spawn(_STREAM_DROPOUT)
    history: list[optim.EpochRecord] = []
    lr = config.lr
    best_f1 = -float("inf")
    best_params = {name: arr.copy() for name, arr in params.items()}

    for epoch in range(1, config.max_epochs + 1):
        order = root.spawn(_STREAM_SHUFFLE_BASE + epoch).permutation(len(train_set))
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            grads = {name: np.zeros_like(arr) for name, arr in params.items()}
            for sample_idx in batch:
                sample = train_set[sample_idx]
                loss, sample_grads = model.loss_and_gradients(
                    sample, training=True, rng=dropout_rng)
                if not math.isfinite(loss):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, sample {int(sample_idx)}")
                loss_sum += loss
                for name in grads:
                    grads[name] += sample_grads[name]
            for name in grads:
                grads[name] /= len(batch)
            optim.clip_by_global_norm(grads, config.clip_norm)
            optim.adam_step(params, grads, state, lr)

        val_loss, val_f1 = _validate(model, dev_set)
        record = optim.EpochRecord(epoch=epoch, train_loss=loss_sum / len(train_set),
                                   val_loss=val_loss, val_f1=val_f1, lr=lr)
        history.append(record)
        if log is not None:
            log(record)
        if val_f1 > best_f1 + optim.MIN_DELTA:
            best_f1 = val_f1
            best_params = {name: arr.copy() for name, arr in params.items()}
        lr = optim.reduce_lr_on_plateau(history, factor=config.lr_factor,
                                        patience=config.plateau_patience,
                                        min_lr=config.min_lr)
        if optim.should_stop(history, patience=config.stop_patience):
            break

    model.set_parameters(best_params)
    return model, history


def _validate(model: HybridModel, dev_set) -> tuple[float, float]:
    loss_sum = 0.0
    correct = 0
    for indices, true_len, gold in dev_set:
        probs, _ = model.forward(indices, true_len, training=False)
        loss_sum += cross_entropy(probs, gold)[0]
        if int(np.argmax(probs)) == gold:
            correct += 1
    return loss_sum / len(dev_set), correct / len(dev_set)


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class EvalReport:
    """Per-class precision/recall/F1 plus micro/macro summaries."""

    labels: list[str]
    confusion: np.ndarray           # rows: gold, columns: predicted
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    micro_f1: float
    macro_f1: float

    def to_dict(self) -> dict:
        per_class = {
            label: {
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "f1": float(self.f1[i]),
                "support": int(self.support[i]),
            }
            for i, label in enumerate(self.labels)
        }
        return {
            "labels": self.labels,
            "per_class": per_class,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.tolist(),
        }


def report_from_pairs(gold: Sequence[int], predicted: Sequence[int],
                      labels: Sequence[str]) -> EvalReport:
    """Build the evaluation report from (gold, predicted) index pairs."""
    n_classes = len(labels)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for g, p in zip(gold, predicted):
        confusion[g, p] += 1
    tp = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1)
    predicted_counts = confusion.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted_counts > 0, tp / predicted_counts, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    micro = float(tp.sum() / confusion.sum()) if confusion.sum() else 0.0
    return EvalReport(
        labels=list(labels),
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        micro_f1=micro,
        macro_f1=float(f1.mean()) if n_classes else 0.0,
    )


def evaluate(model: HybridModel, records: Sequence[Utterance]) -> EvalReport:
    if not records:
        raise CorpusError("cannot evaluate an empty split")
    unknown = {utt.label for utt in records} - set(model.labels)
    if unknown:
        raise CorpusError(f"labels absent from the model: {sorted(unknown)}")
    gold = []
    predicted = []
    for utt in records:
        indices, true_len = encode(utt.text, model.vocab, model.max_len)
        probs, _ = model.forward(indices, true_len, training=False)
        gold.append(model.label_index[utt.label])
        predicted.append(int(np.argmax(probs)))
    return report_from_pairs(gold, predicted, model.labels)


# ---------------------------------------------------------------------------
# down-scaled assembly for gradient checking

def down_scaled_model(seed: int, vocab_size: int = 9, num_classes: int = 4,
                      embed_dim: int = 4, hidden: int = 3, filters: int = 2,
                      max_len: int = 5) -> HybridModel:
    """Small float64 model with dropout off, for finite-difference checks."""
    tokens = ["<pad>", "<unk>"] + [chr(ord("a") + i) for i in range(vocab_size - 2)]
    model = HybridModel(Vocab(tokens), list(LABELS[:num_classes]), embed_dim,
                        hidden, filters, max_len, rng=Rng(seed).spawn(_STREAM_INIT),
                        dropout_rate=0.0, dtype=np.float64)
    return model


def random_check_sample(seed: int, model: HybridModel, seq_len: int = 5):
    rng = Rng(seed).spawn(77)
    indices = [2 + rng.integer(len(model.vocab) - 2) for _ in range(seq_len)]
    gold = rng.integer(model.num_classes)
    return indices, seq_len, gold
