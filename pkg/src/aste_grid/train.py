"""Model parameters, forward pass, gradients, Adam, training loop and checkpoints."""
from __future__ import annotations

import copy
import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .corpus import AnnotatedSentence, DatasetSplit, Sentence
from .embed import EmbeddingTable, compose_double, init_toy, load_pretrained, lookup
from .encoder import BiLstmParams, LstmCellParams, bilstm_encode
from .errors import CheckpointError, EmptySplit, ShapeMismatch
from .grid import decode_grid, encode_grid, triplet_metrics
from .pairscorer import (PairTensors, ScorerParams, grid_loss, inference_pass,
                         initial_scores, pair_repr, predict_grid)
from .textgraph import GnnStack, SageLayerParams, build_graph, gnn_encode

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "aste-grid-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    lr: float = 0.001
    dropout: float = 0.5
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 20
    seed: int = 0
    layers: int = 3
    aggregator: str = "lstm"
    hidden: int = 50
    d_node: int = 100
    h_g: int = 50
    toy_embed_dim: int = 32
    dtype: str = "float64"

    def __post_init__(self):
        if self.aggregator not in ("lstm", "mean"):
            raise ValueError(f"aggregator must be 'lstm' or 'mean', got {self.aggregator!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")
        for name in ("lr", "batch_size", "max_epochs", "layers", "hidden", "d_node", "h_g",
                     "toy_embed_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class ModelParams:
    bilstm: BiLstmParams
    gnn: GnnStack
    scorer: ScorerParams
    embed: EmbeddingTable | None = None   # trainable toy table
    frozen: EmbeddingTable | None = None  # pretrained, never updated
    sources: dict = field(default_factory=dict)  # pretrained file paths, for checkpoints

    @property
    def table(self):
        return self.embed if self.embed is not None else self.frozen

    def arrays(self):
        """Every trainable tensor by dotted name, in a fixed order."""
        out = {}
        if self.embed is not None:
            out["embed.matrix"] = self.embed.matrix
        for direction in ("forward", "backward"):
            for k, v in getattr(self.bilstm, direction).arrays().items():
                out[f"bilstm.{direction}.{k}"] = v
        for i, layer in enumerate(self.gnn.layers):
            out[f"gnn.{i}.W"] = layer.W
            out[f"gnn.{i}.b"] = layer.b
            if layer.lstm is not None:
                for k, v in layer.lstm.arrays().items():
                    out[f"gnn.{i}.lstm.{k}"] = v
        for k in ("W_s", "b_s", "W_g", "b_g", "W_p", "b_p"):
            out[f"scorer.{k}"] = getattr(self.scorer, k)
        return out

    def with_arrays(self, values):
        """Copy of the model whose trainable tensors are taken from ``values``."""
        def cell(prefix):
            return LstmCellParams(values[f"{prefix}.W"], values[f"{prefix}.U"], values[f"{prefix}.b"])

        bilstm = BiLstmParams(cell("bilstm.forward"), cell("bilstm.backward"))
        layers = []
        for i, layer in enumerate(self.gnn.layers):
            lstm = cell(f"gnn.{i}.lstm") if layer.lstm is not None else None
            layers.append(SageLayerParams(layer.aggregator, values[f"gnn.{i}.W"],
                                          values[f"gnn.{i}.b"], lstm))
        scorer = ScorerParams(*(values[f"scorer.{k}"]
                                for k in ("W_s", "b_s", "W_g", "b_g", "W_p", "b_p")))
        embed = None
        if self.embed is not None:
            embed = copy.copy(self.embed)
            embed.matrix = values["embed.matrix"]
        return ModelParams(bilstm, GnnStack(layers), scorer, embed, self.frozen, self.sources)

    def copy(self):
        return self.with_arrays({k: np.array(v, copy=True) for k, v in self.arrays().items()})

    def num_parameters(self):
        return int(sum(np.size(v) for v in self.arrays().values()))


def init_model(config, vocab=None, frozen=None, seed=None):
    """Fresh parameters: a toy table over ``vocab`` unless a frozen table is given."""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if frozen is None:
        embed = init_toy(vocab or [], config.toy_embed_dim, seed)
        d = embed.d
    else:
        embed = None
        d = frozen.d
    bilstm = BiLstmParams.init(d, config.hidden, rng)
    gnn = GnnStack.init(2 * config.hidden, config.d_node, config.layers, config.aggregator, rng)
    scorer = ScorerParams.init(config.d_node, config.h_g, rng)
    model = ModelParams(bilstm, gnn, scorer, embed, frozen)
    dtype = np.dtype(config.dtype)
    if dtype != np.float64:
        model = model.with_arrays({k: v.astype(dtype) for k, v in model.arrays().items()})
    return model


def zero_model(model):
    """Same architecture with every trainable tensor set to zero."""
    return model.with_arrays({k: np.zeros_like(v) for k, v in model.arrays().items()})


def _dropout(x, rate, rng):
    if rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep.astype(x.data.dtype)


def _forward(model, s, mode, rng, dropout):
    train = mode == "train"
    if train and rng is None:
        raise ValueError("train mode needs an rng for dropout and neighbor permutations")
    X = lookup(model.table, s.tokens, model.table.matrix)
    if train:
        X = _dropout(X, dropout, rng)
    H = bilstm_encode(model.bilstm, X)
    graph = build_graph(s.sentence, s.deps)
    Ht = gnn_encode(model.gnn, graph, H, rng if train else None)
    R = pair_repr(Ht)
    if train:
        R = _dropout(R, dropout, rng)
    Z = initial_scores(model.scorer, R)
    G, P, Rt = inference_pass(model.scorer, R, Z, return_refined=True)
    loss = grid_loss(P, encode_grid(s))
    pairs = PairTensors(s.n, R.data, Z.data, Rt.data, G.data, P.data)
    return pairs, loss


def forward(model, s, mode="eval", rng=None, dropout=0.5):
    """Run the full pipeline on one sentence; returns ``(PairTensors, loss)``."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    with ad.no_grad():
        pairs, loss = _forward(model, s, mode, rng, dropout)
    return pairs, float(loss.data)


def gradients(model, batch, rng=None, mode="train", dropout=0.5, return_loss=False):
    """Exact gradients of the mean per-sentence loss over ``batch``.

    Keys match :meth:`ModelParams.arrays`; frozen embeddings never appear.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    leaves = {k: ad.Tensor(v, requires_grad=True) for k, v in model.arrays().items()}
    tmodel = model.with_arrays(leaves)
    total = None
    losses = []
    for s in batch:
        _, loss = _forward(tmodel, s, mode, rng, dropout)
        losses.append(float(loss.data))
        total = loss if total is None else total + loss
    total = total * (1.0 / len(batch))
    total.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
             for k, t in leaves.items()}
    if return_loss:
        return grads, losses
    return grads


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(state, params, grads, lr=0.001):
    """Bias-corrected Adam update, applied in place; returns ``(state, params)``."""
    if set(params) != set(grads):
        raise ShapeMismatch("parameter and gradient names differ")
    for k, p in params.items():
        if np.shape(grads[k]) != np.shape(p):
            raise ShapeMismatch(f"{k}: gradient shape {np.shape(grads[k])} != {np.shape(p)}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state, params


def predict(model, s):
    with ad.no_grad():
        pairs, _ = _forward(model, s, "eval", None, 0.0)
    return decode_grid(predict_grid(pairs.P))


def _eval_pass(model, sentences):
    preds, losses = [], []
    with ad.no_grad():
        for s in sentences:
            pairs, loss = _forward(model, s, "eval", None, 0.0)
            preds.append(decode_grid(predict_grid(pairs.P)))
            losses.append(float(loss.data))
    metrics = triplet_metrics(preds, [sorted(s.triplets, key=lambda t: t.sort_key())
                                      for s in sentences])
    mean_loss = float(np.mean(losses)) if losses else 0.0
    return metrics, mean_loss, preds


def evaluate(model, sentences):
    """Exact-match triplet P/R/F1 of eval-mode predictions."""
    return _eval_pass(model, sentences)[0]


def build_vocab(sentences):
    return list(dict.fromkeys(tok for s in sentences for tok in s.tokens))


def train_loop(config, split, frozen=None, model=None, on_epoch=None):
    """Mini-batch Adam training with early stopping on validation F1.

    An epoch improves on the best so far when its validation F1 is higher,
    or equal with a lower validation loss.  Training stops once more than
    ``config.patience`` consecutive epochs fail to improve, or at
    ``config.max_epochs``.  Returns the best parameters and the per-epoch history.
    """
    if not split.train:
        raise EmptySplit("training split is empty")
    val = split.val
    if not val:
        log.warning("validation split is empty; selecting on the training split")
        val = split.train
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = init_model(config, vocab=build_vocab(split.train), frozen=frozen)
    params = model.arrays()
    state = AdamState()
    history = []
    best = None
    best_key = None
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(split.train))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [split.train[int(i)] for i in order[start:start + config.batch_size]]
            grads, losses = gradients(model, batch, rng, mode="train",
                                      dropout=config.dropout, return_loss=True)
            adam_step(state, params, grads, lr=config.lr)
            epoch_losses.extend(losses)
        metrics, val_loss, _ = _eval_pass(model, val)
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "val_loss": val_loss,
            "val_precision": metrics.precision,
            "val_recall": metrics.recall,
            "val_f1": metrics.f1,
        }
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        key = (metrics.f1, -val_loss)
        if best_key is None or key > best_key:
            best_key = key
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    return best, history


def gradcheck_model(config, vocab, seed=0):
    """Random model whose activations are O(1), for finite-difference checks.

    Training initialisation keeps activations near 1e-3, where ReLU inputs sit
    within a typical step of zero and many gradients fall below the roundoff
    floor of a central difference.  Weights here are N(0, 1.5^2 / fan_in),
    biases N(0, 0.5^2) and embeddings N(0, 1).
    """
    model = init_model(config, vocab=vocab, seed=seed)
    rng = np.random.default_rng(seed + 1)
    values = {}
    for k, v in model.arrays().items():
        if k == "embed.matrix":
            values[k] = rng.normal(0.0, 1.0, v.shape)
        elif v.ndim == 2:
            values[k] = rng.normal(0.0, 1.5 / np.sqrt(v.shape[1]), v.shape)
        else:
            values[k] = rng.normal(0.0, 0.5, v.shape)
    return model.with_arrays(values)


def _branch_loss(model, s):
    with ad.record_branches() as branches:
        loss = forward(model, s, "eval")[1]
    return loss, branches


def grad_check_report(model, s, eps=1e-4, sample_size=200, seed=0, analytic=None):
    """Compare analytic gradients with central differences on sampled coordinates.

    Every parameter group is visited at least once, the rest of the sample is
    uniform over all coordinates.  A coordinate whose two evaluations take
    different ReLU/max branches straddles a kink, where no derivative exists;
    it is skipped and another is drawn.  ``analytic`` overrides the computed
    gradients (used to test the checker itself).
    """
    if analytic is None:
        analytic = gradients(model, [s], mode="eval")
    params = model.arrays()
    rng = np.random.default_rng(seed)
    names = list(params)
    sizes = np.array([params[k].size for k in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def candidates():
        for k in rng.permutation(len(names)):
            yield names[k], int(rng.integers(sizes[k]))
        for f in rng.permutation(int(offsets[-1])):
            g = int(np.searchsorted(offsets, f, side="right") - 1)
            yield names[g], int(f - offsets[g])

    worst = 0.0
    per_group = {}
    seen = set()
    checked = skipped = 0
    for name, flat_idx in candidates():
        if checked >= sample_size:
            break
        if (name, flat_idx) in seen:
            continue
        seen.add((name, flat_idx))
        arr = params[name]
        idx = np.unravel_index(flat_idx, arr.shape)
        orig = arr[idx]
        try:
            arr[idx] = orig + eps
            up, up_branches = _branch_loss(model, s)
            arr[idx] = orig - eps
            down, down_branches = _branch_loss(model, s)
        finally:
            arr[idx] = orig
        if up_branches != down_branches:
            skipped += 1
            continue
        fd = (up - down) / (2 * eps)
        a = float(analytic[name][idx])
        err = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
        worst = max(worst, err)
        per_group[name] = max(per_group.get(name, 0.0), err)
        checked += 1
    return {"max_error": worst, "checked": checked, "skipped": skipped, "per_group": per_group}


def grad_check(model, s, eps=1e-4, sample_size=200, seed=0, analytic=None):
    """Max relative error ``|a - f| / max(|a|, |f|, 1e-8)`` over sampled coordinates."""
    return grad_check_report(model, s, eps, sample_size, seed, analytic)["max_error"]


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(path, model, config):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "aggregators": [layer.aggregator for layer in model.gnn.layers],
        "embedding": _embedding_doc(model),
        "params": {k: np.asarray(v, dtype=np.float64).tolist() for k, v in model.arrays().items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _embedding_doc(model):
    if model.embed is not None:
        words = sorted(model.embed.vocab, key=model.embed.vocab.get)
        return {"kind": "toy", "vocab": words}
    return {"kind": "pretrained", **model.sources}


def load_checkpoint(path):
    """Returns ``(model, config)``; rejects unknown formats and version mismatches."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format version {doc.get('format_version')!r}, "
            f"expected {CHECKPOINT_VERSION}")
    config = TrainConfig.from_dict(doc["config"])
    emb = doc["embedding"]
    if emb["kind"] == "toy":
        frozen = None
        vocab = emb["vocab"][1:]  # row 0 is the reserved unknown-word row
        sources = {}
    else:
        frozen, sources = load_embeddings(emb.get("general"), emb.get("domain"))
    template = init_model(config, vocab=vocab if frozen is None else None, frozen=frozen)
    template.sources = sources
    dtype = np.dtype(config.dtype)
    values = {}
    for k, ref in template.arrays().items():
        if k not in doc["params"]:
            raise CheckpointError(f"{path}: missing parameter {k}")
        arr = np.asarray(doc["params"][k], dtype=dtype)
        if arr.shape != ref.shape:
            raise CheckpointError(f"{path}: parameter {k} has shape {arr.shape}, expected {ref.shape}")
        values[k] = arr
    return template.with_arrays(values), config


def load_embeddings(general=None, domain=None, general_dim=300, domain_dim=100):
    """Frozen table from one or two text embedding files (double embeddings when both)."""
    tables = []
    sources = {}
    if general:
        tables.append(load_pretrained(general, general_dim))
        sources["general"] = str(general)
    if domain:
        tables.append(load_pretrained(domain, domain_dim))
        sources["domain"] = str(domain)
    if not tables:
        raise ValueError("no embedding file given")
    table = tables[0] if len(tables) == 1 else compose_double(*tables)
    return table, sources


def ablation(config, split, aggregators=("lstm", "mean"), layer_counts=(2, 3), frozen=None,
             on_row=None):
    """Train one model per (aggregator, layer count) and report test (or val) metrics."""
    rows = []
    target = split.test if split.test else split.val if split.val else split.train
    for agg in aggregators:
        for layers in layer_counts:
            cfg = TrainConfig.from_dict({**asdict(config), "aggregator": agg, "layers": layers})
            model, history = train_loop(cfg, split, frozen=frozen)
            m = evaluate(model, target)
            row = {"aggregator": agg, "layers": layers, "precision": m.precision,
                   "recall": m.recall, "f1": m.f1, "epochs": len(history)}
            rows.append(row)
            if on_row is not None:
                on_row(row, model, history)
    return rows


def format_ablation(rows):
    """Plain-text table: aggregator x layers x F1."""
    lines = ["Aggregator  Layers  P       R       F1",
             "----------  ------  ------  ------  ------"]
    for r in rows:
        lines.append(f"{r['aggregator'].upper():<10}  {r['layers']:>6}  "
                     f"{100 * r['precision']:6.2f}  {100 * r['recall']:6.2f}  {100 * r['f1']:6.2f}")
    return "\n".join(lines)


def toy_sentence():
    """Fixed five-token sentence used by the gradient check command."""
    from .corpus import DependencyArc, Span, Triplet
    return AnnotatedSentence(
        Sentence(["the", "fruit", "salad", "was", "delicious"]),
        [DependencyArc(4, 2, "nsubj"), DependencyArc(2, 1, "compound"), DependencyArc(2, 0, "det")],
        [Triplet(Span(1, 2), Span(4, 4), "POS")],
    )


__all__ = [
    "TrainConfig", "ModelParams", "AdamState", "DatasetSplit", "init_model", "zero_model",
    "forward", "gradients", "adam_step", "train_loop", "evaluate", "predict", "grad_check",
    "grad_check_report", "gradcheck_model",
    "save_checkpoint", "load_checkpoint", "load_embeddings", "ablation", "format_ablation",
    "toy_sentence", "build_vocab",
]
