"""A small transformer predictor written directly in numpy.

The network reads a level input (token IDs plus head positions) and emits two
distributions per position.  Expansion logits are read off the residual
stream after ``exp_layer`` blocks; the chosen expansion (gold during
training) is embedded and added back into that stream, so the terminal
logits of the final block are conditioned on it.  Attention is
bidirectional; only batch padding is hidden from the keys.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .leveler import LevelTransition
from .treebank import ROOT, SchemaMismatch
from .vocab import PAD, SymbolTable

log = logging.getLogger(__name__)

CKPT_FORMAT = "itexp-ckpt"
CKPT_VERSION = 1
_GELU_K = math.sqrt(2.0 / math.pi)


class SequenceTooLong(ValueError):
    pass


class Divergence(RuntimeError):
    pass


@dataclass
class ModelConfig:
    vocab_tokens: int
    vocab_exps: int
    num_layers: int = 2
    num_heads: int = 2
    embed_size: int = 32
    ff_size: int = 64
    exp_layer: int | None = None
    max_len: int = 128
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 0.02

    def __post_init__(self):
        if self.exp_layer is None:
            self.exp_layer = max(1, self.num_layers // 2)
        if self.embed_size % self.num_heads:
            raise ValueError("embed_size must be divisible by num_heads")
        if not 1 <= self.exp_layer < self.num_layers:
            raise ValueError("exp_layer must satisfy 1 <= exp_layer < num_layers")


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.embed_size, cfg.ff_size
    shapes = {
        "tok_emb": (cfg.vocab_tokens, d),
        "pos_emb": (cfg.max_len, d),
        "head_emb": (cfg.max_len + 1, d),
        "exp_emb": (cfg.vocab_exps, d),
    }
    for l in range(cfg.num_layers):
        p = f"layer{l}."
        shapes.update({
            p + "ln1_g": (d,), p + "ln1_b": (d,),
            p + "wq": (d, d), p + "bq": (d,), p + "wk": (d, d),
            p + "wv": (d, d), p + "bv": (d,), p + "wo": (d, d), p + "bo": (d,),
            p + "ln2_g": (d,), p + "ln2_b": (d,),
            p + "w1": (d, f), p + "b1": (f,), p + "w2": (f, d), p + "b2": (d,),
        })
    shapes.update({
        "exp_ln_g": (d,), "exp_ln_b": (d,), "exp_w": (d, cfg.vocab_exps), "exp_b": (cfg.vocab_exps,),
        "out_ln_g": (d,), "out_ln_b": (d,), "out_w": (d, cfg.vocab_tokens), "out_b": (cfg.vocab_tokens,),
    })
    return shapes


def init_params(cfg: ModelConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        short = name.rsplit(".", 1)[-1]
        if short.endswith("_g"):
            arr = np.ones(shape)
        elif len(shape) == 1:
            arr = np.zeros(shape)
        else:
            arr = rng.normal(0.0, cfg.init_scale, shape)
        params[name] = arr.astype(dtype)
    return params


# -- building blocks ----------------------------------------------------

def _ln_fwd(x, g, b, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + eps)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd, g)


def _ln_bwd(dy, cache):
    xhat, rstd, g = cache
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(0)
    db = dy.reshape(-1, xhat.shape[-1]).sum(0)
    dxhat = dy * g
    dx = rstd * (dxhat - dxhat.mean(-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    return dx, dg, db


def _gelu_fwd(x):
    u = _GELU_K * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def _gelu_bwd(dy, cache):
    x, t = cache
    du = _GELU_K * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def _softmax(z, axis=-1):
    m = np.max(z, axis=axis, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=axis, keepdims=True)


def _lin_bwd(dy, x, w):
    """Gradients of y = x @ w + b with respect to x, w and b."""
    d_in, d_out = w.shape
    dw = x.reshape(-1, d_in).T @ dy.reshape(-1, d_out)
    db = dy.reshape(-1, d_out).sum(0)
    return dy @ w.T, dw, db


@dataclass
class Batch:
    tokens: np.ndarray       # (B, S) token IDs, 0 beyond each length
    heads: np.ndarray        # (B, S) head-embedding rows: 0 root, h+1 otherwise
    valid: np.ndarray        # (B, S) bool, False for batch padding
    o_tok: np.ndarray | None = None
    o_exp: np.ndarray | None = None


def encode_batch(transitions: Sequence[LevelTransition], table: SymbolTable,
                 max_len: int | None = None) -> Batch:
    S = max(len(t) for t in transitions)
    if max_len is not None and S > max_len:
        raise SequenceTooLong(f"sequence of length {S} exceeds max_len {max_len}")
    B = len(transitions)
    tokens = np.zeros((B, S), dtype=np.int64)
    heads = np.zeros((B, S), dtype=np.int64)
    valid = np.zeros((B, S), dtype=bool)
    o_tok = np.zeros((B, S), dtype=np.int64)
    o_exp = np.zeros((B, S), dtype=np.int64)
    for b, t in enumerate(transitions):
        n = len(t)
        tokens[b, :n] = [table.token_id(s) for s in t.i_tok]
        heads[b, :n] = [0 if h == ROOT else h + 1 for h in t.heads]
        valid[b, :n] = True
        o_tok[b, :n] = [0 if s == PAD else table.token_id(s) for s in t.o_tok]
        o_exp[b, :n] = [0 if s == PAD else table.expansion_id(s) for s in t.o_exp]
    return Batch(tokens, heads, valid, o_tok, o_exp)


def encode_input(i_tok: Sequence[str], heads: Sequence[int], table: SymbolTable,
                 max_len: int | None = None) -> Batch:
    if max_len is not None and len(i_tok) > max_len:
        raise SequenceTooLong(f"sequence of length {len(i_tok)} exceeds max_len {max_len}")
    tokens = np.array([[table.token_id(s) for s in i_tok]], dtype=np.int64)
    hs = np.array([[0 if h == ROOT else h + 1 for h in heads]], dtype=np.int64)
    return Batch(tokens, hs, np.ones_like(tokens, dtype=bool))


class TransformerLM:
    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray] | None = None,
                 placeholder_ids: Sequence[int] = (), dtype=np.float32):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, dtype)
        self.placeholder_ids = np.asarray(sorted(placeholder_ids), dtype=np.int64)
        self.is_placeholder = np.zeros(cfg.vocab_tokens, dtype=bool)
        self.is_placeholder[self.placeholder_ids] = True

    @property
    def dtype(self):
        return self.params["tok_emb"].dtype

    # -- forward ---------------------------------------------------------
    def _block_fwd(self, x, l, key_bias):
        P = self.params
        p = f"layer{l}."
        B, S, d = x.shape
        H = self.cfg.num_heads
        dh = d // H
        a, ln1 = _ln_fwd(x, P[p + "ln1_g"], P[p + "ln1_b"])
        q = (a @ P[p + "wq"] + P[p + "bq"]).reshape(B, S, H, dh).transpose(0, 2, 1, 3)
        k = (a @ P[p + "wk"]).reshape(B, S, H, dh).transpose(0, 2, 1, 3)
        v = (a @ P[p + "wv"] + P[p + "bv"]).reshape(B, S, H, dh).transpose(0, 2, 1, 3)
        scores = q @ k.transpose(0, 1, 3, 2) / math.sqrt(dh) + key_bias
        att = _softmax(scores)
        ctx = (att @ v).transpose(0, 2, 1, 3).reshape(B, S, d)
        x1 = x + ctx @ P[p + "wo"] + P[p + "bo"]
        c, ln2 = _ln_fwd(x1, P[p + "ln2_g"], P[p + "ln2_b"])
        hpre = c @ P[p + "w1"] + P[p + "b1"]
        h, gel = _gelu_fwd(hpre)
        x2 = x1 + h @ P[p + "w2"] + P[p + "b2"]
        return x2, (a, ln1, q, k, v, att, ctx, c, ln2, h, gel)

    def forward(self, batch: Batch, exp_ids: np.ndarray | None = None, keep: bool = False):
        """Token and expansion logits, shapes (B, S, V_tok) and (B, S, V_exp).

        ``exp_ids`` are the expansions fed back into the stream; when absent
        the arg-max expansion is used at placeholder positions and ``[pad]``
        elsewhere.
        """
        P = self.params
        cfg = self.cfg
        B, S = batch.tokens.shape
        if S > cfg.max_len:
            raise SequenceTooLong(f"sequence of length {S} exceeds max_len {cfg.max_len}")
        key_bias = np.where(batch.valid, 0.0, -1e9).astype(self.dtype)[:, None, None, :]
        x = P["tok_emb"][batch.tokens] + P["pos_emb"][:S][None] + P["head_emb"][batch.heads]
        caches = []
        exp_logits = None
        e_cache = None
        for l in range(cfg.num_layers):
            if l == cfg.exp_layer:
                e_in, e_ln = _ln_fwd(x, P["exp_ln_g"], P["exp_ln_b"])
                exp_logits = e_in @ P["exp_w"] + P["exp_b"]
                if exp_ids is None:
                    exp_ids = self.choose_expansions(batch, exp_logits)
                x = x + P["exp_emb"][exp_ids]
                e_cache = (e_in, e_ln, exp_ids)
            x, cache = self._block_fwd(x, l, key_bias)
            caches.append(cache)
        f_in, f_ln = _ln_fwd(x, P["out_ln_g"], P["out_ln_b"])
        tok_logits = f_in @ P["out_w"] + P["out_b"]
        tok_logits[..., self.is_placeholder] = -np.inf
        if keep:
            self._cache = (batch, caches, e_cache, f_in, f_ln)
        return tok_logits, exp_logits

    def choose_expansions(self, batch: Batch, exp_logits: np.ndarray) -> np.ndarray:
        scores = exp_logits.copy()
        scores[..., :2] = -np.inf  # [pad], [OOV]
        ids = scores.argmax(-1)
        ids[~self.is_placeholder[batch.tokens]] = 0
        return ids

    # -- backward --------------------------------------------------------
    def _block_bwd(self, dx2, l, cache, grads):
        P = self.params
        p = f"layer{l}."
        a, ln1, q, k, v, att, ctx, c, ln2, h, gel = cache
        B, H, S, dh = q.shape
        d = H * dh
        # feed-forward
        dh_, gw2, gb2 = _lin_bwd(dx2, h, P[p + "w2"])
        dhpre = _gelu_bwd(dh_, gel)
        dc, gw1, gb1 = _lin_bwd(dhpre, c, P[p + "w1"])
        dx1_ln, g2g, g2b = _ln_bwd(dc, ln2)
        dx1 = dx2 + dx1_ln
        # attention
        dctx, gwo, gbo = _lin_bwd(dx1, ctx, P[p + "wo"])
        dctx = dctx.reshape(B, S, H, dh).transpose(0, 2, 1, 3)
        datt = dctx @ v.transpose(0, 1, 3, 2)
        dv = att.transpose(0, 1, 3, 2) @ dctx
        dscores = att * (datt - (datt * att).sum(-1, keepdims=True)) / math.sqrt(dh)
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q

        def merge(t):
            return t.transpose(0, 2, 1, 3).reshape(B, S, d)

        da = np.zeros_like(a)
        for name, dt in (("q", dq), ("k", dk), ("v", dv)):
            dpart, gw, gb = _lin_bwd(merge(dt), a, P[p + "w" + name])
            da += dpart
            grads[p + "w" + name] = gw
            if name != "k":  # a key bias shifts every score of a query equally
                grads[p + "b" + name] = gb
        dx_ln, g1g, g1b = _ln_bwd(da, ln1)
        grads.update({p + "w2": gw2, p + "b2": gb2, p + "w1": gw1, p + "b1": gb1,
                      p + "ln2_g": g2g, p + "ln2_b": g2b, p + "wo": gwo, p + "bo": gbo,
                      p + "ln1_g": g1g, p + "ln1_b": g1b})
        return dx1 + dx_ln

    def backward(self, d_tok: np.ndarray, d_exp: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients for upstream gradients on the two logit arrays."""
        P = self.params
        batch, caches, e_cache, f_in, f_ln = self._cache
        grads: dict[str, np.ndarray] = {}
        d_tok = np.where(self.is_placeholder, 0.0, d_tok).astype(self.dtype)
        df, grads["out_w"], grads["out_b"] = _lin_bwd(d_tok, f_in, P["out_w"])
        dx, grads["out_ln_g"], grads["out_ln_b"] = _ln_bwd(df, f_ln)
        for l in reversed(range(self.cfg.num_layers)):
            dx = self._block_bwd(dx, l, caches[l], grads)
            if l == self.cfg.exp_layer:
                e_in, e_ln, exp_ids = e_cache
                g = np.zeros_like(P["exp_emb"])
                np.add.at(g, exp_ids.ravel(), dx.reshape(-1, dx.shape[-1]))
                grads["exp_emb"] = g
                de, grads["exp_w"], grads["exp_b"] = _lin_bwd(d_exp, e_in, P["exp_w"])
                dxe, grads["exp_ln_g"], grads["exp_ln_b"] = _ln_bwd(de, e_ln)
                dx = dx + dxe
        d = dx.shape[-1]
        flat = dx.reshape(-1, d)
        g = np.zeros_like(P["tok_emb"])
        np.add.at(g, batch.tokens.ravel(), flat)
        grads["tok_emb"] = g
        g = np.zeros_like(P["head_emb"])
        np.add.at(g, batch.heads.ravel(), flat)
        grads["head_emb"] = g
        g = np.zeros_like(P["pos_emb"])
        g[:dx.shape[1]] = dx.sum(0)
        grads["pos_emb"] = g
        return grads


# -- loss ----------------------------------------------------------------

def _xent(logits, targets):
    """Mean cross-entropy over targets != 0 and its gradient on the logits."""
    mask = targets != 0
    n = int(mask.sum())
    grad = np.zeros_like(logits)
    if n == 0:
        return 0.0, grad, 0, 0
    z = logits[mask]
    zmax = np.max(z, axis=-1, keepdims=True)
    ez = np.exp(z - zmax)
    s = ez.sum(-1, keepdims=True)
    logp_t = (z[np.arange(n), targets[mask]] - zmax[:, 0]) - np.log(s[:, 0])
    prob = ez / s
    correct = int((z.argmax(-1) == targets[mask]).sum())
    prob[np.arange(n), targets[mask]] -= 1.0
    grad[mask] = prob / n
    return float(-logp_t.mean()), grad, correct, n


def loss(tok_logits, exp_logits, o_tok, o_exp) -> float:
    """Token cross-entropy plus expansion cross-entropy, [pad] targets ignored."""
    lt, *_ = _xent(tok_logits, o_tok)
    le, *_ = _xent(exp_logits, o_exp)
    if not (o_tok != 0).any() and not (o_exp != 0).any():
        log.warning("loss over an all-[pad] batch is defined as 0")
    return lt + le


def loss_and_grads(model: TransformerLM, batch: Batch):
    tok_logits, exp_logits = model.forward(batch, exp_ids=batch.o_exp, keep=True)
    lt, gt, ct, nt = _xent(tok_logits, batch.o_tok)
    le, ge, ce, ne = _xent(exp_logits, batch.o_exp)
    grads = model.backward(gt, ge)
    return lt + le, grads, {"tok_correct": ct, "tok_total": nt, "exp_correct": ce, "exp_total": ne}


# -- training -------------------------------------------------------------

@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    table: SymbolTable | None = None
    history: list[float] = field(default_factory=list)

    def model(self, dtype=np.float32) -> TransformerLM:
        ph = self.table.placeholder_ids if self.table is not None else ()
        return TransformerLM(self.config, {k: v.astype(dtype) for k, v in self.params.items()},
                             ph)


class Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            params[k] -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


def evaluate(model: TransformerLM, transitions: Sequence[LevelTransition], table: SymbolTable,
             batch_size: int = 64) -> dict:
    """Teacher-forced loss and accuracies over a transition set."""
    tot = {"tok_correct": 0, "tok_total": 0, "exp_correct": 0, "exp_total": 0}
    lsum = 0.0
    nb = 0
    for s in range(0, len(transitions), batch_size):
        batch = encode_batch(transitions[s:s + batch_size], table, model.cfg.max_len)
        tok_logits, exp_logits = model.forward(batch, exp_ids=batch.o_exp)
        lt, _, ct, nt = _xent(tok_logits, batch.o_tok)
        le, _, ce, ne = _xent(exp_logits, batch.o_exp)
        lsum += lt + le
        nb += 1
        for k, v in zip(tot, (ct, nt, ce, ne)):
            tot[k] += v
    return {"loss": lsum / max(nb, 1),
            "token_accuracy": tot["tok_correct"] / max(tot["tok_total"], 1),
            "exp_accuracy": tot["exp_correct"] / max(tot["exp_total"], 1), **tot}


def train(transitions: Sequence[LevelTransition], table: SymbolTable, cfg: ModelConfig,
          epochs: int, dtype=np.float32, callback=None) -> Checkpoint:
    """Adam on the summed cross-entropies with gold expansions fed back."""
    transitions = list(transitions)
    if not transitions:
        raise ValueError("no transitions to train on")
    model = TransformerLM(cfg, init_params(cfg, dtype), table.placeholder_ids)
    opt = Adam(model.params, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    # bucket by length so batches carry little padding
    order = sorted(range(len(transitions)), key=lambda i: len(transitions[i]))
    chunks = [order[s:s + cfg.batch_size] for s in range(0, len(order), cfg.batch_size)]
    batches = [encode_batch([transitions[i] for i in c], table, cfg.max_len) for c in chunks]
    history = []
    for epoch in range(epochs):
        total = 0.0
        for b in rng.permutation(len(batches)):
            value, grads, _ = loss_and_grads(model, batches[b])
            if not math.isfinite(value):
                raise Divergence(f"loss became {value} in epoch {epoch}")
            if cfg.learning_rate:
                opt.step(model.params, grads)
            total += value
        history.append(total / len(batches))
        if callback is not None:
            callback(epoch, history[-1])
        log.info("epoch %d loss %.5f", epoch, history[-1])
    return Checkpoint(cfg, model.params, table, history)


# -- gradient check ---------------------------------------------------------

@dataclass
class GradReport:
    max_rel_error: float
    per_array: dict[str, float]
    checked: int

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """||a - b|| / (||a|| + ||b||), with a floor so two zero arrays compare as equal."""
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), floor))


def numeric_grads(model: TransformerLM, batch: Batch, step: float = 1e-5,
                  names: Sequence[str] | None = None) -> dict[str, np.ndarray]:
    def f():
        tl, el = model.forward(batch, exp_ids=batch.o_exp)
        return loss(tl, el, batch.o_tok, batch.o_exp)

    out = {}
    for name in names or model.params:
        arr = model.params[name]
        g = np.zeros(arr.shape, dtype=np.float64)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = f()
            flat[i] = old - step
            down = f()
            flat[i] = old
            g.reshape(-1)[i] = (up - down) / (2 * step)
        out[name] = g
    return out


def grad_check(cfg: ModelConfig, batch: Batch, placeholder_ids: Sequence[int] = (),
               step: float = 1e-5, dtype=np.float64, analytic_hook=None) -> GradReport:
    """Compare backprop gradients with central differences on every parameter.

    Finite differences are always taken in float64; ``dtype`` selects the
    precision of the analytic pass.  ``analytic_hook`` may edit the analytic
    gradients before comparison (used to check the detector itself).
    """
    ref = TransformerLM(cfg, init_params(cfg, np.float64), placeholder_ids)
    rng = np.random.default_rng(cfg.seed + 1)
    for name, arr in ref.params.items():
        # move off the symmetric init so every parameter matters
        arr += rng.normal(0.0, 0.1, arr.shape)
    model = TransformerLM(cfg, {k: v.astype(dtype) for k, v in ref.params.items()},
                          placeholder_ids)
    _, grads, _ = loss_and_grads(model, batch)
    if analytic_hook is not None:
        analytic_hook(grads)
    numeric = numeric_grads(ref, batch, step)
    per = {}
    checked = 0
    for name, g in numeric.items():
        per[name] = relative_error(grads[name].astype(np.float64), g)
        checked += g.size
    return GradReport(max(per.values()), per, checked)


# -- checkpoint files -----------------------------------------------------------

def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    names = list(param_shapes(ckpt.config))
    header = {"format": CKPT_FORMAT, "version": CKPT_VERSION, "config": asdict(ckpt.config),
              "arrays": [{"name": n, "shape": list(ckpt.params[n].shape)} for n in names],
              "symbols": ckpt.table.to_dict() if ckpt.table is not None else None,
              "history": [float(h) for h in ckpt.history]}
    with open(path, "wb") as f:
        f.write(json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode("utf-8"))
        f.write(b"\n")
        for n in names:
            f.write(np.ascontiguousarray(ckpt.params[n], dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as f:
        line = f.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise SchemaMismatch(f"{path}: not an {CKPT_FORMAT} file") from None
        if not isinstance(header, dict) or header.get("format") != CKPT_FORMAT:
            raise SchemaMismatch(f"{path}: not an {CKPT_FORMAT} file")
        if header.get("version") != CKPT_VERSION:
            raise SchemaMismatch(f"{path}: checkpoint version {header.get('version')} unsupported")
        cfg = ModelConfig(**header["config"])
        expected = param_shapes(cfg)
        params = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            if expected.get(entry["name"]) != shape:
                raise SchemaMismatch(f"{path}: array {entry['name']} has shape {shape}")
            count = int(np.prod(shape))
            raw = f.read(4 * count)
            if len(raw) != 4 * count:
                raise SchemaMismatch(f"{path}: truncated array {entry['name']}")
            params[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
        if set(params) != set(expected):
            raise SchemaMismatch(f"{path}: missing arrays {sorted(set(expected) - set(params))}")
    table = SymbolTable.from_dict(header["symbols"]) if header.get("symbols") else None
    return Checkpoint(cfg, params, table, header.get("history", []))


# -- predictor adapter ----------------------------------------------------------

class NeuralPredictor:
    """Serves a trained model through the predictor contract."""

    def __init__(self, model: TransformerLM, table: SymbolTable):
        self.model = model
        self.table = table

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "NeuralPredictor":
        if ckpt.table is None:
            raise ValueError("checkpoint carries no symbol table")
        return cls(ckpt.model(), ckpt.table)

    @property
    def max_len(self) -> int:
        return self.model.cfg.max_len

    def _batch(self, i_tok, heads):
        return encode_input(i_tok, heads, self.table, self.model.cfg.max_len)

    def predict_expansions(self, i_tok, heads) -> np.ndarray:
        _, exp_logits = self.model.forward(self._batch(i_tok, heads))
        return _softmax(exp_logits[0].astype(np.float64))

    def predict_tokens(self, i_tok, heads, exp_ids) -> np.ndarray:
        ids = np.asarray(exp_ids, dtype=np.int64)[None]
        tok_logits, _ = self.model.forward(self._batch(i_tok, heads), exp_ids=ids)
        return _softmax(tok_logits[0].astype(np.float64))

    def predict(self, i_tok, heads):
        from .predictor import PositionPrediction

        tok_logits, exp_logits = self.model.forward(self._batch(i_tok, heads))
        tok = _softmax(tok_logits[0].astype(np.float64))
        exp = _softmax(exp_logits[0].astype(np.float64))
        return [PositionPrediction(t, e) for t, e in zip(tok, exp)]
