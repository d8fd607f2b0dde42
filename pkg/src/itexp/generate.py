"""Iterative decoding: start from ``[ROOT]`` and expand until no
dependency placeholders are left."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .leveler import LevelTransition, expand, initial_input, is_finished, replay
from .transform import join_subwords
from .treebank import DepTree
from .vocab import OOV_EXP, PAD, UNK, ExpansionPattern, is_placeholder, parse_expansion

log = logging.getLogger(__name__)


class PredictorFailure(RuntimeError):
    pass


class ZeroMassAfterMasking(RuntimeError):
    pass


@dataclass(frozen=True)
class GenerationSettings:
    temperature: float = 1.0
    top_p: float = 0.9
    style: tuple[tuple[str, float], ...] = ()
    seed: int = 0
    max_iterations: int = 64

    def __post_init__(self):
        object.__setattr__(self, "style", tuple((str(l), float(f)) for l, f in self.style))
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if any(f <= 0 for _, f in self.style):
            raise ValueError("style multipliers must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def temperature_scale(dist: np.ndarray, tau: float) -> np.ndarray:
    """Raise to 1/tau and renormalise; the same as dividing logits by tau."""
    if tau <= 0:
        raise ValueError("temperature must be positive")
    dist = np.asarray(dist, dtype=np.float64)
    if tau == 1.0:
        return dist / dist.sum()
    out = np.zeros_like(dist)
    nz = dist > 0
    logp = np.log(dist[nz]) / tau
    out[nz] = np.exp(logp - logp.max())
    return out / out.sum()


def nucleus_filter(dist: np.ndarray, p: float) -> np.ndarray:
    """Keep the smallest high-probability prefix holding mass >= p."""
    dist = np.asarray(dist, dtype=np.float64)
    if p >= 1.0:
        return dist / dist.sum()
    order = np.argsort(-dist, kind="stable")  # ties: lower index first
    cum = np.cumsum(dist[order])
    keep = int(np.searchsorted(cum, p * cum[-1], side="left")) + 1
    out = np.zeros_like(dist)
    idx = order[:keep]
    out[idx] = dist[idx]
    return out / out.sum()


def style_reweight(exp_dist: np.ndarray, symbols: Sequence[str],
                   rules: Sequence[tuple[str, float]]) -> np.ndarray:
    """Multiply the mass of expansions whose name contains a rule's label."""
    out = np.array(exp_dist, dtype=np.float64)
    if not rules:
        return out
    for label, factor in rules:
        hit = np.fromiter((label in s for s in symbols), dtype=bool, count=len(symbols))
        out[hit] *= factor
    total = out.sum()
    return out / total if total > 0 else out


@dataclass
class Generated:
    text: str
    tree: DepTree
    iterations: int
    transitions: list[LevelTransition] = field(repr=False, default_factory=list)


class Engine:
    def __init__(self, predictor, settings: GenerationSettings):
        self.predictor = predictor
        self.settings = settings
        table = predictor.table
        self.table = table
        self.token_mask = np.ones(table.num_tokens, dtype=bool)
        self.token_mask[[table.token_ids[PAD], table.token_ids[UNK]]] = False
        self.token_mask[table.placeholder_ids] = False
        self.exp_mask = np.ones(table.num_expansions, dtype=bool)
        self.exp_mask[[table.expansion_ids[PAD], table.expansion_ids[OOV_EXP]]] = False
        self.head_id = table.expansion_ids.get(ExpansionPattern().render())
        self.two_stage = (hasattr(predictor, "predict_expansions")
                          and hasattr(predictor, "predict_tokens"))
        # a predictor with a fixed input size caps how far a level may grow
        self.max_len = getattr(predictor, "max_len", None)
        self._growth = [len(parse_expansion(e).labels) if i > 1 else 0
                        for i, e in enumerate(table.expansions)]

    def _filter(self, dist, mask, what, style=False):
        d = np.where(mask, np.asarray(dist, dtype=np.float64), 0.0)
        if not d.sum() > 0:
            raise ZeroMassAfterMasking(f"{what} distribution has no mass after masking")
        if style and self.settings.style:
            d = style_reweight(d, self.table.expansions, self.settings.style)
        d = temperature_scale(d / d.sum(), self.settings.temperature)
        return nucleus_filter(d, self.settings.top_p)

    @staticmethod
    def _sample(dist, rng) -> int:
        cum = np.cumsum(dist)
        return int(min(np.searchsorted(cum, rng.random() * cum[-1], side="right"),
                       len(dist) - 1))

    def _choose_exp(self, dist, rng, last: bool) -> int:
        if last:
            if self.head_id is None:
                raise PredictorFailure("no [HEAD] expansion to close the tree with")
            return self.head_id
        return self._sample(self._filter(dist, self.exp_mask, "expansion", style=True), rng)

    def one(self, index: int) -> Generated:
        rng = np.random.default_rng(self.settings.seed + index)
        i_tok, heads = initial_input()
        steps: list[LevelTransition] = []
        for it in range(1, self.settings.max_iterations + 1):
            last = it == self.settings.max_iterations
            slots = [k for k, s in enumerate(i_tok) if is_placeholder(s)]
            try:
                if self.two_stage:
                    exp_rows = self.predictor.predict_expansions(i_tok, heads)
                else:
                    preds = self.predictor.predict(i_tok, heads)
                    exp_rows = [p.exp_dist for p in preds]
            except (ZeroMassAfterMasking, PredictorFailure):
                raise
            except Exception as exc:
                raise PredictorFailure(f"predictor failed at iteration {it}: {exc}") from exc
            exp_ids = [0] * len(i_tok)
            for k in slots:
                exp_ids[k] = self._choose_exp(exp_rows[k], rng, last)
            if self.max_len is not None:
                budget = self.max_len - len(i_tok)
                for k in slots:
                    if self._growth[exp_ids[k]] > budget:
                        exp_ids[k] = self._choose_exp(None, rng, True)
                    budget -= self._growth[exp_ids[k]]
            if self.two_stage:
                tok_rows = self.predictor.predict_tokens(i_tok, heads, exp_ids)
            else:
                tok_rows = [p.token_dist for p in preds]
            o_tok = [PAD] * len(i_tok)
            o_exp = [PAD] * len(i_tok)
            for k in slots:
                t = self._sample(self._filter(tok_rows[k], self.token_mask, "token"), rng)
                o_tok[k] = self.table.tokens[t]
                o_exp[k] = self.table.expansions[exp_ids[k]]
            step = LevelTransition(i_tok, heads, o_tok, o_exp)
            steps.append(step)
            i_tok, heads = expand(step)
            if is_finished(i_tok):
                break
        forms, tree = replay(steps)
        return Generated(join_subwords(forms), tree, len(steps), steps)


def generate(predictor, settings: GenerationSettings, count: int,
             workers: int = 1) -> list[Generated]:
    """Sample ``count`` sentences; sentence ``k`` uses seed ``settings.seed + k``."""
    engine = Engine(predictor, settings)
    if workers <= 1:
        return [engine.one(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(engine.one, range(count)))
