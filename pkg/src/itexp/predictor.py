"""Predictors: per-position distributions over terminals and expansions.

A predictor exposes ``table`` (its :class:`SymbolTable`) and

* ``predict(i_tok, heads) -> list[PositionPrediction]``

Predictors that condition the terminal on the chosen expansion also expose
the two-stage pair used by the generation engine when available:

* ``predict_expansions(i_tok, heads) -> ndarray (S, V_exp)``
* ``predict_tokens(i_tok, heads, exp_ids) -> ndarray (S, V_tok)``
"""

from __future__ import annotations

import json
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .leveler import LevelTransition, levelize
from .treebank import ROOT, DepTree
from .vocab import PAD, SymbolTable, is_placeholder, placeholder_label


class QueryOffReferencePath(LookupError):
    pass


class EmptyCorpus(ValueError):
    pass


@dataclass
class PositionPrediction:
    token_dist: np.ndarray
    exp_dist: np.ndarray


class Predictor(Protocol):
    table: SymbolTable

    def predict(self, i_tok: Sequence[str], heads: Sequence[int]) -> list[PositionPrediction]:
        ...


def _one_hot(size: int, i: int) -> np.ndarray:
    v = np.zeros(size)
    v[i] = 1.0
    return v


class OraclePredictor:
    """Replays the levels of one reference tree as one-hot predictions."""

    def __init__(self, reference: DepTree, table: SymbolTable):
        self.table = table
        self._steps = {(t.i_tok, t.heads): t for t in levelize(reference)}

    def _lookup(self, i_tok, heads) -> LevelTransition:
        try:
            return self._steps[(tuple(i_tok), tuple(heads))]
        except KeyError:
            raise QueryOffReferencePath(
                f"input {' '.join(i_tok)!r} is not on the reference path") from None

    def predict(self, i_tok, heads):
        t = self._lookup(i_tok, heads)
        vt, ve = self.table.num_tokens, self.table.num_expansions
        return [PositionPrediction(_one_hot(vt, self.table.token_id(o)),
                                   _one_hot(ve, self.table.expansion_id(e)))
                for o, e in zip(t.o_tok, t.o_exp)]


def oracle_predictor(reference: DepTree, table: SymbolTable) -> OraclePredictor:
    return OraclePredictor(reference, table)


# -- empirical back-off model -------------------------------------------

Context = tuple[str, "str | None"]  # (placeholder label, head terminal or None for root)


class EmpiricalModel:
    """Joint (terminal, expansion) counts per (label, head word) context.

    Queries back off from (label, head) to label alone, then to the global
    table, taking the first context that was observed at all.
    """

    cache_size = 4096

    def __init__(self, table: SymbolTable, counts: dict[Context, Counter]):
        self.table = table
        self.full: dict[Context, Counter] = {k: Counter(v) for k, v in counts.items()}
        self.by_label: dict[str, Counter] = defaultdict(Counter)
        self.glob: Counter = Counter()
        for (label, _), c in self.full.items():
            self.by_label[label].update(c)
            self.glob.update(c)
        self.by_label = dict(self.by_label)
        if not self.glob:
            raise EmptyCorpus("empirical model has no counts")
        self._cache: dict[Context, tuple] = {}
        self._lock = threading.Lock()

    def context_counts(self, label: str, head: str | None) -> tuple[str, Counter]:
        c = self.full.get((label, head))
        if c:
            return "full", c
        c = self.by_label.get(label)
        if c:
            return "label", c
        return "global", self.glob

    def _tables(self, label: str, head: str | None):
        """(sparse token rows per expansion ID, expansion marginal, token marginal)."""
        key = (label, head)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        _, counts = self.context_counts(label, head)
        rows: dict[int, Counter] = defaultdict(Counter)
        for (tok, exp), c in counts.items():
            rows[self.table.expansion_id(exp)][self.table.token_id(tok)] += c
        exp_marg = np.zeros(self.table.num_expansions)
        tok_marg = np.zeros(self.table.num_tokens)
        sparse = {}
        for e, row in rows.items():
            ids = np.fromiter(row.keys(), dtype=np.int64, count=len(row))
            cnt = np.fromiter(row.values(), dtype=np.float64, count=len(row))
            sparse[e] = (ids, cnt)
            exp_marg[e] += cnt.sum()
            np.add.at(tok_marg, ids, cnt)
        hit = (sparse, exp_marg / exp_marg.sum(), tok_marg / tok_marg.sum())
        with self._lock:
            if len(self._cache) >= self.cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = hit
        return hit

    def _contexts(self, i_tok, heads):
        for s, h in zip(i_tok, heads):
            if not is_placeholder(s):
                yield None
            else:
                yield placeholder_label(s), (None if h == ROOT else i_tok[h])

    def predict(self, i_tok, heads):
        out = []
        vt, ve = self.table.num_tokens, self.table.num_expansions
        for ctx in self._contexts(i_tok, heads):
            if ctx is None:
                out.append(PositionPrediction(_one_hot(vt, 0), _one_hot(ve, 0)))
            else:
                _, exp_d, tok_d = self._tables(*ctx)
                out.append(PositionPrediction(tok_d, exp_d))
        return out

    def predict_expansions(self, i_tok, heads) -> np.ndarray:
        return np.stack([p.exp_dist for p in self.predict(i_tok, heads)])

    def predict_tokens(self, i_tok, heads, exp_ids) -> np.ndarray:
        rows = []
        for ctx, e in zip(self._contexts(i_tok, heads), exp_ids):
            if ctx is None:
                rows.append(_one_hot(self.table.num_tokens, 0))
                continue
            sparse, _, tok_d = self._tables(*ctx)
            if e in sparse:
                ids, cnt = sparse[e]
                row = np.zeros(self.table.num_tokens)
                row[ids] = cnt / cnt.sum()
                rows.append(row)
            else:
                rows.append(tok_d)
        return np.stack(rows)

    # persistence
    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for (label, head), c in sorted(self.full.items(), key=lambda kv: (kv[0][0], kv[0][1] is not None, kv[0][1] or "")):
                for (tok, exp), n in sorted(c.items()):
                    f.write(json.dumps({"label": label, "head": head, "token": tok,
                                        "exp": exp, "count": n}, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path, table: SymbolTable) -> "EmpiricalModel":
        counts: dict[Context, Counter] = defaultdict(Counter)
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    r = json.loads(line)
                    counts[(r["label"], r["head"])][(r["token"], r["exp"])] += r["count"]
        return cls(table, counts)


def fit_empirical(transitions: Iterable[LevelTransition], table: SymbolTable) -> EmpiricalModel:
    counts: dict[Context, Counter] = defaultdict(Counter)
    for t in transitions:
        for i, s in enumerate(t.i_tok):
            if not is_placeholder(s):
                continue
            if t.o_tok[i] == PAD:
                raise ValueError(f"placeholder {s} without output")
            head = None if t.heads[i] == ROOT else t.i_tok[t.heads[i]]
            counts[(placeholder_label(s), head)][(t.o_tok[i], t.o_exp[i])] += 1
    if not counts:
        raise EmptyCorpus("no transitions to fit")
    return EmpiricalModel(table, counts)
