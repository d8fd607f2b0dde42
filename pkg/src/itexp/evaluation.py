"""BLEU and self-BLEU, temperature sweeps, decoding-step ratios and the
adjective counter used for style control."""

from __future__ import annotations

import json
import math
import statistics
from bisect import bisect_left
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .generate import GenerationSettings, generate
from .transform import binarize
from .treebank import DepTree, depth

Sentence = Sequence[str]


def _ngrams(tokens: Sentence, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest(lengths: Sequence[int], c: int) -> int:
    """Closest length to c in a sorted list; ties go to the shorter one."""
    i = bisect_left(lengths, c)
    best = None
    for j in (i - 1, i):
        if 0 <= j < len(lengths):
            if best is None or abs(lengths[j] - c) < abs(best - c):
                best = lengths[j]
    return best


def _score(matches: Sequence[int], totals: Sequence[int], c: int, r: int) -> float:
    if c == 0 or any(m == 0 for m in matches):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matches, totals)) / len(matches)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p)


class ReferenceSet:
    """Clipping counts and lengths of a reference corpus, built once."""

    def __init__(self, references: Iterable[Sentence], max_n: int):
        refs = [list(r) for r in references]
        if not refs:
            raise ValueError("empty reference corpus")
        self.max_n = max_n
        self.lengths = sorted(len(r) for r in refs)
        self.max_counts: list[dict] = []
        for n in range(1, max_n + 1):
            best: dict = {}
            for r in refs:
                for g, k in _ngrams(r, n).items():
                    if k > best.get(g, 0):
                        best[g] = k
            self.max_counts.append(best)


def bleu(candidates: Sequence[Sentence], references: Sequence[Sentence] | ReferenceSet,
         max_n: int = 5) -> float:
    """Corpus BLEU of all candidates against one shared reference corpus, unsmoothed."""
    if not candidates:
        raise ValueError("empty candidate set")
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    refs = references if isinstance(references, ReferenceSet) else ReferenceSet(references, max_n)
    if refs.max_n < max_n:
        raise ValueError("reference set was built for a smaller max_n")
    matches = [0] * max_n
    totals = [0] * max_n
    c = r = 0
    for cand in candidates:
        c += len(cand)
        r += _closest(refs.lengths, len(cand))
        for n in range(1, max_n + 1):
            best = refs.max_counts[n - 1]
            grams = _ngrams(cand, n)
            matches[n - 1] += sum(min(k, best.get(g, 0)) for g, k in grams.items())
            totals[n - 1] += max(len(cand) - n + 1, 0)
    return _score(matches, totals, c, r)


def self_bleu(candidates: Sequence[Sentence], max_n: int = 5, mode: str = "mean") -> float:
    """BLEU of each candidate against all the others.

    ``mode="mean"`` averages the per-sentence scores.  ``mode="corpus"`` pools
    the clipped counts and lengths of all sentences before scoring, the way a
    corpus-level BLEU call with per-sentence reference sets does.
    """
    cands = [list(s) for s in candidates]
    if len(cands) < 2:
        raise ValueError("self-BLEU needs at least two candidates")
    stats = _self_bleu_stats(cands, max_n)
    if mode == "mean":
        return float(np.mean([_score(*st) for st in stats]))
    if mode == "corpus":
        matches = [sum(st[0][n] for st in stats) for n in range(max_n)]
        totals = [sum(st[1][n] for st in stats) for n in range(max_n)]
        return _score(matches, totals, sum(st[2] for st in stats), sum(st[3] for st in stats))
    raise ValueError(f"unknown self-BLEU mode {mode!r}")


def self_bleu_scores(cands: Sequence[Sentence], max_n: int = 5) -> list[float]:
    return [_score(*st) for st in _self_bleu_stats([list(s) for s in cands], max_n)]


def _self_bleu_stats(cands, max_n):
    """(matches, totals, c, r) of every sentence against the rest."""
    # For each n-gram keep the two largest per-sentence counts; the clip for a
    # sentence is the runner-up when it holds the top count itself.
    grams = [[_ngrams(s, n) for n in range(1, max_n + 1)] for s in cands]
    top: list[dict] = [{} for _ in range(max_n)]
    for per in grams:
        for n in range(max_n):
            tbl = top[n]
            for g, k in per[n].items():
                a, b = tbl.get(g, (0, 0))
                if k > a:
                    tbl[g] = (k, a)
                elif k > b:
                    tbl[g] = (a, k)
    length_counts = Counter(len(s) for s in cands)
    out = []
    for s, per in zip(cands, grams):
        matches = []
        totals = []
        for n in range(max_n):
            tbl = top[n]
            m = 0
            for g, k in per[n].items():
                a, b = tbl[g]
                m += min(k, b if k == a else a)
            matches.append(m)
            totals.append(max(len(s) - n, 0))
        others = sorted(l for l, k in length_counts.items() if k - (l == len(s)) > 0)
        out.append((matches, totals, len(s), _closest(others, len(s))))
    return out


# -- sweeps ---------------------------------------------------------------

@dataclass
class SweepRow:
    temperature: float
    bleu_mean: float
    bleu_std: float
    self_bleu_mean: float
    self_bleu_std: float
    samples: int


@dataclass
class SweepReport:
    rows: list[SweepRow]
    max_n: int
    top_p: float
    self_bleu_mode: str = "corpus"

    def records(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def sweep(predictor, temperatures: Sequence[float], validation: Sequence[DepTree],
          samples: int = 5, sentences: int = 100, top_p: float = 0.9, seed: int = 0,
          max_n: int = 5, workers: int = 1, max_iterations: int = 64,
          self_bleu_mode: str = "corpus") -> SweepReport:
    """Validation and self BLEU per temperature, mean and population std over samples.

    Sample ``k`` draws sentence seeds ``seed + k*sentences + j`` at every
    temperature, so the temperatures share random streams.
    """
    if len(set(temperatures)) != len(temperatures):
        raise ValueError("temperatures must be distinct")
    refs = ReferenceSet([t.forms for t in validation], max_n)
    rows = []
    for tau in temperatures:
        v, s = [], []
        for k in range(samples):
            settings = GenerationSettings(temperature=tau, top_p=top_p, seed=seed + k * sentences,
                                          max_iterations=max_iterations)
            out = [g.text.split() for g in generate(predictor, settings, sentences, workers)]
            v.append(bleu(out, refs, max_n))
            s.append(self_bleu(out, max_n, self_bleu_mode))
        rows.append(SweepRow(tau, statistics.fmean(v), statistics.pstdev(v),
                             statistics.fmean(s), statistics.pstdev(s), samples))
    return SweepReport(rows, max_n, top_p, self_bleu_mode)


# -- decoding steps -----------------------------------------------------------

def ideal_steps(n: int) -> int:
    """ceil(log2(n + 1)), the depth of a complete binary tree over n nodes."""
    return max(n, 0).bit_length()


@dataclass
class SpeedupReport:
    lengths: list[int]
    natural: list[float]
    binarized: list[float]
    ideal: list[float]
    histogram: dict[str, list[tuple[float, float, int]]] = field(default_factory=dict)

    @property
    def means(self) -> dict[str, float]:
        return {k: (statistics.fmean(getattr(self, k)) if self.lengths else float("nan"))
                for k in ("natural", "binarized", "ideal")}

    def violations(self) -> int:
        return sum(not (i <= b <= 1.0 and n <= b)
                   for n, b, i in zip(self.natural, self.binarized, self.ideal))

    def records(self) -> list[dict]:
        return [{"length": n, "natural": a, "binarized": b, "ideal": c}
                for n, a, b, c in zip(self.lengths, self.natural, self.binarized, self.ideal)]


def _histogram(values: Sequence[float], bins: int) -> list[tuple[float, float, int]]:
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def speedup_stats(trees: Iterable[DepTree], bins: int = 20) -> SpeedupReport:
    lengths, nat, bin_, ideal = [], [], [], []
    for t in trees:
        n = len(t)
        lengths.append(n)
        nat.append(depth(t) / n)
        bin_.append(depth(binarize(t)) / n)
        ideal.append(ideal_steps(n) / n)
    rep = SpeedupReport(lengths, nat, bin_, ideal)
    rep.histogram = {k: _histogram(getattr(rep, k), bins) for k in ("natural", "binarized", "ideal")}
    return rep


# -- style ------------------------------------------------------------------

def adjective_count(tree: DepTree) -> int:
    return sum("amod" in t.deprel for t in tree.tokens)


def adjective_rate(trees: Sequence[DepTree]) -> float:
    """Mean number of amod-attached tokens per sentence."""
    trees = list(trees)
    if not trees:
        return 0.0
    return sum(adjective_count(t) for t in trees) / len(trees)


def style_curve(predictor, label: str, factors: Sequence[float], count: int,
                base: GenerationSettings, workers: int = 1) -> list[tuple[float, float]]:
    out = []
    for f in factors:
        settings = GenerationSettings(temperature=base.temperature, top_p=base.top_p,
                                      style=((label, f),), seed=base.seed,
                                      max_iterations=base.max_iterations)
        trees = [g.tree for g in generate(predictor, settings, count, workers)]
        out.append((f, adjective_rate(trees)))
    return out


# -- report output ------------------------------------------------------------

def write_records(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def format_table(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())

    def cell(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    body = [[cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)
