"""Tree rewrites: binarization and subword decomposition."""

from __future__ import annotations

import heapq
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .treebank import ROOT, DepTree, NonProjectiveInput, is_projective

SUBWORD_LABEL = "subword"
CONTINUATION = "@@"
END_OF_WORD = "</w>"
MERGES_HEADER = "#version: itexp-bpe 1"


def binarize(tree: DepTree) -> DepTree:
    """Leave every node with at most one dependent on each side.

    Among same-side siblings the one nearest the start of the sentence keeps
    its head; each later sibling is hung off the rightmost token of the
    previous sibling's subtree, so arcs along the chain run left to right and
    the tree stays projective.  Labels and surface order are untouched.
    """
    if not is_projective(tree):
        raise NonProjectiveInput("binarize needs a projective tree")
    heads = tree.heads
    # rightmost token of each (rewritten) subtree; valid once its node is done
    tail = list(range(len(tree)))
    order = sorted(range(len(tree)), key=lambda i: -tree.depths[i])
    for node in order:
        left = tree.left_dependents(node)
        right = tree.right_dependents(node)
        for side in (left, right):
            for prev, cur in zip(side, side[1:]):
                heads[cur] = tail[prev]
        if right:
            tail[node] = tail[right[-1]]
    return DepTree.from_lists(tree.forms, heads, tree.deprels)


def is_binary(tree: DepTree) -> bool:
    return all(len(tree.left_dependents(i)) <= 1 and len(tree.right_dependents(i)) <= 1
               for i in range(len(tree)))


# -- byte-pair encoding --------------------------------------------------

@dataclass
class BpeMerges:
    """Ordered merge rules; earlier rules have priority."""

    rules: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.rules = [tuple(r) for r in self.rules]
        self.ranks = {r: i for i, r in enumerate(self.rules)}
        self._cache: dict[str, tuple[str, ...]] = {}

    def segment(self, word: str) -> tuple[str, ...]:
        """Split a word into pieces, ``@@`` marking every non-final one."""
        if word in self._cache:
            return self._cache[word]
        symbols = _initial_symbols(word)
        while len(symbols) > 1:
            pairs = [(self.ranks.get(p, len(self.ranks)), k)
                     for k, p in enumerate(zip(symbols, symbols[1:]))]
            rank, _ = min(pairs)
            if rank == len(self.ranks):
                break
            best = self.rules[rank]
            symbols = _merge_pair(symbols, best)
        pieces = tuple(s[:-len(END_OF_WORD)] if s.endswith(END_OF_WORD) else s + CONTINUATION
                       for s in symbols)
        self._cache[word] = pieces
        return pieces


def _initial_symbols(word: str) -> tuple[str, ...]:
    if not word:
        return (END_OF_WORD,)
    return tuple(word[:-1]) + (word[-1] + END_OF_WORD,)


def _merge_pair(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
            out.append(symbols[i] + symbols[i + 1])
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def _pair_counts(symbols: tuple[str, ...]) -> Counter:
    return Counter(zip(symbols, symbols[1:]))


def learn_bpe(trees: Iterable[DepTree], num_merges: int) -> BpeMerges:
    """Greedy BPE over word types; ties go to the lexicographically smallest pair."""
    freqs: Counter = Counter(t.form for tree in trees for t in tree.tokens)
    if not freqs:
        raise ValueError("learn_bpe needs a non-empty corpus")
    words = [_initial_symbols(w) for w in sorted(freqs)]
    wfreq = [freqs[w] for w in sorted(freqs)]
    stats: Counter = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for k, sym in enumerate(words):
        for pair, c in _pair_counts(sym).items():
            stats[pair] += c * wfreq[k]
            where[pair].add(k)
    heap = [(-c, p) for p, c in stats.items()]
    heapq.heapify(heap)
    rules = []
    while len(rules) < num_merges and heap:
        negc, pair = heapq.heappop(heap)
        if stats.get(pair, 0) != -negc or -negc <= 0:
            continue  # stale entry
        rules.append(pair)
        touched = Counter()
        for k in sorted(where.pop(pair, ())):
            old = words[k]
            new = _merge_pair(old, pair)
            if new == old:
                continue
            words[k] = new
            for p, c in _pair_counts(old).items():
                stats[p] -= c * wfreq[k]
                touched[p] += 0
            for p, c in _pair_counts(new).items():
                stats[p] += c * wfreq[k]
                where[p].add(k)
                touched[p] += 0
        stats.pop(pair, None)
        for p in touched:
            if p == pair:
                continue
            if stats.get(p, 0) > 0:
                heapq.heappush(heap, (-stats[p], p))
            else:
                stats.pop(p, None)
    return BpeMerges(rules)


def write_merges(path: str | Path, merges: BpeMerges) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(MERGES_HEADER + "\n")
        for a, b in merges.rules:
            f.write(f"{a} {b}\n")


def read_merges(path: str | Path) -> BpeMerges:
    from .treebank import SchemaMismatch

    with open(path, encoding="utf-8") as f:
        if f.readline().rstrip("\n") != MERGES_HEADER:
            raise SchemaMismatch(f"{path}: missing '{MERGES_HEADER}' header")
        rules = []
        for line in f:
            line = line.rstrip("\n")
            if line:
                a, b = line.split(" ")
                rules.append((a, b))
    return BpeMerges(rules)


def apply_subword(tree: DepTree, merges: BpeMerges, left_attach: str = "last") -> DepTree:
    """Replace each multi-piece word by a chain of subword nodes.

    The first piece takes over the word's head and relation; every further
    piece hangs off the previous one with relation ``subword``.  Dependents
    of the word re-attach to its last piece (``left_attach="last"``).  With
    ``left_attach="first"`` the left dependents go to the first piece
    instead, which keeps the result projective.
    """
    if left_attach not in ("first", "last"):
        raise ValueError(f"left_attach must be 'first' or 'last', not {left_attach!r}")
    pieces = [merges.segment(t.form) for t in tree.tokens]
    first = []
    n = 0
    for p in pieces:
        first.append(n)
        n += len(p)
    forms, heads, rels = [], [], []
    for t, p in zip(tree.tokens, pieces):
        for k, piece in enumerate(p):
            forms.append(piece)
            if k > 0:
                heads.append(first[t.index] + k - 1)
                rels.append(SUBWORD_LABEL)
                continue
            if t.head == ROOT:
                heads.append(ROOT)
            else:
                h = t.head
                if t.index > h or left_attach == "last":
                    heads.append(first[h] + len(pieces[h]) - 1)
                else:
                    heads.append(first[h])
            rels.append(t.deprel)
    return DepTree.from_lists(forms, heads, rels)


def join_subwords(forms: Iterable[str]) -> str:
    return " ".join(forms).replace(CONTINUATION + " ", "")
