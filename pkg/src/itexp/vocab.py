"""Expansion patterns and the symbol tables shared by predictors.

Token IDs live in one space holding terminals *and* dependency
placeholders; expansion placeholders get their own space.  Reserved IDs:

    token space      0 ``[pad]``   1 ``<unk>``   2 ``[ROOT]``
    expansion space  0 ``[pad]``   1 ``[OOV]``
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .treebank import ROOT, DepTree, SchemaMismatch

PAD = "[pad]"
UNK = "<unk>"
ROOT_PLACEHOLDER = "[ROOT]"
OOV_EXP = "[OOV]"
HEAD = "HEAD"

RESERVED_TOKENS = (PAD, UNK, ROOT_PLACEHOLDER)
RESERVED_EXPANSIONS = (PAD, OOV_EXP)


class MalformedPattern(ValueError):
    pass


def placeholder(label: str) -> str:
    return f"[{label}]"


def is_placeholder(symbol: str) -> bool:
    return len(symbol) > 2 and symbol[0] == "[" and symbol[-1] == "]" and symbol != PAD


def placeholder_label(symbol: str) -> str:
    return symbol[1:-1]


@dataclass(frozen=True)
class ExpansionPattern:
    left_labels: tuple[str, ...] = ()
    right_labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "left_labels", tuple(self.left_labels))
        object.__setattr__(self, "right_labels", tuple(self.right_labels))

    def render(self) -> str:
        return "[" + "-".join(self.left_labels + (HEAD,) + self.right_labels) + "]"

    __str__ = render

    @property
    def labels(self) -> tuple[str, ...]:
        return self.left_labels + self.right_labels


def compose_expansion(tree: DepTree, node: int) -> ExpansionPattern:
    return ExpansionPattern(
        tuple(tree.tokens[c].deprel for c in tree.left_dependents(node)),
        tuple(tree.tokens[c].deprel for c in tree.right_dependents(node)))


def parse_expansion(token: str) -> ExpansionPattern:
    if len(token) < 2 or token[0] != "[" or token[-1] != "]":
        raise MalformedPattern(f"not bracketed: {token!r}")
    parts = token[1:-1].split("-")
    if any(p == "" for p in parts):
        raise MalformedPattern(f"empty component in {token!r}")
    if parts.count(HEAD) != 1:
        raise MalformedPattern(f"need exactly one {HEAD} in {token!r}")
    k = parts.index(HEAD)
    return ExpansionPattern(tuple(parts[:k]), tuple(parts[k + 1:]))


def _ranked(counts: Counter) -> list[str]:
    return sorted(counts, key=lambda s: (-counts[s], s))


class SymbolTable:
    """Frozen ID assignment for tokens, placeholders and expansions."""

    def __init__(self, terminals: dict[str, int], placeholders: dict[str, int],
                 expansions: dict[str, int]):
        # dict order is the ID order
        self.terminal_counts = dict(terminals)
        self.placeholder_counts = dict(placeholders)
        self.expansion_counts = dict(expansions)
        self.tokens: list[str] = list(RESERVED_TOKENS)
        self.tokens += [p for p in placeholders if p != ROOT_PLACEHOLDER]
        self.tokens += list(terminals)
        self.expansions: list[str] = list(RESERVED_EXPANSIONS) + list(expansions)
        self.token_ids = {s: i for i, s in enumerate(self.tokens)}
        self.expansion_ids = {s: i for i, s in enumerate(self.expansions)}
        if len(self.token_ids) != len(self.tokens):
            raise ValueError("a terminal collides with a reserved or placeholder symbol")
        self.placeholder_ids = [self.token_ids[ROOT_PLACEHOLDER]] + [
            self.token_ids[p] for p in placeholders if p != ROOT_PLACEHOLDER]
        self.oov_expansions = Counter()

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    @property
    def num_expansions(self) -> int:
        return len(self.expansions)

    def token_id(self, symbol: str) -> int:
        return self.token_ids.get(symbol, 1)

    def expansion_id(self, symbol: str) -> int:
        i = self.expansion_ids.get(symbol)
        if i is None:
            self.oov_expansions[symbol] += 1
            return 1
        return i

    def __eq__(self, other):
        return (isinstance(other, SymbolTable) and self.tokens == other.tokens
                and self.expansions == other.expansions
                and self.terminal_counts == other.terminal_counts
                and self.placeholder_counts == other.placeholder_counts
                and self.expansion_counts == other.expansion_counts)

    def to_dict(self) -> dict:
        return {"terminals": self.terminal_counts,
                "placeholders": self.placeholder_counts,
                "expansions": self.expansion_counts}

    @classmethod
    def from_dict(cls, d: dict) -> "SymbolTable":
        return cls(d["terminals"], d["placeholders"], d["expansions"])


def induce_vocabs(trees: Iterable[DepTree], min_freq: int = 1) -> SymbolTable:
    terms: Counter = Counter()
    places: Counter = Counter()
    exps: Counter = Counter()
    for tree in trees:
        for t in tree.tokens:
            terms[t.form] += 1
            places[ROOT_PLACEHOLDER if t.head == ROOT else placeholder(t.deprel)] += 1
            exps[compose_expansion(tree, t.index).render()] += 1
    kept = Counter({s: c for s, c in terms.items() if c >= min_freq})
    return SymbolTable({s: kept[s] for s in _ranked(kept)},
                       {s: places[s] for s in _ranked(places)},
                       {s: exps[s] for s in _ranked(exps)})


_SECTIONS = ("##terminals", "##dep_placeholders", "##expansions")


def write_vocab(path: str | Path, table: SymbolTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for header, counts in zip(_SECTIONS, (table.terminal_counts,
                                              table.placeholder_counts,
                                              table.expansion_counts)):
            f.write(header + "\n")
            for sym, c in counts.items():
                f.write(f"{sym}\t{c}\n")


def read_vocab(path: str | Path) -> SymbolTable:
    sections: dict[str, dict[str, int]] = {}
    current = None
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if line in _SECTIONS:
                current = sections.setdefault(line, {})
                continue
            if not line:
                continue
            if current is None:
                raise SchemaMismatch(f"{path}:{n}: symbol before any section header")
            sym, _, count = line.rpartition("\t")
            current[sym] = int(count)
    missing = [s for s in _SECTIONS if s not in sections]
    if missing:
        raise SchemaMismatch(f"{path}: missing sections {missing}")
    return SymbolTable(*(sections[s] for s in _SECTIONS))
