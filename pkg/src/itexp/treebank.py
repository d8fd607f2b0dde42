"""Dependency trees, CoNLL-U ingestion and tree persistence."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

#: Head value of the root token.  Kept distinct from every token index.
ROOT = -1
#: Relation label carried by the root token after ingestion.
ROOT_LABEL = "ROOT"

TREES_FORMAT = "itexp-trees"
TREES_VERSION = 1


class TreeError(ValueError):
    """Base class for structural problems with a dependency tree."""


class MalformedLine(TreeError):
    pass


class MalformedTree(TreeError):
    pass


class CyclicTree(TreeError):
    pass


class NonProjectiveInput(TreeError):
    pass


class SchemaMismatch(ValueError):
    """A persisted file has the wrong format tag or version."""


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    deprel: str
    head: int


@dataclass(frozen=True)
class DepTree:
    tokens: tuple[Token, ...]
    root: int = field(init=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        n = len(tokens)
        if n == 0:
            raise MalformedTree("a tree needs at least one token")
        roots = []
        for i, tok in enumerate(tokens):
            if tok.index != i:
                raise MalformedTree(f"token {i} carries index {tok.index}")
            if tok.head == ROOT:
                roots.append(i)
            elif not 0 <= tok.head < n:
                raise MalformedTree(f"token {i} has head {tok.head} outside [0, {n})")
            elif tok.head == i:
                raise CyclicTree(f"token {i} is its own head")
        if len(roots) != 1:
            raise MalformedTree(f"expected exactly one root, found {len(roots)}")
        object.__setattr__(self, "root", roots[0])
        # every node must reach the root
        state = [0] * n  # 0 unseen, 1 on current path, 2 done
        for start in range(n):
            path = []
            i = start
            while i != ROOT and state[i] == 0:
                state[i] = 1
                path.append(i)
                i = tokens[i].head
            if i != ROOT and state[i] == 1:
                raise CyclicTree(f"cycle through token {i}")
            for j in path:
                state[j] = 2

    @classmethod
    def from_lists(cls, forms: Sequence[str], heads: Sequence[int],
                   deprels: Sequence[str]) -> "DepTree":
        if not len(forms) == len(heads) == len(deprels):
            raise MalformedTree("forms, heads and deprels differ in length")
        return cls(tuple(Token(i, f, d, h)
                         for i, (f, h, d) in enumerate(zip(forms, heads, deprels))))

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    @property
    def deprels(self) -> list[str]:
        return [t.deprel for t in self.tokens]

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.tokens]
        for t in self.tokens:
            if t.head != ROOT:
                kids[t.head].append(t.index)
        return tuple(tuple(k) for k in kids)

    def left_dependents(self, i: int) -> tuple[int, ...]:
        return tuple(c for c in self.children[i] if c < i)

    def right_dependents(self, i: int) -> tuple[int, ...]:
        return tuple(c for c in self.children[i] if c > i)

    @cached_property
    def depths(self) -> tuple[int, ...]:
        """Depth of every token; the root has depth 1."""
        out = [0] * len(self.tokens)
        out[self.root] = 1
        stack = [self.root]
        while stack:
            i = stack.pop()
            for c in self.children[i]:
                out[c] = out[i] + 1
                stack.append(c)
        return tuple(out)

    def text(self) -> str:
        return " ".join(self.forms)


def depth(tree: DepTree) -> int:
    return max(tree.depths)


def _subtree_spans(tree: DepTree) -> list[tuple[int, int, int]]:
    """(min index, max index, size) of every subtree, computed bottom-up."""
    n = len(tree)
    lo = list(range(n))
    hi = list(range(n))
    size = [1] * n
    order = sorted(range(n), key=lambda i: -tree.depths[i])
    for i in order:
        h = tree.tokens[i].head
        if h != ROOT:
            lo[h] = min(lo[h], lo[i])
            hi[h] = max(hi[h], hi[i])
            size[h] += size[i]
    return list(zip(lo, hi, size))


def is_projective(tree: DepTree) -> bool:
    """True iff every subtree covers a contiguous run of tokens."""
    return all(h - l + 1 == s for l, h, s in _subtree_spans(tree))


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[DepTree, ...] = ()
    source: str = ""
    kept: int = 0
    dropped_nonprojective: int = 0
    dropped_malformed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self) -> Iterator[DepTree]:
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    @classmethod
    def of(cls, trees: Iterable[DepTree], source: str = "") -> "Corpus":
        trees = tuple(trees)
        return cls(trees, source=source, kept=len(trees))

    def stats(self) -> dict:
        return {"source": self.source, "kept": self.kept,
                "dropped_nonprojective": self.dropped_nonprojective,
                "dropped_malformed": self.dropped_malformed}


def _blocks(lines: Iterable[str]) -> Iterator[list[str]]:
    block: list[str] = []
    for line in lines:
        line = line.rstrip("\r\n")
        if not line.strip():
            if block:
                yield block
                block = []
        else:
            block.append(line)
    if block:
        yield block


def _parse_block(block: list[str]) -> DepTree | None:
    forms, heads, deprels = [], [], []
    for line in block:
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise MalformedLine(f"expected 10 columns, got {len(cols)}: {line!r}")
        tid = cols[0]
        if "-" in tid or "." in tid:
            # multiword ranges and empty nodes carry no basic-tree arc
            continue
        if not tid.isdigit() or int(tid) != len(forms) + 1:
            raise MalformedLine(f"bad token id {tid!r}")
        if not cols[6].isdigit():
            raise MalformedLine(f"bad head {cols[6]!r}")
        head = int(cols[6])
        forms.append(cols[1])
        heads.append(ROOT if head == 0 else head - 1)
        deprels.append(ROOT_LABEL if head == 0 else cols[7])
    if not forms:
        return None
    if any(h != ROOT and h >= len(forms) for h in heads):
        raise MalformedLine("head points past the end of the sentence")
    return DepTree.from_lists(forms, heads, deprels)


def parse_conllu(text: str | Iterable[str], source: str = "<string>") -> Corpus:
    """Read the basic dependency trees of a CoNLL-U stream.

    Sentences with malformed rows or cyclic/multi-rooted head structure are
    dropped, as are non-projective ones; all drops are counted on the
    returned corpus.  The root's relation is normalised to ``ROOT``.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    trees = []
    malformed = nonproj = 0
    for block in _blocks(lines):
        try:
            tree = _parse_block(block)
        except TreeError as exc:
            log.debug("dropping sentence: %s", exc)
            malformed += 1
            continue
        if tree is None:
            continue
        if not is_projective(tree):
            nonproj += 1
            continue
        trees.append(tree)
    return Corpus(tuple(trees), source=source, kept=len(trees),
                  dropped_nonprojective=nonproj, dropped_malformed=malformed)


def read_conllu(path: str | Path) -> Corpus:
    with open(path, encoding="utf-8") as f:
        return parse_conllu(f, source=str(path))


def to_conllu(trees: Iterable[DepTree]) -> str:
    out = []
    for n, tree in enumerate(trees, 1):
        out.append(f"# sent_id = {n}")
        out.append(f"# text = {tree.text()}")
        for t in tree.tokens:
            head = 0 if t.head == ROOT else t.head + 1
            rel = "root" if t.head == ROOT else t.deprel
            out.append(f"{t.index + 1}\t{t.form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_")
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


# -- persistence ---------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def check_header(line: str, fmt: str, version: int) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"unreadable header for {fmt}: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != fmt:
        raise SchemaMismatch(f"expected format {fmt!r}, got {header!r}")
    if header.get("version") != version:
        raise SchemaMismatch(
            f"{fmt} version {header.get('version')!r} is not supported (want {version})")
    return header


def write_trees(path: str | Path, corpus: Iterable[DepTree]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps({"format": TREES_FORMAT, "version": TREES_VERSION}) + "\n")
        for n, tree in enumerate(corpus):
            toks = [{"form": t.form, "head": t.head, "deprel": t.deprel}
                    for t in tree.tokens]
            f.write(_dumps({"id": n, "tokens": toks}) + "\n")


def read_trees(path: str | Path) -> Corpus:
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        if not first:
            raise SchemaMismatch(f"{path}: empty file, no {TREES_FORMAT} header")
        check_header(first, TREES_FORMAT, TREES_VERSION)
        trees = []
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            toks = rec["tokens"]
            trees.append(DepTree.from_lists([t["form"] for t in toks],
                                            [t["head"] for t in toks],
                                            [t["deprel"] for t in toks]))
    return Corpus.of(trees, source=str(path))
