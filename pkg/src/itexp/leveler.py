"""Level transitions: cutting a tree into per-iteration training steps and
expanding model output into the next iteration's input."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .treebank import (ROOT, ROOT_LABEL, DepTree, NonProjectiveInput, _dumps,
                       check_header, is_projective)
from .vocab import (PAD, ROOT_PLACEHOLDER, compose_expansion, is_placeholder,
                    parse_expansion, placeholder, placeholder_label)

LEVELS_FORMAT = "itexp-levels"
LEVELS_VERSION = 1


class PadAtPlaceholder(ValueError):
    pass


class ChainMismatch(ValueError):
    pass


@dataclass(frozen=True)
class LevelTransition:
    i_tok: tuple[str, ...]
    heads: tuple[int, ...]
    o_tok: tuple[str, ...]
    o_exp: tuple[str, ...]

    def __post_init__(self):
        for name in ("i_tok", "heads", "o_tok", "o_exp"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n = len(self.i_tok)
        if not len(self.heads) == len(self.o_tok) == len(self.o_exp) == n:
            raise ValueError("i_tok, heads, o_tok and o_exp must have equal length")

    def __len__(self):
        return len(self.i_tok)

    @property
    def placeholder_positions(self) -> list[int]:
        return [i for i, s in enumerate(self.i_tok) if is_placeholder(s)]

    def validate(self) -> None:
        for i, s in enumerate(self.i_tok):
            ph = is_placeholder(s)
            if ph and (self.o_tok[i] == PAD or self.o_exp[i] == PAD):
                raise PadAtPlaceholder(f"position {i} ({s}) has a [pad] output")
            if not ph and (self.o_tok[i] != PAD or self.o_exp[i] != PAD):
                raise ValueError(f"terminal position {i} ({s}) has a non-pad output")
            h = self.heads[i]
            if h != ROOT and (not 0 <= h < len(self) or is_placeholder(self.i_tok[h])):
                raise ValueError(f"position {i} has head {h}, not a terminal position")


def levelize(tree: DepTree) -> list[LevelTransition]:
    """One transition per tree level, root level first."""
    if not is_projective(tree):
        raise NonProjectiveInput("levelize needs a projective tree")
    depths = tree.depths
    out = []
    for k in range(1, max(depths) + 1):
        nodes = [i for i in range(len(tree)) if depths[i] <= k]
        pos = {node: p for p, node in enumerate(nodes)}
        i_tok, heads, o_tok, o_exp = [], [], [], []
        for node in nodes:
            tok = tree.tokens[node]
            heads.append(ROOT if tok.head == ROOT else pos[tok.head])
            if depths[node] < k:
                i_tok.append(tok.form)
                o_tok.append(PAD)
                o_exp.append(PAD)
            else:
                i_tok.append(ROOT_PLACEHOLDER if tok.head == ROOT else placeholder(tok.deprel))
                o_tok.append(tok.form)
                o_exp.append(compose_expansion(tree, node).render())
        out.append(LevelTransition(i_tok, heads, o_tok, o_exp))
    return out


def initial_input() -> tuple[tuple[str, ...], tuple[int, ...]]:
    return (ROOT_PLACEHOLDER,), (ROOT,)


def _expand(t: LevelTransition):
    """Expanded sequence plus, per new position, the old position it came from."""
    new_tok: list[str] = []
    origin: list[tuple[int, bool]] = []  # (old position, is the emitted word)
    where = [0] * len(t)
    for i, sym in enumerate(t.i_tok):
        if not is_placeholder(sym):
            where[i] = len(new_tok)
            new_tok.append(sym)
            origin.append((i, True))
            continue
        if t.o_tok[i] == PAD or t.o_exp[i] == PAD:
            raise PadAtPlaceholder(f"position {i} ({sym}) has a [pad] output")
        pattern = parse_expansion(t.o_exp[i])
        for label in pattern.left_labels:
            new_tok.append(placeholder(label))
            origin.append((i, False))
        where[i] = len(new_tok)
        new_tok.append(t.o_tok[i])
        origin.append((i, True))
        for label in pattern.right_labels:
            new_tok.append(placeholder(label))
            origin.append((i, False))
    new_heads = []
    for old, is_word in origin:
        if is_word:
            h = t.heads[old]
            new_heads.append(ROOT if h == ROOT else where[h])
        else:
            new_heads.append(where[old])
    return tuple(new_tok), tuple(new_heads), origin


def expand(t: LevelTransition) -> tuple[tuple[str, ...], tuple[int, ...]]:
    """Build the next iteration's input from a transition's outputs."""
    i_tok, heads, _ = _expand(t)
    return i_tok, heads


def is_finished(i_tok: Sequence[str]) -> bool:
    return not any(is_placeholder(s) for s in i_tok)


def replay(transitions: Sequence[LevelTransition]) -> tuple[list[str], DepTree]:
    """Run the expansions of a chain of transitions and rebuild the tree."""
    if not transitions:
        raise ChainMismatch("no transitions to replay")
    if (transitions[0].i_tok, transitions[0].heads) != initial_input():
        raise ChainMismatch("first transition does not start from [ROOT]")
    # node ids of the tokens at each position of the current input
    ids: list[int | None] = [None]
    label = [ROOT_LABEL]  # relation of the placeholder per position
    forms: list[str] = []
    rels: list[str] = []
    parent: list[int] = []
    for step, t in enumerate(transitions):
        if len(t) != len(ids):
            raise ChainMismatch(f"step {step} has length {len(t)}, expected {len(ids)}")
        new_tok, new_heads, origin = _expand(t)
        new_ids: list[int | None] = []
        new_label: list[str] = []
        for old, is_word in origin:
            if not is_word:
                new_ids.append(None)
                new_label.append(placeholder_label(new_tok[len(new_ids) - 1]))
                continue
            if ids[old] is None:
                node = len(forms)
                forms.append(t.o_tok[old])
                rels.append(label[old])
                h = t.heads[old]
                parent.append(ROOT if h == ROOT else ids[h])
                ids[old] = node
            new_ids.append(ids[old])
            new_label.append("")
        ids, label = new_ids, new_label
        if step + 1 < len(transitions):
            nxt = transitions[step + 1]
            if (nxt.i_tok, nxt.heads) != (new_tok, new_heads):
                raise ChainMismatch(f"step {step + 1} input does not follow from step {step}")
        elif not is_finished(new_tok):
            raise ChainMismatch("the last transition leaves unexpanded placeholders")
    order = {node: p for p, node in enumerate(ids)}
    n = len(ids)
    out_forms = [""] * n
    out_heads = [0] * n
    out_rels = [""] * n
    for node, p in order.items():
        out_forms[p] = forms[node]
        out_rels[p] = rels[node]
        out_heads[p] = ROOT if parent[node] == ROOT else order[parent[node]]
    return out_forms, DepTree.from_lists(out_forms, out_heads, out_rels)


# -- persistence ---------------------------------------------------------

def write_levels(path: str | Path, sentences: Iterable[Sequence[LevelTransition]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps({"format": LEVELS_FORMAT, "version": LEVELS_VERSION}) + "\n")
        for sent_id, steps in enumerate(sentences):
            for step, t in enumerate(steps):
                f.write(_dumps({"sent_id": sent_id, "step": step, "i_tok": list(t.i_tok),
                                "heads": list(t.heads), "o_tok": list(t.o_tok),
                                "o_exp": list(t.o_exp)}) + "\n")


def read_levels(path: str | Path) -> list[list[LevelTransition]]:
    sentences: dict[int, list[LevelTransition]] = {}
    with open(path, encoding="utf-8") as f:
        check_header(f.readline(), LEVELS_FORMAT, LEVELS_VERSION)
        for line in f:
            if not line.strip():
                continue
            r = json.loads(line)
            steps = sentences.setdefault(r["sent_id"], [])
            if r["step"] != len(steps):
                raise ChainMismatch(f"sentence {r['sent_id']}: step {r['step']} out of order")
            steps.append(LevelTransition(r["i_tok"], r["heads"], r["o_tok"], r["o_exp"]))
    return [sentences[k] for k in sorted(sentences)]
