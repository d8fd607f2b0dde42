"""Reference trees and a synthetic news-style treebank.

The synthetic treebank is produced by a small hand-written dependency
grammar with Stanford/UD-v1 style relations (``nsubj``, ``dobj``, ``nmod``
...).  It is projective by construction and is meant for exercising the
pipeline at corpus scale when no real treebank is at hand.
"""

from __future__ import annotations

import random
from collections import defaultdict
from itertools import accumulate
from dataclasses import dataclass, field

from .treebank import ROOT, ROOT_LABEL, DepTree

# -- trees from the literature ------------------------------------------

DOG_SENTENCE = "my dog also likes eating sausage"


def dog_tree() -> DepTree:
    """'my dog also likes eating sausage' (lower-case 'my', as it is generated)."""
    return DepTree.from_lists(
        DOG_SENTENCE.split(),
        [1, 3, 3, ROOT, 3, 4],
        ["poss", "nsubj", "advmod", ROOT_LABEL, "xcomp", "dobj"])


BALL_SENTENCE = ("It was a failure , and we knew how far the ball would be , "
                 "so you have to wait .")


def ball_tree() -> DepTree:
    # 1-based heads, read off the ten-step generation trace
    rows = [
        ("It", 4, "nsubj"), ("was", 1, "cop"), ("a", 2, "det"), ("failure", 0, ROOT_LABEL),
        (",", 4, "punct"), ("and", 5, "cc"), ("we", 8, "nsubj"), ("knew", 6, "conj"),
        ("how", 10, "advmod"), ("far", 14, "advmod"), ("the", 12, "det"),
        ("ball", 10, "nsubj"), ("would", 12, "aux"), ("be", 8, "ccomp"),
        (",", 14, "punct"), ("so", 15, "dep"), ("you", 18, "nsubj"),
        ("have", 16, "parataxis"), ("to", 20, "mark"), ("wait", 18, "xcomp"),
        (".", 20, "punct"),
    ]
    return DepTree.from_lists([r[0] for r in rows],
                              [ROOT if r[1] == 0 else r[1] - 1 for r in rows],
                              [r[2] for r in rows])


# Reference trace: (i_tok, o_tok, o_exp) per iteration, "[pad]" included.
BALL_TRACE = [
    ("[ROOT]", "failure", "[nsubj-HEAD-punct]"),
    ("[nsubj] failure [punct]", "It [pad] ,", "[HEAD-cop] [pad] [HEAD-cc]"),
    ("It [cop] failure , [cc]", "[pad] was [pad] [pad] and",
     "[pad] [HEAD-det] [pad] [pad] [HEAD-conj]"),
    ("It was [det] failure , and [conj]", "[pad] [pad] a [pad] [pad] [pad] knew",
     "[pad] [pad] [HEAD] [pad] [pad] [pad] [nsubj-HEAD-ccomp]"),
    ("It was a failure , and [nsubj] knew [ccomp]",
     "[pad] [pad] [pad] [pad] [pad] [pad] we [pad] be",
     "[pad] [pad] [pad] [pad] [pad] [pad] [HEAD] [pad] [advmod-HEAD-punct]"),
    ("It was a failure , and we knew [advmod] be [punct]",
     "[pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] far [pad] ,",
     "[pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] [advmod-HEAD-nsubj] [pad] [HEAD-dep]"),
    ("It was a failure , and we knew [advmod] far [nsubj] be , [dep]",
     "[pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] how [pad] ball [pad] [pad] so",
     "[pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] [HEAD] [pad] [det-HEAD-aux] [pad] "
     "[pad] [HEAD-parataxis]"),
    ("It was a failure , and we knew how far [det] ball [aux] be , so [parataxis]",
     "[pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] the [pad] would [pad] "
     "[pad] [pad] have",
     "[pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] [pad] [HEAD] [pad] [HEAD] "
     "[pad] [pad] [pad] [nsubj-HEAD-xcomp]"),
    ("It was a failure , and we knew how far the ball would be , so [nsubj] have [xcomp]",
     " ".join(["[pad]"] * 16 + ["you", "[pad]", "wait"]),
     " ".join(["[pad]"] * 16 + ["[HEAD]", "[pad]", "[mark-HEAD-punct]"])),
    ("It was a failure , and we knew how far the ball would be , so you have [mark] wait "
     "[punct]",
     " ".join(["[pad]"] * 18 + ["to", "[pad]", "."]),
     " ".join(["[pad]"] * 18 + ["[HEAD]", "[pad]", "[HEAD]"])),
]

DOG_TRACE = [
    ("[ROOT]", "likes", "[nsubj-advmod-HEAD-xcomp]"),
    ("[nsubj] [advmod] likes [xcomp]", "dog also [pad] eating",
     "[poss-HEAD] [HEAD] [pad] [HEAD-dobj]"),
    ("[poss] dog also likes eating [dobj]", "my [pad] [pad] [pad] [pad] sausage",
     "[HEAD] [pad] [pad] [pad] [pad] [HEAD]"),
]


# -- synthetic news treebank --------------------------------------------

@dataclass
class _Node:
    form: str
    rel: str = ""
    left: list["_Node"] = field(default_factory=list)
    right: list["_Node"] = field(default_factory=list)


def _flatten(root: _Node) -> DepTree:
    order: list[tuple[_Node, _Node | None]] = []

    def walk(node: _Node, parent: _Node | None) -> None:
        for child in node.left:
            walk(child, node)
        order.append((node, parent))
        for child in node.right:
            walk(child, node)

    walk(root, None)
    pos = {id(node): k for k, (node, _) in enumerate(order)}
    return DepTree.from_lists(
        [node.form for node, _ in order],
        [ROOT if parent is None else pos[id(parent)] for _, parent in order],
        [ROOT_LABEL if parent is None else node.rel for node, parent in order])


NOUNS = """government company president minister police report official country
city market deal plan election campaign party leader vote people family child
woman man team player game season coach club fan league court judge case law
policy tax rate price bank economy business industry worker job school student
teacher hospital doctor patient health study research scientist data percent
year week month day time night morning week-end budget bill state house
committee agency group member community council officer attack incident
investigation trial evidence decision statement interview letter story film
music album show festival event crowd protest border security war troops army
weapon energy oil gas climate water food car road train flight airport
network phone internet site app service customer product sale share investor
profit loss growth deal talks meeting summit region capital area village town
street building home property rent owner tenant area record result goal
point match final title victory defeat injury contract transfer manager
executive director chairman spokesman spokeswoman source document email
account message post video picture book author reader issue problem crisis
risk threat change reform system program project fund charity support
""".split()

PROPER = """Trump Clinton Obama May Corbyn Johnson Merkel Putin Sanders Cruz
Rubio Carson Abbott Osborne Williams Smith Brown Jones Taylor Wilson Davies
London Washington Paris Berlin Moscow Brussels Chicago Texas Florida Syria
Russia China Britain Europe America Ukraine Iraq Germany France Scotland
Labour Congress Parliament Facebook Google Apple Twitter Reuters
""".split()

ADJS = """new former big small major local national international political
economic public private senior young old long short high low strong weak
good bad great important key top recent early late final first last next
huge serious significant private official federal foreign domestic social
financial military human legal free fair clear difficult hard easy real
whole full current previous potential possible likely special single
""".split()

ADVS = """also still just now already even only really never always often
again probably clearly quickly recently almost nearly currently reportedly
""".split()

# (past, participle, base, transitive?, takes clausal complement?)
VERBS = [
    ("said", "said", "say", True, True), ("told", "told", "tell", True, True),
    ("made", "made", "make", True, False), ("took", "taken", "take", True, False),
    ("gave", "given", "give", True, False), ("found", "found", "find", True, True),
    ("saw", "seen", "see", True, False), ("knew", "known", "know", True, True),
    ("thought", "thought", "think", False, True), ("believed", "believed", "believe", True, True),
    ("wanted", "wanted", "want", True, False), ("needed", "needed", "need", True, False),
    ("announced", "announced", "announce", True, True), ("reported", "reported", "report", True, True),
    ("claimed", "claimed", "claim", True, True), ("warned", "warned", "warn", False, True),
    ("added", "added", "add", True, True), ("agreed", "agreed", "agree", False, True),
    ("won", "won", "win", True, False), ("lost", "lost", "lose", True, False),
    ("raised", "raised", "raise", True, False), ("cut", "cut", "cut", True, False),
    ("built", "built", "build", True, False), ("bought", "bought", "buy", True, False),
    ("sold", "sold", "sell", True, False), ("paid", "paid", "pay", True, False),
    ("launched", "launched", "launch", True, False), ("opened", "opened", "open", True, False),
    ("closed", "closed", "close", True, False), ("signed", "signed", "sign", True, False),
    ("rejected", "rejected", "reject", True, False), ("backed", "backed", "back", True, False),
    ("supported", "supported", "support", True, False), ("attacked", "attacked", "attack", True, False),
    ("criticised", "criticised", "criticise", True, False), ("received", "received", "receive", True, False),
    ("faced", "faced", "face", True, False), ("led", "led", "lead", True, False),
    ("called", "called", "call", True, False), ("asked", "asked", "ask", True, False),
    ("helped", "helped", "help", True, False), ("joined", "joined", "join", True, False),
    ("left", "left", "leave", True, False), ("met", "met", "meet", True, False),
    ("played", "played", "play", True, False), ("scored", "scored", "score", True, False),
    ("increased", "increased", "increase", True, False), ("reduced", "reduced", "reduce", True, False),
    ("died", "died", "die", False, False), ("arrived", "arrived", "arrive", False, False),
    ("fell", "fallen", "fall", False, False), ("rose", "risen", "rise", False, False),
    ("happened", "happened", "happen", False, False), ("worked", "worked", "work", False, False),
    ("returned", "returned", "return", False, False), ("continued", "continued", "continue", False, False),
]

PREPS = "in on at for with from by about after before during over against into under between".split()
DETS = ["the"] * 6 + ["a"] * 3 + ["this", "that", "its", "their", "his", "her", "some", "many"]
PRONOUNS = ["he", "she", "it", "they", "we", "I", "you"]
POSS = ["his", "her", "its", "their", "our", "my"]
AUX = ["has", "had", "have", "would", "could", "will", "may", "might", "should", "must"]
NUMBERS = ["two", "three", "four", "five", "10", "20", "100", "1,000", "2016", "2017"]
TIMES = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
         "yesterday", "today", "week", "year", "month"]
SUBORD = ["because", "when", "if", "while", "after", "before", "although", "as"]
REPORT = ["said", "told", "added", "claimed", "warned", "reported", "announced"]
COPULA = ["was", "is", "were", "are", "has been", "would be", "will be"]


class NewsGrammar:
    """Random dependency trees shaped like newswire sentences.

    Word lists are sampled with Zipfian weights (earlier entries are more
    frequent), which gives the repeated n-grams real text has.
    """

    zipf_exponent = 1.1
    amod_prob = 0.18

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)
        self._cum: dict[int, list[float]] = {}

    def p(self, prob: float) -> bool:
        return self.rng.random() < prob

    def choice(self, seq):
        cum = self._cum.get(len(seq))
        if cum is None:
            cum = list(accumulate((k + 1) ** -self.zipf_exponent for k in range(len(seq))))
            self._cum[len(seq)] = cum
        return self.rng.choices(seq, cum_weights=cum)[0]

    # noun phrases -----------------------------------------------------
    def np(self, rel: str, depth: int = 0, allow_pron: bool = True) -> _Node:
        r = self.rng.random()
        if allow_pron and r < 0.15:
            return _Node(self.choice(PRONOUNS), rel)
        if r < 0.36:
            head = _Node(self.choice(PROPER), rel)
            if self.p(0.35):
                head.left.append(_Node(self.choice(PROPER + ADJS[:10]), "compound"))
            if depth < 2 and self.p(0.15):
                head.right += [_Node(",", "punct"), self.np("appos", depth + 1, False)]
            return head
        head = _Node(self.choice(NOUNS), rel)
        if self.p(0.15):
            head.left.append(_Node(self.choice(NUMBERS), "nummod"))
        elif self.p(0.12):
            head.left.append(_Node(self.choice(POSS), "nmod:poss"))
        else:
            head.left.append(_Node(self.choice(DETS), "det"))
        for _ in range(2):
            if self.p(self.amod_prob):
                adj = _Node(self.choice(ADJS), "amod")
                if self.p(0.1):
                    adj.left.append(_Node(self.choice(["very", "more", "most"]), "advmod"))
                head.left.append(adj)
        if self.p(0.22):
            head.left.append(_Node(self.choice(NOUNS + PROPER), "compound"))
        if depth < 3 and self.p(0.45):
            head.right.append(self.pp("nmod", depth + 1))
        if depth < 2 and self.p(0.12):
            head.right.append(self.relcl(depth + 1))
        if depth < 2 and self.p(0.07):
            conj = self.np("conj", depth + 1, False)
            conj.left.insert(0, _Node(self.choice(["and", "or"]), "cc"))
            head.right.append(conj)
        return head

    def pp(self, rel: str, depth: int) -> _Node:
        obj = self.np(rel, depth, allow_pron=self.p(0.2))
        obj.left.insert(0, _Node(self.choice(PREPS), "case"))
        return obj

    def relcl(self, depth: int) -> _Node:
        verb = self.choice(VERBS)
        v = _Node(verb[0], "acl:relcl")
        v.left.append(_Node(self.choice(["who", "which", "that"]), "nsubj"))
        if verb[3]:
            v.right.append(self.np("dobj", depth + 1))
        if self.p(0.3):
            v.right.append(self.pp("nmod", depth + 1))
        return v

    # clauses -----------------------------------------------------------
    def clause(self, rel: str, depth: int = 0, subject: bool = True) -> _Node:
        if self.p(0.15):
            return self.copular(rel, depth)
        past, part, base, trans, clausal = self.choice(VERBS)
        aux = None
        if self.p(0.3):
            aux = self.choice(AUX)
            form = part if aux in ("has", "had", "have") else base
        else:
            form = past
        v = _Node(form, rel)
        if depth > 0 and self.p(0.2):
            v.left.append(_Node(self.choice(SUBORD if rel == "advcl" else ["that"]), "mark"))
        if subject:
            v.left.append(self.np("nsubj", depth))
        if aux:
            v.left.append(_Node(aux, "aux"))
            if self.p(0.1):
                v.left.append(_Node("not", "neg"))
        if self.p(0.18):
            v.left.append(_Node(self.choice(ADVS), "advmod"))
        if clausal and depth < 3 and self.p(0.45):
            v.right.append(self.clause("ccomp", depth + 1))
        else:
            if trans and self.p(0.85):
                v.right.append(self.np("dobj", depth))
            for _ in range(2):
                if self.p(0.55 if depth == 0 else 0.3):
                    v.right.append(self.pp("nmod", depth + 1))
            if depth < 2 and self.p(0.12):
                x = _Node(self.choice(VERBS)[2], "xcomp")
                x.left.append(_Node("to", "mark"))
                if self.p(0.7):
                    x.right.append(self.np("dobj", depth + 1))
                v.right.append(x)
            if self.p(0.2):
                v.right.append(_Node(self.choice(TIMES), "nmod:tmod"))
            if depth < 3 and self.p(0.2):
                adv = self.clause("advcl", depth + 1)
                if not any(c.rel == "mark" for c in adv.left):
                    adv.left.insert(0, _Node(self.choice(SUBORD), "mark"))
                v.right.append(adv)
        return v

    def copular(self, rel: str, depth: int) -> _Node:
        cop = self.choice(COPULA).split()
        if self.p(0.5):
            pred = _Node(self.choice(ADJS), rel)
            if self.p(0.2):
                pred.left.append(_Node(self.choice(["very", "too", "so", "more"]), "advmod"))
        else:
            pred = self.np(rel, depth + 1, allow_pron=False)
        front = [self.np("nsubj", depth)]
        front += [_Node(w, "aux") for w in cop[:-1]] + [_Node(cop[-1], "cop")]
        pred.left[:0] = front
        if depth < 3 and self.p(0.4):
            pred.right.append(self.pp("nmod", depth + 1))
        return pred

    def sentence(self) -> DepTree:
        r = self.rng.random()
        if r < 0.25:
            # "..., " Subj said .
            inner = self.clause("ccomp", 1)
            verb = _Node(self.choice(REPORT), "")
            quote = self.p(0.5)
            if quote:
                verb.left.append(_Node('"', "punct"))
            verb.left.append(inner)
            verb.left.append(_Node(",", "punct"))
            if quote:
                verb.left.append(_Node('"', "punct"))
            verb.left.append(self.np("nsubj", 1))
            if self.p(0.3):
                verb.right.append(_Node(self.choice(TIMES), "nmod:tmod"))
            root = verb
        elif r < 0.45:
            # Subj said (that) clause .
            verb = _Node(self.choice(REPORT), "")
            verb.left.append(self.np("nsubj", 1))
            comp = self.clause("ccomp", 1)
            if self.p(0.4) and not any(c.rel == "mark" for c in comp.left):
                comp.left.insert(0, _Node("that", "mark"))
            verb.right.append(comp)
            root = verb
        else:
            root = self.clause("", 0)
            if self.p(0.2):
                # fronted adverbial
                fr = self.pp("nmod", 1) if self.p(0.6) else _Node(self.choice(ADVS), "advmod")
                root.left[:0] = [fr, _Node(",", "punct")]
            if self.p(0.4):
                conj = self.clause("conj", 1)
                root.right += [_Node(",", "punct"), _Node(self.choice(["and", "but"]), "cc"), conj]
        if self.p(0.3):
            root.right += [_Node(",", "punct"), self._according_to()]
        root.right.append(_Node(".", "punct"))
        return _flatten(root)

    def _according_to(self) -> _Node:
        src = self.np("nmod", 1, allow_pron=False)
        src.left[:0] = [_Node("according", "case"), _Node("to", "mwe")]
        return src

    def corpus(self, n: int) -> list[DepTree]:
        return [self.sentence() for _ in range(n)]


def news_corpus(n: int, seed: int = 0) -> list[DepTree]:
    return NewsGrammar(seed).corpus(n)


# -- memorization fixture -------------------------------------------------

def memorization_fixture(n: int = 32, seed: int = 0, min_len: int = 70) -> list[DepTree]:
    """``n`` distinct sentences that share as much structure as possible.

    Every sentence after the first differs from the first in exactly one
    place: either one word (with its descendants re-drawn) or one dropped
    leaf dependent.  A model that only sees the level input therefore has
    one unavoidable mistake per extra sentence, which keeps the best
    reachable accuracy close to 100% for long sentences.
    """
    rng = random.Random(seed)
    grammar = NewsGrammar(seed)
    pool = grammar.corpus(400)
    by_rel: dict[str, list[str]] = defaultdict(list)
    for t in pool:
        for tok in t.tokens:
            by_rel[tok.deprel].append(tok.form)
    base = None
    while base is None:
        parts = [grammar.sentence() for _ in range(3)]
        cand = _join_clauses(parts)
        if len(cand) >= min_len:
            base = cand
    out = [base]
    seen = {tuple(base.forms)}
    while len(out) < n:
        kind = "word" if len(out) % 2 else "drop"
        v = rng.randrange(len(base))
        if v == base.root:
            continue
        if kind == "word":
            choices = sorted(set(by_rel[base.tokens[v].deprel]) - {base.tokens[v].form})
            if not choices:
                continue
            forms = base.forms
            forms[v] = rng.choice(choices)
            for d in _descendants(base, v):
                opts = sorted(set(by_rel[base.tokens[d].deprel]))
                forms[d] = rng.choice(opts)
            cand = DepTree.from_lists(forms, base.heads, base.deprels)
        else:
            leaves = [c for c in base.children[v] if not base.children[c]]
            if not leaves:
                continue
            cand = _drop_token(base, rng.choice(leaves))
        key = tuple(cand.forms)
        if key not in seen:
            seen.add(key)
            out.append(cand)
    return out


def _descendants(tree: DepTree, v: int) -> list[int]:
    out, stack = [], list(tree.children[v])
    while stack:
        c = stack.pop()
        out.append(c)
        stack.extend(tree.children[c])
    return sorted(out)


def _drop_token(tree: DepTree, leaf: int) -> DepTree:
    keep = [i for i in range(len(tree)) if i != leaf]
    new = {old: k for k, old in enumerate(keep)}
    return DepTree.from_lists([tree.tokens[i].form for i in keep],
                              [ROOT if tree.tokens[i].head == ROOT else new[tree.tokens[i].head]
                               for i in keep],
                              [tree.tokens[i].deprel for i in keep])


def _join_clauses(trees: list[DepTree]) -> DepTree:
    """Coordinate several sentences under the first root: 'A ; and B ; and C .'"""
    forms, heads, rels = [], [], []
    first_root = None
    for k, t in enumerate(trees):
        toks = list(t.tokens)
        if toks[-1].form == "." and k < len(trees) - 1:
            toks = toks[:-1]
            if toks and toks[-1].form == ".":
                toks = toks[:-1]
        offset = len(forms)
        if k > 0:
            forms += [";", "and"]
            heads += [first_root, first_root]
            rels += ["punct", "cc"]
            offset += 2
        for tok in toks:
            forms.append(tok.form)
            if tok.head == ROOT:
                if first_root is None:
                    first_root = offset + tok.index
                    heads.append(ROOT)
                    rels.append(ROOT_LABEL)
                else:
                    heads.append(first_root)
                    rels.append("conj")
            else:
                heads.append(offset + tok.head)
                rels.append(tok.deprel)
    return DepTree.from_lists(forms, heads, rels)
