"""Command-line entry point: ``itexp <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (adjective_rate, bleu, format_table, self_bleu, speedup_stats,
                         style_curve, sweep, write_records)
from .generate import GenerationSettings, PredictorFailure, ZeroMassAfterMasking, generate
from .leveler import ChainMismatch, PadAtPlaceholder, levelize, read_levels, write_levels
from .neural import (CKPT_FORMAT, Divergence, ModelConfig, NeuralPredictor, SequenceTooLong,
                     encode_batch, grad_check, load_checkpoint, save_checkpoint, train)
from .predictor import EmpiricalModel, EmptyCorpus, fit_empirical
from .transform import apply_subword, binarize, learn_bpe, read_merges, write_merges
from .treebank import (TREES_FORMAT, SchemaMismatch, TreeError, is_projective, read_conllu,
                       read_trees, write_trees)
from .vocab import MalformedPattern, induce_vocabs, read_vocab, write_vocab

log = logging.getLogger("itexp")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_BAD_DATA = 5
EXIT_RUNTIME = 6


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _style_rule(text: str) -> tuple[str, float]:
    label, sep, factor = text.rpartition(":")
    try:
        if not sep or not label:
            raise ValueError
        return label, float(factor)
    except ValueError:
        raise argparse.ArgumentTypeError(f"style rule must look like LABEL:FACTOR, got {text!r}")


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("ITEXP_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ITEXP_SEED must be an integer, got {env!r}") from None


def _need(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(p)


def _projective_only(trees) -> list:
    kept = [t for t in trees if is_projective(t)]
    if len(kept) < len(trees):
        log.warning("skipped %d non-projective trees", len(trees) - len(kept))
    return kept


def load_predictor(model: str, vocab: str | None):
    """A neural checkpoint or an empirical count file, told apart by the header."""
    _need(model)
    with open(model, "rb") as f:
        first = f.readline()
    try:
        header = json.loads(first.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        header = None
    if isinstance(header, dict) and header.get("format") == CKPT_FORMAT:
        return NeuralPredictor.from_checkpoint(load_checkpoint(model))
    if isinstance(header, dict) and {"label", "token", "exp", "count"} <= header.keys():
        if vocab is None:
            raise UsageError("an empirical model needs --vocab")
        _need(vocab)
        return EmpiricalModel.load(model, read_vocab(vocab))
    raise SchemaMismatch(f"{model}: neither an {CKPT_FORMAT} checkpoint nor empirical counts")


# -- subcommands ----------------------------------------------------------

def cmd_ingest(args):
    _need(args.conllu)
    corpus = read_conllu(args.conllu)
    write_trees(args.out, corpus)
    print(json.dumps(corpus.stats()))


def cmd_binarize(args):
    _need(args.trees)
    write_trees(args.out, [binarize(t) for t in _projective_only(list(read_trees(args.trees)))])


def cmd_bpe_learn(args):
    _need(args.trees)
    merges = learn_bpe(read_trees(args.trees), args.merges)
    write_merges(args.out, merges)
    print(f"learned {len(merges.rules)} merges")


def cmd_bpe_apply(args):
    _need(args.trees, args.merges)
    merges = read_merges(args.merges)
    write_trees(args.out, [apply_subword(t, merges, args.left_attach) for t in read_trees(args.trees)])


def cmd_vocab(args):
    _need(args.trees)
    table = induce_vocabs(_projective_only(list(read_trees(args.trees))), args.min_freq)
    write_vocab(args.out, table)
    print(f"terminals {table.num_tokens}  expansions {table.num_expansions}")


def cmd_levelize(args):
    _need(args.trees)
    trees = _projective_only(list(read_trees(args.trees)))
    write_levels(args.out, [levelize(t) for t in trees])
    print(f"levelized {len(trees)} sentences")


def cmd_fit_empirical(args):
    _need(args.levels, args.vocab)
    table = read_vocab(args.vocab)
    model = fit_empirical([t for s in read_levels(args.levels) for t in s], table)
    model.save(args.out)
    print(f"contexts {len(model.full)}")


def cmd_train(args):
    _need(args.levels, args.vocab)
    table = read_vocab(args.vocab)
    transitions = [t for s in read_levels(args.levels) for t in s]
    cfg = ModelConfig(table.num_tokens, table.num_expansions, num_layers=args.layers,
                      num_heads=args.heads, embed_size=args.embed, ff_size=args.ff,
                      exp_layer=args.exp_layer, max_len=args.max_len,
                      learning_rate=args.lr, batch_size=args.batch_size, seed=_seed(args))

    def report(epoch, value):
        print(f"epoch {epoch + 1} loss {value:.6f}", flush=True)

    ckpt = train(transitions, table, cfg, args.epochs, callback=report)
    save_checkpoint(args.out, ckpt)


def cmd_grad_check(args):
    from .corpora import dog_tree

    tree = dog_tree()
    table = induce_vocabs([tree])
    steps = levelize(tree)
    cfg = ModelConfig(table.num_tokens, table.num_expansions, num_layers=2, num_heads=2,
                      embed_size=args.embed, ff_size=2 * args.embed,
                      max_len=max(len(t) for t in steps), seed=_seed(args))
    dtype = np.float64 if args.dtype == "float64" else np.float32
    rep = grad_check(cfg, encode_batch(steps, table, cfg.max_len), table.placeholder_ids,
                     step=args.step, dtype=dtype)
    rows = [{"array": k, "rel_error": v} for k, v in rep.per_array.items()]
    print(format_table(rows))
    verdict = "ok" if rep.ok(args.tolerance) else "FAILED"
    print(f"max relative error {rep.max_rel_error:.3e} over {rep.checked} entries: {verdict}")
    if not rep.ok(args.tolerance):
        return EXIT_RUNTIME
    return EXIT_OK


def _settings(args) -> GenerationSettings:
    return GenerationSettings(temperature=args.temperature, top_p=args.top_p,
                              style=tuple(args.style or ()), seed=_seed(args),
                              max_iterations=args.max_iterations)


def cmd_generate(args):
    predictor = load_predictor(args.model, args.vocab)
    out = generate(predictor, _settings(args), args.count, args.workers)
    text = "".join(g.text + "\n" for g in out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.trees_out:
        write_trees(args.trees_out, [g.tree for g in out])
    log.info("adjective rate %.4f", adjective_rate([g.tree for g in out]))


def _sentences(path) -> list[list[str]]:
    _need(path)
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if lines and lines[0].startswith("{") and TREES_FORMAT in lines[0]:
        return [list(t.forms) for t in read_trees(path)]
    return [line.split() for line in lines if line.strip()]


def cmd_eval_bleu(args):
    cands = _sentences(args.candidates)
    row = {"candidates": len(cands), "max_n": args.max_n}
    if args.references:
        row["bleu"] = bleu(cands, _sentences(args.references), args.max_n)
    row["self_bleu"] = self_bleu(cands, args.max_n, args.self_bleu_mode)
    print(format_table([row]))


def cmd_sweep(args):
    predictor = load_predictor(args.model, args.vocab)
    _need(args.validation)
    rep = sweep(predictor, args.temperatures, list(read_trees(args.validation)),
                samples=args.samples, sentences=args.sentences, top_p=args.top_p,
                seed=_seed(args), max_n=args.max_n, workers=args.workers,
                max_iterations=args.max_iterations, self_bleu_mode=args.self_bleu_mode)
    print(format_table(rep.records()))
    if args.out:
        write_records(args.out, rep.records())


def cmd_speedup(args):
    _need(args.trees)
    rep = speedup_stats(_projective_only(list(read_trees(args.trees))), bins=args.bins)
    print(format_table([{"trees": len(rep.lengths), **{f"mean_{k}": v for k, v in rep.means.items()},
                         "violations": rep.violations()}]))
    if args.out:
        write_records(args.out, rep.records())
    if args.histogram:
        write_records(args.histogram, [{"kind": k, "bin_low": lo, "bin_high": hi, "count": c}
                                       for k, rows in rep.histogram.items() for lo, hi, c in rows])


def cmd_style_eval(args):
    predictor = load_predictor(args.model, args.vocab)
    curve = style_curve(predictor, args.label, args.factors, args.count, _settings(args),
                        args.workers)
    rows = [{"factor": f, "adjectives_per_sentence": r} for f, r in curve]
    print(format_table(rows))
    if args.out:
        write_records(args.out, rows)


def cmd_synth_corpus(args):
    from .corpora import news_corpus

    write_trees(args.out, news_corpus(args.count, _seed(args)))


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itexp", description="Iterative expansion language models.")
    p.add_argument("--version", action="version", version=f"itexp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    def gen_flags(sp, count=True):
        sp.add_argument("--model", required=True)
        sp.add_argument("--vocab")
        sp.add_argument("--temperature", type=float, default=1.0)
        sp.add_argument("--top-p", type=float, default=0.9)
        sp.add_argument("--max-iterations", type=int, default=64)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, default=1)
        if count:
            sp.add_argument("--count", type=int, default=10)

    sp = add("ingest", cmd_ingest, "CoNLL-U to trees")
    sp.add_argument("--conllu", required=True)
    sp.add_argument("--out", required=True)

    sp = add("binarize", cmd_binarize, "binarize trees")
    sp.add_argument("--trees", required=True)
    sp.add_argument("--out", required=True)

    sp = add("bpe-learn", cmd_bpe_learn, "learn BPE merges")
    sp.add_argument("--trees", required=True)
    sp.add_argument("--merges", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = add("bpe-apply", cmd_bpe_apply, "split words into subword chains")
    sp.add_argument("--trees", required=True)
    sp.add_argument("--merges", required=True)
    sp.add_argument("--left-attach", choices=["last", "first"], default="last")
    sp.add_argument("--out", required=True)

    sp = add("vocab", cmd_vocab, "induce vocabularies")
    sp.add_argument("--trees", required=True)
    sp.add_argument("--min-freq", type=int, default=1)
    sp.add_argument("--out", required=True)

    sp = add("levelize", cmd_levelize, "cut trees into level transitions")
    sp.add_argument("--trees", required=True)
    sp.add_argument("--out", required=True)

    sp = add("fit-empirical", cmd_fit_empirical, "fit the count-based predictor")
    sp.add_argument("--levels", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "train the transformer predictor")
    sp.add_argument("--levels", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--heads", type=int, default=2)
    sp.add_argument("--embed", type=int, default=32)
    sp.add_argument("--ff", type=int, default=64)
    sp.add_argument("--exp-layer", type=int)
    sp.add_argument("--max-len", type=int, default=128)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--seed", type=int)

    sp = add("grad-check", cmd_grad_check, "verify backprop against finite differences")
    sp.add_argument("--dtype", choices=["float64", "float32"], default="float64")
    sp.add_argument("--tolerance", type=float)
    sp.add_argument("--embed", type=int, default=8)
    sp.add_argument("--step", type=float, default=1e-5)
    sp.add_argument("--seed", type=int)

    sp = add("generate", cmd_generate, "sample sentences")
    gen_flags(sp)
    sp.add_argument("--style", type=_style_rule, action="append", metavar="LABEL:FACTOR")
    sp.add_argument("--out")
    sp.add_argument("--trees-out")

    sp = add("eval-bleu", cmd_eval_bleu, "BLEU and self-BLEU of a sentence file")
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--references")
    sp.add_argument("--max-n", type=int, default=5)
    sp.add_argument("--self-bleu-mode", choices=["corpus", "mean"], default="corpus")

    sp = add("sweep", cmd_sweep, "quality and diversity across temperatures")
    gen_flags(sp, count=False)
    sp.add_argument("--validation", required=True)
    sp.add_argument("--temperatures", type=_floats, default=[0.7, 1.0, 1.2])
    sp.add_argument("--samples", type=int, default=5)
    sp.add_argument("--sentences", type=int, default=100)
    sp.add_argument("--max-n", type=int, default=5)
    sp.add_argument("--self-bleu-mode", choices=["corpus", "mean"], default="corpus")
    sp.add_argument("--out")

    sp = add("speedup", cmd_speedup, "decoding-step ratios")
    sp.add_argument("--trees", required=True)
    sp.add_argument("--bins", type=int, default=20)
    sp.add_argument("--out")
    sp.add_argument("--histogram")

    sp = add("style-eval", cmd_style_eval, "adjective rate under style multipliers")
    gen_flags(sp)
    sp.add_argument("--label", default="amod")
    sp.add_argument("--factors", type=_floats, default=[1.0, 10.0, 20.0, 50.0])
    sp.add_argument("--out")
    sp.set_defaults(style=None)

    sp = add("synth-corpus", cmd_synth_corpus, "write a synthetic news-style treebank")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    return p


def _validate(args) -> None:
    if args.command == "grad-check" and args.tolerance is None:
        args.tolerance = 1e-6 if args.dtype == "float64" else 1e-4
    for name in ("count", "samples", "sentences", "workers", "epochs", "merges", "min_freq"):
        v = getattr(args, name, None)
        if isinstance(v, int) and v < (0 if name == "merges" else 1):
            raise UsageError(f"--{name.replace('_', '-')} must be positive, got {v}")
    if getattr(args, "temperatures", None) is not None and not args.temperatures:
        raise UsageError("--temperatures is empty")


def _resolved(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    if "seed" in cfg:
        cfg["seed"] = _seed(args)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _validate(args)
        cfg = _resolved(args)
        print("config: " + json.dumps(cfg, default=str, sort_keys=True), file=sys.stderr)
        if "seed" in cfg:
            print(f"seed: {cfg['seed']}", file=sys.stderr)
        status = args.func(args)
        return EXIT_OK if status is None else status
    except UsageError as exc:
        print(f"itexp: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"itexp: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except SchemaMismatch as exc:
        print(f"itexp: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (TreeError, MalformedPattern, ChainMismatch, PadAtPlaceholder, EmptyCorpus,
            SequenceTooLong, json.JSONDecodeError, KeyError) as exc:
        print(f"itexp: bad input data: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except (Divergence, PredictorFailure, ZeroMassAfterMasking) as exc:
        print(f"itexp: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"itexp: invalid value: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA


if __name__ == "__main__":
    sys.exit(main())
