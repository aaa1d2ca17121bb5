"""Command-line entry point: ``milexplain {synth,train,explain,eval,bench,run}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from ..checkpoint import load_checkpoint, save_checkpoint
from ..corpus import build_vocab, load_corpus, load_embeddings, write_embeddings, write_instances
from ..explainers import read_explanations, write_explanations
from ..model import RegularizerWeights, train
from ..tagger import TaggerConfig, train_tagger
from . import render, synth
from .bench import benchmark
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import _model_config, _train_config, method_runner, run_experiment
from .metrics import ContractError, token_prf

METHODS = ("attention", "lime", "anchors", "lstm-crf")


def _config(args):
    return load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()


def cmd_synth(args):
    cfg = synth.SynthConfig(n_train=args.n_train, n_dev=args.n_dev, n_test=args.n_test,
                            seed=args.seed, embed_dim=args.embed_dim)
    os.makedirs(args.out, exist_ok=True)
    for name, insts in synth.generate(cfg).items():
        write_instances(insts, os.path.join(args.out, f"{name}.jsonl"))
    words, matrix = synth.embeddings(cfg)
    write_embeddings(matrix, words, os.path.join(args.out, "embeddings.txt"))
    print(f"wrote {args.n_train}/{args.n_dev}/{args.n_test} instances and "
          f"{len(words)} vectors to {args.out}")


def cmd_train(args):
    cfg = _config(args)
    cfg.seed = args.seed if args.seed is not None else cfg.seed
    for key in ("alpha", "beta", "gamma", "tau"):
        if getattr(args, key) is not None:
            setattr(cfg.regularizers, key, getattr(args, key))
    for key in ("epochs", "lr", "warmup_epochs", "tag_weight"):
        if getattr(args, key) is not None:
            setattr(cfg.train, key, getattr(args, key))
    if args.hidden is not None:
        cfg.model.hidden = cfg.model.attend_dim = args.hidden
        cfg.model.cls_hidden = (args.hidden, args.hidden)
    tr, dv = load_corpus(args.train), load_corpus(args.dev)
    extra = load_corpus(args.test) if args.test else []
    vocab = build_vocab(tr + dv + extra)
    table = load_embeddings(args.embeddings, vocab, seed=cfg.seed)
    r = cfg.regularizers
    if args.kind == "lstm-crf":
        params, tlog = train_tagger(tr, dv, vocab, table, _model_config(cfg),
                                    _train_config(cfg, RegularizerWeights()),
                                    TaggerConfig(cfg.train.tag_weight))
        tau = None
    else:
        weights = RegularizerWeights(r.alpha, r.beta, r.gamma, r.tau)
        params, tlog = train(tr, dv, vocab, table, _model_config(cfg), _train_config(cfg, weights))
        tau = tlog["selected"]["tau"]
    save_checkpoint(args.out, params, vocab, args.kind,
                    {"tau": tau, "selected": tlog["selected"], "config": cfg.resolved()})
    sel = tlog["selected"]
    print(f"saved {args.out}: epoch {sel['epoch']}, dev accuracy {sel['dev_accuracy']:.4f}, "
          f"dev hypothesis F1 {sel['dev_hypothesis_f1']:.2f}" + (f", tau {tau}" if tau is not None else ""))


def _runner(args, cfg):
    params, vocab, meta = load_checkpoint(args.checkpoint)
    if args.method == "lstm-crf" and meta["kind"] != "lstm-crf":
        raise ConfigError("method lstm-crf needs a checkpoint trained with --kind lstm-crf")
    if args.method != "lstm-crf" and meta["kind"] != "attention":
        raise ConfigError(f"method {args.method} needs an attention checkpoint")
    tau = args.tau if getattr(args, "tau", None) is not None else meta["extra"].get("tau")
    if args.method == "attention" and tau is None:
        raise ConfigError("checkpoint has no tau; pass --tau")
    return method_runner(cfg, args.method, params, tau, vocab)


def _slice(insts, start, end):
    if start < 0 or (end is not None and end < start):
        raise ConfigError(f"bad instance range {start}:{end}")
    return insts[start:end]


def cmd_explain(args):
    cfg = _config(args)
    if args.lime_samples is not None:
        cfg.lime.n_samples = args.lime_samples
    run = _runner(args, cfg)
    insts = _slice(load_corpus(args.corpus), args.start, args.end)
    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            exps = list(pool.map(run, insts))
    else:
        exps = [run(i) for i in insts]
    write_explanations(exps, args.out)
    print(f"wrote {len(exps)} explanations to {args.out}")


def cmd_eval(args):
    exps = read_explanations(args.explanations)
    gold = _slice(load_corpus(args.gold), args.start, args.start + len(exps))
    report = token_prf(exps, gold, args.average)
    method = exps[0].method if exps else "?"
    print(render.score_table([(method, report, None)]), end="")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"method": method, "scores": report.to_record()}, fh, sort_keys=True)
            fh.write("\n")


def cmd_bench(args):
    cfg = _config(args)
    if args.lime_samples is not None:
        cfg.lime.n_samples = args.lime_samples
    run = _runner(args, cfg)
    insts = _slice(load_corpus(args.corpus), 0, args.limit)
    report, _ = benchmark(run, insts, args.repetitions, args.method)
    print(json.dumps(report.to_record(), sort_keys=True))
    return 0 if report.ok else 1


def cmd_run(args):
    cfg = load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    result = run_experiment(cfg)
    print(result.table, end="")
    print(f"report written to {result.out_dir}")


def build_parser():
    p = argparse.ArgumentParser(prog="milexplain", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate the synthetic corpus and embeddings")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-train", type=int, default=2000)
    s.add_argument("--n-dev", type=int, default=300)
    s.add_argument("--n-test", type=int, default=500)
    s.add_argument("--embed-dim", type=int, default=50)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a classifier or the CRF tagger")
    t.add_argument("--kind", choices=("attention", "lstm-crf"), default="attention")
    t.add_argument("--train", required=True)
    t.add_argument("--dev", required=True)
    t.add_argument("--test", help="extra split whose words join the vocabulary")
    t.add_argument("--embeddings", required=True)
    t.add_argument("--config")
    t.add_argument("--seed", type=int)
    for key in ("alpha", "beta", "gamma", "tau", "lr", "tag-weight"):
        t.add_argument(f"--{key}", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--warmup-epochs", type=int)
    t.add_argument("--hidden", type=int)
    t.add_argument("--out", required=True, help="checkpoint path (.npz)")
    t.set_defaults(func=cmd_train)

    def explain_args(q):
        q.add_argument("--checkpoint", required=True)
        q.add_argument("--corpus", required=True)
        q.add_argument("--method", choices=METHODS, required=True)
        q.add_argument("--config")
        q.add_argument("--tau", type=float)
        q.add_argument("--lime-samples", type=int)

    e = sub.add_parser("explain", help="explain a range of instances")
    explain_args(e)
    e.add_argument("--start", type=int, default=0)
    e.add_argument("--end", type=int)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_explain)

    v = sub.add_parser("eval", help="score explanations against gold highlights")
    v.add_argument("--explanations", required=True)
    v.add_argument("--gold", required=True)
    v.add_argument("--start", type=int, default=0, help="index of the first explained instance")
    v.add_argument("--average", choices=("micro", "macro"), default="micro")
    v.add_argument("--json")
    v.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="single-threaded per-instance timing")
    explain_args(b)
    b.add_argument("--repetitions", type=int, default=1)
    b.add_argument("--limit", type=int, default=50)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("run", help="full experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (ConfigError, ContractError, FileNotFoundError, ValueError) as err:
        print(f"milexplain {args.command}: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
