"""End-to-end experiment: train or load models, explain the test split, score.

Outputs (under ``out_dir``):

* ``config.yaml``       resolved configuration
* ``scores.jsonl``      one token-score record per method (no timings, so
                        reruns with the same seeds are byte-identical)
* ``runtime.jsonl``     one runtime record per method
* ``explanations/<method>.jsonl``
* ``checkpoints/<model>.npz`` for every model trained here
* ``table.txt``, ``highlights.html``, ``highlights.ansi``
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

from ..checkpoint import load_checkpoint, save_checkpoint
from ..corpus import LABELS, build_vocab, load_corpus, load_embeddings
from ..explainers import (
    Explanation,
    ModelHandle,
    anchors_explain_pair,
    attention_explain,
    lime_explain_pair,
    write_explanations,
)
from ..model import ModelConfig, RegularizerWeights, TrainConfig, encode_instances, train
from ..tagger import TaggerConfig, encode_tagged, tagger_explain, train_tagger
from . import render, synth
from .bench import benchmark
from .config import ConfigError, dump_config
from .metrics import token_prf

log = logging.getLogger(__name__)

# attention variants: which regularizers are switched on
VARIANTS = {
    "attention": (False, False, False),
    "attention+r1": (True, False, False),
    "attention+r2r3": (False, True, True),
    "attention+mil": (True, True, True),
}
# black-box methods explain the unregularized classifier
BLACK_BOX_MODEL = "attention"


@dataclass
class ExperimentResult:
    scores: dict
    runtimes: dict
    explanations: dict
    table: str
    out_dir: str
    paths: dict = field(default_factory=dict)


def _model_for(method):
    if method in VARIANTS:
        return method
    if method in ("lime", "anchors"):
        return BLACK_BOX_MODEL
    return "lstm-crf"


def validate(cfg):
    """Check every referenced file before any compute starts."""
    missing = []
    c = cfg.corpus
    if not c.synthetic:
        for name in ("train", "dev", "test"):
            path = getattr(c, name)
            needs = name == "test" or any(_model_for(m) not in cfg.checkpoints for m in cfg.methods)
            if path is None and needs:
                missing.append(f"corpus.{name} (not set)")
            elif path is not None and not os.path.isfile(path):
                missing.append(f"corpus.{name}: {path}")
        if c.embeddings is None:
            if any(_model_for(m) not in cfg.checkpoints for m in cfg.methods):
                missing.append("corpus.embeddings (not set)")
        elif not os.path.isfile(c.embeddings):
            missing.append(f"corpus.embeddings: {c.embeddings}")
    for model, path in cfg.checkpoints.items():
        if model not in VARIANTS and model != "lstm-crf":
            raise ConfigError(f"checkpoint given for unknown model {model!r}")
        if not os.path.isfile(path):
            missing.append(f"checkpoints.{model}: {path}")
    if missing:
        raise ConfigError("missing inputs: " + "; ".join(missing))


def load_data(cfg):
    c = cfg.corpus
    if c.synthetic:
        sc = synth.SynthConfig(n_train=c.n_train, n_dev=c.n_dev, n_test=c.n_test,
                               seed=c.synth_seed)
        data, vocab, table = synth.bundle(sc)
        return data, vocab, table
    data = {name: load_corpus(getattr(c, name)) if getattr(c, name) else []
            for name in ("train", "dev", "test")}
    vocab = build_vocab(data["train"] + data["dev"] + data["test"])
    table = load_embeddings(c.embeddings, vocab, seed=cfg.seed) if c.embeddings else None
    return data, vocab, table


def _train_config(cfg, weights):
    t = cfg.train
    return TrainConfig(epochs=t.epochs, batch_size=t.batch_size, lr=t.lr, seed=cfg.seed,
                       weights=weights, accuracy_margin=t.accuracy_margin,
                       warmup_epochs=t.warmup_epochs)


def _model_config(cfg):
    m = cfg.model
    return ModelConfig(hidden=m.hidden, attend_dim=m.attend_dim, cls_hidden=tuple(m.cls_hidden),
                       attention_eps=m.attention_eps, init_seed=cfg.seed)


def variant_weights(cfg, variant):
    r = cfg.regularizers
    on1, on2, on3 = VARIANTS[variant]
    return RegularizerWeights(r.alpha if on1 else 0.0, r.beta if on2 else 0.0,
                              r.gamma if on3 else 0.0, r.tau)


def obtain_model(cfg, name, data, vocab, table, ckpt_dir):
    """Return ``(params, tau)``; loads from ``cfg.checkpoints`` when given."""
    if name in cfg.checkpoints:
        params, _, meta = load_checkpoint(cfg.checkpoints[name], vocab)
        return params, meta["extra"].get("tau")
    log.info("training %s", name)
    if name == "lstm-crf":
        params, tlog = train_tagger(data["train"], data["dev"], vocab, table, _model_config(cfg),
                                    _train_config(cfg, RegularizerWeights()),
                                    TaggerConfig(cfg.train.tag_weight))
        tau = None
    else:
        params, tlog = train(data["train"], data["dev"], vocab, table, _model_config(cfg),
                             _train_config(cfg, variant_weights(cfg, name)))
        tau = tlog["selected"]["tau"]
    path = os.path.join(ckpt_dir, name.replace("+", "_") + ".npz")
    save_checkpoint(path, params, vocab, "lstm-crf" if name == "lstm-crf" else "attention",
                    {"tau": tau, "selected": tlog["selected"]})
    return params, tau


def method_runner(cfg, method, params, tau, vocab):
    """One-argument callable ``instance -> Explanation`` for benchmarking."""
    if method in VARIANTS:
        def run(inst):
            pair = encode_instances([inst], vocab)[0]
            exp = attention_explain(params, pair, tau)
            exp.method = method
            return exp
    elif method == "lime":
        handle = ModelHandle(params, vocab)

        def run(inst):
            return lime_explain_pair(handle, inst, cfg.lime)
    elif method == "anchors":
        handle = ModelHandle(params, vocab)

        def run(inst):
            return anchors_explain_pair(handle, inst, cfg.anchors)
    else:
        def run(inst):
            return tagger_explain(params, encode_tagged([inst], vocab)[0])
    run.__name__ = method
    return run


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def run_experiment(cfg):
    validate(cfg)
    out = cfg.out_dir
    ckpt_dir = os.path.join(out, "checkpoints")
    exp_dir = os.path.join(out, "explanations")
    for d in (out, ckpt_dir, exp_dir):
        os.makedirs(d, exist_ok=True)
    dump_config(cfg, os.path.join(out, "config.yaml"))
    resolved = cfg.resolved()

    data, vocab, table = load_data(cfg)
    test = data["test"]
    models = {}
    scores, runtimes, explanations = {}, {}, {}
    for method in cfg.methods:
        name = _model_for(method)
        if name not in models:
            models[name] = obtain_model(cfg, name, data, vocab, table, ckpt_dir)
        params, tau = models[name]
        limit = cfg.explain_limit.get(method, cfg.limit)
        subset = test[:limit] if limit else test
        report, outputs = benchmark(method_runner(cfg, method, params, tau, vocab), subset,
                                    name=method)
        filled = [e if e is not None else Explanation((), (), method) for e in outputs]
        scores[method] = token_prf(filled, subset, cfg.average)
        runtimes[method] = report
        explanations[method] = outputs
        write_explanations(filled, os.path.join(exp_dir, method.replace("+", "_") + ".jsonl"))
        log.info("%s: hypothesis F1 %.2f, mean %.4fs", method, scores[method].hypothesis.f1,
                 report.mean or float("nan"))

    _write_jsonl(os.path.join(out, "scores.jsonl"), [
        {"method": m, "tau": models[_model_for(m)][1], "failures": runtimes[m].failures,
         "scores": s.to_record(), "config": resolved} for m, s in scores.items()])
    _write_jsonl(os.path.join(out, "runtime.jsonl"), [
        {**r.to_record(), "config": resolved} for r in runtimes.values()])
    table_text = render.score_table((m, scores[m], runtimes[m]) for m in cfg.methods)
    with open(os.path.join(out, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table_text)
    with open(os.path.join(out, "highlights.html"), "w", encoding="utf-8") as fh:
        fh.write(render.html_report("Token-level explanations", table_text, test,
                                    explanations, LABELS))
    with open(os.path.join(out, "highlights.ansi"), "w", encoding="utf-8") as fh:
        for n, inst in enumerate(test[:20]):
            for method, exps in explanations.items():
                if n < len(exps) and exps[n] is not None:
                    fh.write(render.ansi_instance(inst, exps[n], LABELS) + "\n")
            fh.write("\n")
    return ExperimentResult(scores, runtimes, explanations, table_text, out,
                            {"scores": os.path.join(out, "scores.jsonl"),
                             "runtime": os.path.join(out, "runtime.jsonl")})
