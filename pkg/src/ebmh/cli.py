"""Operator entry point: train oracles, sample, evaluate.

Subcommands: train-lm, train-clf, sample, intrinsic, eval. Run-style
commands read a single JSON config (a few flags override fields) and write
their artifacts plus a manifest listing every output with its hash; the
manifest is written atomically last. Exit codes: 0 success, 1 runtime
failure, 2 config or usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .adapter import AdapterClient, resolve_endpoint
from .energy import (EnergySpec, EnergyTerm, SimilarityScorer, StyleClassifier,
                     load_energy_spec, train_classifier)
from .engine import MHConfig, run_batch, write_trace_ndjson
from .evaluate import (intrinsic_eval, j_score, judge, make_fluency_judge,
                       paired_bootstrap)
from .ngram import NgramModel, train_corpus_lines
from .proposal import (AdapterBlockProposal, AncestralProposal, SpanBlockProposal,
                       SpanCfg, TokenMaskProposal)
from .seq import Vocab, build_vocab, tokenize


class UsageError(Exception):
    """Bad arguments or config; maps to exit code 2."""


# ------------------------------------------------------------------ helpers


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n",
                    encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, config_path: Path | None,
                    seed, artifacts: list[Path]) -> Path:
    manifest = {
        "command": command,
        "config": str(config_path) if config_path else None,
        "seed": seed,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "artifacts": [{"path": p.name, "sha256": _sha256(p)} for p in artifacts],
    }
    target = out_dir / "manifest.json"
    tmp = out_dir / "manifest.json.tmp"
    _write_json(tmp, manifest)
    os.replace(tmp, target)
    return target


def _field(cfg: dict, name: str, typ, default=None, required=False):
    if name not in cfg:
        if required:
            raise UsageError(f"config field '{name}' is required")
        return default
    v = cfg[name]
    if typ is float and isinstance(v, int):
        v = float(v)
    if not isinstance(v, typ):
        raise UsageError(f"config field '{name}' must be {typ.__name__}, "
                         f"got {type(v).__name__}")
    return v


def _respath(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _resolve_out_dir(flag_value: str | None, cfg_value: str | None,
                     config_path: Path) -> Path:
    if flag_value:
        return Path(flag_value)
    if cfg_value:
        return _respath(config_path.parent, cfg_value)
    return config_path.with_suffix(".out")


def _build_proposal(pcfg: dict, vocab: Vocab, base: Path):
    kind = pcfg.get("kind")
    if kind == "token-mask":
        model = NgramModel.load(_respath(base, pcfg["model"]), vocab)
        return TokenMaskProposal.from_model(model)
    if kind == "span-block":
        model = NgramModel.load(_respath(base, pcfg["model"]), vocab)
        cfg = SpanCfg(max_span=int(pcfg.get("max_span", 3)),
                      max_new=int(pcfg.get("max_new", 3)))
        return SpanBlockProposal(model, cfg)
    if kind == "ancestral":
        model = NgramModel.load(_respath(base, pcfg["model"]), vocab)
        return AncestralProposal(model)
    if kind == "adapter-block":
        client = AdapterClient(endpoint=resolve_endpoint(pcfg.get("endpoint")),
                               timeout=float(pcfg.get("timeout", 10.0)),
                               retries=int(pcfg.get("retries", 1)))
        return AdapterBlockProposal(client, vocab, pcfg.get("params"))
    raise UsageError(f"proposal.kind: unknown proposal kind {kind!r}")


def _build_mh_config(cfg: dict, base: Path, overrides: dict) -> MHConfig:
    merged = dict(cfg)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    vocab_path = _field(merged, "vocab", str, required=True)
    vocab = Vocab.load(_respath(base, vocab_path))
    pcfg = _field(merged, "proposal", dict, required=True)
    proposal = _build_proposal(pcfg, vocab, base)
    energy_cfg = merged.get("energy")
    if energy_cfg is None:
        raise UsageError("config field 'energy' is required")
    try:
        spec = load_energy_spec(
            energy_cfg, vocab, base_dir=base,
            client_factory=lambda ep: AdapterClient(endpoint=resolve_endpoint(ep)))
    except (ValueError, OSError) as exc:
        raise UsageError(f"energy: {exc}") from exc
    default_mode = "identity-variant" if pcfg.get("kind") == "adapter-block" else "strict"
    mh = MHConfig(
        steps=_field(merged, "steps", int, required=True),
        init_text=_field(merged, "init_text", str, required=True),
        vocab=vocab,
        energy=spec,
        proposal=proposal,
        batch_size=_field(merged, "batch_size", int, default=10),
        mode=_field(merged, "mode", str, default=default_mode),
        seed=_field(merged, "seed", int, default=0),
        burn_in=_field(merged, "burn_in", int, default=0),
        thinning=_field(merged, "thinning", int, default=1),
        on_error=_field(merged, "on_error", str, default="reject"),
        allow_empty=_field(merged, "allow_empty", bool, default=False),
    )
    try:
        mh.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return mh


# ------------------------------------------------------------------ commands


def cmd_train_lm(args) -> int:
    corpus_path = Path(args.corpus)
    lines = _read_lines(corpus_path)
    if not any(line.strip() for line in lines):
        raise UsageError(f"{corpus_path}: empty corpus")
    lines = [line for line in lines if line.strip()]
    vocab = build_vocab(lines, min_count=args.min_count, lowercase=args.lowercase)
    model = train_corpus_lines(lines, vocab, order=args.order, k=args.k,
                               max_len=args.max_len)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    vocab_path = out.with_name(out.stem + ".vocab.json")
    vocab.save(vocab_path)
    model.save(out, vocab_ref=vocab_path.name)
    print(f"wrote {out} and {vocab_path}")
    return 0


def cmd_train_clf(args) -> int:
    path_a, path_b = Path(args.class_a), Path(args.class_b)
    lines_a = [l for l in _read_lines(path_a) if l.strip()]
    lines_b = [l for l in _read_lines(path_b) if l.strip()]
    label_a = args.label_a or path_a.stem
    label_b = args.label_b or path_b.stem
    if label_a == label_b:
        raise UsageError("class labels must differ")
    if not lines_a or not lines_b:
        missing = path_a if not lines_a else path_b
        raise UsageError(f"{missing}: missing class corpus")
    clf = train_classifier({label_a: lines_a, label_b: lines_b},
                           smoothing=args.smoothing, lowercase=args.lowercase)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    clf.save(out)
    print(f"wrote {out}")
    return 0


def cmd_sample(args) -> int:
    config_path = Path(args.config)
    cfg = _load_json(config_path)
    base = config_path.parent
    overrides = {"steps": args.steps, "seed": args.seed,
                 "batch_size": args.batch_size, "mode": args.mode}
    mh = _build_mh_config(cfg, base, overrides)
    out_dir = _resolve_out_dir(args.out_dir, cfg.get("out_dir"), config_path)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = run_batch(mh)

    trace_path = out_dir / "trace.ndjson"
    write_trace_ndjson(result.traces, trace_path)
    summary_path = out_dir / "summary.json"
    _write_json(summary_path, result.summary())
    _write_manifest(out_dir, "sample", config_path, mh.seed,
                    [trace_path, summary_path])
    print(result.best.text)
    return 0


def cmd_intrinsic(args) -> int:
    config_path = Path(args.config)
    cfg = _load_json(config_path)
    base = config_path.parent
    vocab = Vocab.load(_respath(base, _field(cfg, "vocab", str, required=True)))
    model_path = _respath(base, _field(cfg, "model", str, required=True))
    if not model_path.exists():
        raise UsageError(f"model file not found: {model_path}")
    model = NgramModel.load(model_path, vocab)
    init_text = _field(cfg, "init_text", str, required=True)
    exact_n = _field(cfg, "exact_n", int, default=1000)
    seed = _field(cfg, "seed", int, default=0)
    target = EnergySpec((EnergyTerm("nll", 1.0, lambda s: -model.log_prob(s)),))

    samplers = []
    entries = _field(cfg, "samplers", list, required=True)
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "name" not in entry:
            raise UsageError(f"samplers[{i}]: each sampler needs a 'name'")
        pcfg = {k: v for k, v in entry.items()
                if k in ("kind", "model", "max_span", "max_new", "endpoint",
                         "params", "timeout", "retries")}
        pcfg.setdefault("model", str(model_path))
        proposal = _build_proposal(pcfg, vocab, base)
        default_mode = "identity-variant" if pcfg.get("kind") == "adapter-block" \
            else "strict"
        mh = MHConfig(
            steps=int(entry.get("steps", 10)),
            init_text=entry.get("init_text", init_text),
            vocab=vocab,
            energy=target,
            proposal=proposal,
            batch_size=int(entry.get("batch_size", 100)),
            mode=entry.get("mode", default_mode),
            seed=int(entry.get("seed", seed)),
        )
        try:
            mh.validate()
        except ValueError as exc:
            raise UsageError(f"samplers[{i}]: {exc}") from exc
        samplers.append((entry["name"], mh))

    report = intrinsic_eval(target, model, samplers, exact_n, seed=seed)

    out_dir = _resolve_out_dir(args.out_dir, cfg.get("out_dir"), config_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    _write_json(report_path, report.to_dict())
    hist_path = out_dir / "histogram.csv"
    with hist_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sampler", "sample_id", "energy"])
        writer.writerows(report.histogram_rows())
    _write_manifest(out_dir, "intrinsic", config_path, seed,
                    [report_path, hist_path])

    for stats in [report.exact] + report.samplers:
        print(f"{stats.name}: mean={stats.mean:.4f} sd={stats.stddev:.4f} "
              f"n={len(stats.energies)} budget={stats.forward_passes}")
    return 0


def _read_tsv(path: Path) -> list[tuple[str, str, str]]:
    rows = []
    for i, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise UsageError(f"{path}:{i}: expected 3 tab-separated fields "
                             f"(source, output, target), got {len(parts)}")
        rows.append((parts[0], parts[1], parts[2]))
    if not rows:
        raise UsageError(f"{path}: empty TSV")
    return rows


def cmd_eval(args) -> int:
    tsv_path = Path(args.tsv)
    judges_path = Path(args.judges)
    jcfg = _load_json(judges_path)
    base = judges_path.parent

    rows = _read_tsv(tsv_path)
    baseline_rows = _read_tsv(Path(args.baseline)) if args.baseline else None
    if baseline_rows is not None and len(baseline_rows) != len(rows):
        raise UsageError(f"baseline TSV has {len(baseline_rows)} rows, "
                         f"system TSV has {len(rows)}; items must pair up")

    clf = StyleClassifier.load(_respath(base, _field(jcfg, "classifier", str,
                                                     required=True)))
    target_label = _field(jcfg, "target_label", str, required=True)
    if target_label not in clf.labels:
        raise UsageError(f"target_label '{target_label}' not in classifier "
                         f"labels {list(clf.labels)}")
    fl_model = NgramModel.load(_respath(base, _field(jcfg, "fluency_model", str,
                                                     required=True)))
    tau = _field(jcfg, "fluency_tau", float, required=True)
    fl_judge = make_fluency_judge(fl_model, tau)
    sim_kind = _field(jcfg, "sim", str, default="token-f1")
    if sim_kind != "token-f1":
        raise UsageError(f"sim: unknown similarity kind '{sim_kind}'")
    scorer = SimilarityScorer()

    vocab_path = jcfg.get("vocab")
    if vocab_path:
        vocab = Vocab.load(_respath(base, vocab_path))
    else:
        texts = [t for row in rows for t in row]
        if baseline_rows:
            texts += [t for row in baseline_rows for t in row]
        vocab = build_vocab(texts, min_count=1,
                            lowercase=bool(jcfg.get("lowercase", False)))

    def judge_rows(data):
        return [judge(tokenize(o, vocab), tokenize(s, vocab), tokenize(t, vocab),
                      clf, fl_judge, scorer, target_label=target_label)
                for s, o, t in data]

    records = judge_rows(rows)
    metrics = {
        "n": len(records),
        "j_score": j_score(records),
        "acc": sum(r.acc for r in records) / len(records),
        "sim": sum(r.sim for r in records) / len(records),
        "fl": sum(r.fl for r in records) / len(records),
    }
    if baseline_rows is not None:
        bcfg = jcfg.get("bootstrap", {})
        records_b = judge_rows(baseline_rows)
        metrics["baseline_j_score"] = j_score(records_b)
        metrics["bootstrap"] = paired_bootstrap(
            records, records_b,
            resamples=int(bcfg.get("resamples", 10000)),
            alpha=float(bcfg.get("alpha", 0.05)),
            seed=int(bcfg.get("seed", 0)))

    text = json.dumps(metrics, ensure_ascii=False, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebmh",
        description="Block Metropolis-Hastings sampling and evaluation for "
                    "energy-based sequence models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-lm", help="train the n-gram oracle model")
    p.add_argument("corpus", help="text file, one sequence per line")
    p.add_argument("-o", "--out", required=True, help="model output path (JSON)")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--k", type=float, default=1.0, help="add-k smoothing constant")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--max-len", type=int, default=32)
    p.add_argument("--lowercase", action="store_true")
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("train-clf", help="train the two-class style classifier")
    p.add_argument("class_a", help="text file for the first class")
    p.add_argument("class_b", help="text file for the second class")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--label-a", default=None)
    p.add_argument("--label-b", default=None)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--lowercase", action="store_true")
    p.set_defaults(func=cmd_train_clf)

    p = sub.add_parser("sample", help="run a batch of MH chains from a config")
    p.add_argument("config", help="run config JSON")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--mode", default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("intrinsic", help="compare samplers against exact draws")
    p.add_argument("config")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_intrinsic)

    p = sub.add_parser("eval", help="style-transfer metrics over a TSV")
    p.add_argument("tsv", help="rows of source<TAB>output<TAB>target")
    p.add_argument("judges", help="judges config JSON")
    p.add_argument("--baseline", default=None,
                   help="baseline TSV for a paired bootstrap test")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
