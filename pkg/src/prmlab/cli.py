"""Command-line surface: generation, training, evaluation, verification.

One flat JSON config document holds every module's settings under
namespaced keys ("gen.seed", "train.epochs", "loss.buffer_enabled", ...).
Command-line flags override file values, which override defaults. Every
artifact-producing run writes a manifest with the effective config,
input digests, output paths, and the active compute backend, and is
byte-reproducible from that manifest.

Exit codes: 0 success, 1 runtime or check failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__, kernels
from .ablation import run_ablation
from .datagen import GenConfig, generate
from .evaluate import (
    DEFAULT_SWEEP_GRID,
    DEFAULT_THRESHOLD,
    BonCandidate,
    BonProblem,
    bon_accuracy,
    prediction_log,
    report_from_log,
    sweep_threshold,
)
from .features import FeaturizerConfig
from .ingest import read_bon_problems, read_dataset, write_dataset, write_jsonl
from .model import (
    TrainConfig,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score_dataset,
    score_steps,
    train,
)
from .objective import LossConfig
from .theory import (
    gradcheck_model,
    verify_collapse_instability,
    verify_expected_grad_fd,
    verify_gradient_damping,
    verify_mc_consistency,
)

ENV_OUT_DIR = "PRMLAB_OUT_DIR"
ENV_WORKERS = "PRMLAB_WORKERS"


class ConfigError(Exception):
    """Invalid config file or flag value; maps to exit status 2."""


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


# (config key, argparse flag, type caster, default). The config file may
# carry keys of any command; each command reads only its own rows.
FEATURIZER_KEYS = [
    ("featurizer.dim", "--dim", int, 1024),
    ("featurizer.hash_seed", "--hash-seed", int, 0),
    ("featurizer.use_position", "--use-position", bool, True),
]

LOSS_KEYS = [
    ("loss.last_step_weight", "--alpha", float, 3.0),
    ("loss.buffer_enabled", "--buffer", bool, True),
    ("loss.mode", "--mode", str, "stochastic"),
]

TRAIN_KEYS = [
    ("train.learning_rate", "--lr", float, 1e-4),
    ("train.batch_size", "--batch-size", int, 16),
    ("train.epochs", "--epochs", int, 5),
    ("train.seed", "--seed", int, 0),
    ("model.hidden_dim", "--hidden", int, 64),
] + FEATURIZER_KEYS + LOSS_KEYS

GEN_KEYS = [
    ("gen.num_traces", "--num", int, 1000),
    ("gen.steps_min", "--steps-min", int, 3),
    ("gen.steps_max", "--steps-max", int, 10),
    ("gen.error_rate", "--error-rate", float, 0.5),
    ("gen.outcome_flip_rate", "--flip-rate", float, 0.1),
    ("gen.vocab_overlap", "--overlap", float, 0.3),
    ("gen.tokens_per_step", "--tokens-per-step", int, 12),
    ("gen.seed", "--seed", int, 0),
]

EVAL_KEYS = [("eval.threshold", "--threshold", float, DEFAULT_THRESHOLD)]

SWEEP_KEYS = [("sweep.grid", "--grid", _float_list, list(DEFAULT_SWEEP_GRID))]

BON_KEYS = [("bon.n_values", "--n", _int_list, [1, 2, 4, 8])]

ABLATE_KEYS = [
    ("ablate.seeds", "--seeds", _int_list, [0, 1, 2]),
    ("ablate.epochs", "--epochs", int, 16),
    ("ablate.learning_rate", "--lr", float, 1e-2),
    ("ablate.batch_size", "--batch-size", int, 16),
    ("ablate.hidden_dim", "--hidden", int, 64),
] + FEATURIZER_KEYS

THEORY_KEYS = [("theory.grid_resolution", "--grid-resolution", int, 100)]

MC_KEYS = [
    ("mc.points", "--points", int, 200),
    ("mc.samples", "--samples", int, 100_000),
    ("mc.seed", "--seed", int, 0),
]

GRADCHECK_KEYS = [
    ("gradcheck.trials", "--trials", int, 50),
    ("gradcheck.seed", "--seed", int, 0),
]

ALL_KEYS = {
    key
    for table in (
        TRAIN_KEYS, GEN_KEYS, EVAL_KEYS, SWEEP_KEYS, BON_KEYS,
        ABLATE_KEYS, THEORY_KEYS, MC_KEYS, GRADCHECK_KEYS,
    )
    for key, _, _, _ in table
}


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    for key in doc:
        if key not in ALL_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    return doc


def _flag_attr(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def _resolve(args: argparse.Namespace, doc: dict, table) -> dict:
    """Effective config for one command: flag > file > default."""
    effective = {}
    for key, flag, caster, default in table:
        value = getattr(args, _flag_attr(flag), None)
        if value is None and key in doc:
            raw = doc[key]
            try:
                if caster is bool:
                    if not isinstance(raw, bool):
                        raise ValueError("expected true/false")
                    value = raw
                elif caster in (_float_list, _int_list):
                    if not isinstance(raw, list):
                        raise ValueError("expected a list")
                    value = [(float if caster is _float_list else int)(v) for v in raw]
                else:
                    value = caster(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from exc
        if value is None:
            value = default
        effective[key] = value
    return effective


def _build(cfg: dict, ctor, mapping: dict):
    """Construct a config dataclass; ValueError becomes a ConfigError naming the key."""
    kwargs = {arg: cfg[key] for arg, key in mapping.items()}
    try:
        return ctor(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _featurizer(cfg: dict) -> FeaturizerConfig:
    return _build(cfg, FeaturizerConfig, {
        "dim": "featurizer.dim",
        "hash_seed": "featurizer.hash_seed",
        "use_position": "featurizer.use_position",
    })


def _out_path(path: str) -> str:
    base = os.environ.get(ENV_OUT_DIR)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_manifest(
    command: str, cfg: dict, inputs: dict[str, str], outputs: dict[str, str], path: str
) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "backend": kernels.backend_name(),
        "config": {k: cfg[k] for k in sorted(cfg)},
        "inputs": {name: {"path": p, "sha256": _sha256(p)} for name, p in sorted(inputs.items())},
        "outputs": {name: p for name, p in sorted(outputs.items())},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report_dict(report) -> dict:
    return dataclasses.asdict(report)


def cmd_gen(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, GEN_KEYS)
    gen_cfg = _build(cfg, GenConfig, {
        "num_traces": "gen.num_traces",
        "steps_min": "gen.steps_min",
        "steps_max": "gen.steps_max",
        "error_rate": "gen.error_rate",
        "outcome_flip_rate": "gen.outcome_flip_rate",
        "vocab_overlap": "gen.vocab_overlap",
        "tokens_per_step": "gen.tokens_per_step",
        "seed": "gen.seed",
    })
    workers = args.workers or int(os.environ.get(ENV_WORKERS, "1"))
    out = _out_path(args.out)
    traces = generate(gen_cfg, workers=workers)
    write_dataset(traces, out)
    _write_manifest("gen", cfg, {}, {"dataset": out}, out + ".manifest.json")
    print(f"wrote {len(traces)} traces to {out}")
    return 0


def _loss_config(cfg: dict) -> LossConfig:
    return _build(cfg, LossConfig, {
        "last_step_weight": "loss.last_step_weight",
        "buffer_enabled": "loss.buffer_enabled",
        "mode": "loss.mode",
    })


def cmd_train(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, TRAIN_KEYS)
    feat = _featurizer(cfg)
    loss_cfg = _loss_config(cfg)
    train_cfg = _build(
        cfg,
        lambda **kw: TrainConfig(loss=loss_cfg, **kw),
        {
            "learning_rate": "train.learning_rate",
            "batch_size": "train.batch_size",
            "epochs": "train.epochs",
            "seed": "train.seed",
        },
    )
    if cfg["model.hidden_dim"] < 0:
        raise ConfigError(f"model.hidden_dim must be >= 0, got {cfg['model.hidden_dim']}")
    out = _out_path(args.out)
    dataset = read_dataset(args.data)
    params = init_params(feat, hidden_dim=cfg["model.hidden_dim"], seed=train_cfg.seed)
    params, trace = train(dataset, params, train_cfg)
    save_checkpoint(params, out)
    loss_path = out + ".loss.json"
    _write_json({"epoch_mean_loss": trace}, loss_path)
    _write_manifest(
        "train", cfg, {"dataset": args.data},
        {"checkpoint": out, "loss_trace": loss_path}, out + ".manifest.json",
    )
    print(f"trained {train_cfg.epochs} epochs; loss {trace[0]:.6f} -> {trace[-1]:.6f}")
    return 0


def cmd_eval(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, EVAL_KEYS)
    threshold = cfg["eval.threshold"]
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"eval.threshold must be in (0, 1), got {threshold}")
    out = _out_path(args.out)
    dataset = read_dataset(args.data)
    params = load_checkpoint(args.ckpt)
    scores = score_dataset(dataset, params)
    log = prediction_log(dataset, scores, threshold)
    report = report_from_log(log, threshold)
    report_path = out + ".report.json"
    log_path = out + ".predictions.jsonl"
    _write_json(_report_dict(report), report_path)
    write_jsonl(log, log_path)
    _write_manifest(
        "eval", cfg, {"dataset": args.data, "checkpoint": args.ckpt},
        {"report": report_path, "predictions": log_path}, out + ".manifest.json",
    )
    print(
        f"f1={report.f1:.4f} error_acc={report.error_accuracy} "
        f"correct_acc={report.correct_accuracy} threshold={threshold}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, SWEEP_KEYS)
    grid = cfg["sweep.grid"]
    for th in grid:
        if not 0.0 < th < 1.0:
            raise ConfigError(f"sweep.grid entries must be in (0, 1), got {th}")
    if not grid:
        raise ConfigError("sweep.grid must be non-empty")
    out = _out_path(args.out)
    dataset = read_dataset(args.data)
    params = load_checkpoint(args.ckpt)
    scores = score_dataset(dataset, params)
    rows, best = sweep_threshold(dataset, scores, grid)
    table_path = out + ".sweep.json"
    scores_path = out + ".scores.jsonl"
    _write_json(
        {"rows": [_report_dict(r) for r in rows], "best_threshold": best}, table_path
    )
    # Raw per-step right scores let any row be recomputed independently.
    write_jsonl(
        (
            {
                "id": t.id,
                "gold": t.gold_first_error,
                "right_scores": [float(v) for v in s],
            }
            for t, s in zip(dataset, scores)
        ),
        scores_path,
    )
    _write_manifest(
        "sweep", cfg, {"dataset": args.data, "checkpoint": args.ckpt},
        {"table": table_path, "scores": scores_path}, out + ".manifest.json",
    )
    print(f"best threshold {best} over {len(rows)} rows")
    return 0


def cmd_bon(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, BON_KEYS)
    n_values = cfg["bon.n_values"]
    if not n_values or any(n < 1 for n in n_values):
        raise ConfigError(f"bon.n_values must be positive integers, got {n_values}")
    out = _out_path(args.out)
    params = load_checkpoint(args.ckpt)
    problems = []
    for p in read_bon_problems(args.candidates):
        cands = tuple(
            BonCandidate(
                right_scores=tuple(float(v) for v in score_steps(steps, params)),
                is_correct=bool(flag),
            )
            for steps, flag in zip(p["step_lists"], p["is_correct"])
        )
        problems.append(BonProblem(problem_id=p["problem_id"], candidates=cands))
    acc = bon_accuracy(problems, n_values)
    table_path = out + ".bon.json"
    _write_json({"accuracy": {str(n): acc[n] for n in n_values}}, table_path)
    _write_manifest(
        "bon", cfg, {"candidates": args.candidates, "checkpoint": args.ckpt},
        {"table": table_path}, out + ".manifest.json",
    )
    for n in n_values:
        print(f"n={n} accuracy={acc[n]:.4f}")
    return 0


def _finish_check(report, args: argparse.Namespace, command: str, cfg: dict) -> int:
    doc = _report_dict(report)
    print(json.dumps(doc, indent=2))
    if args.out:
        out = _out_path(args.out)
        report_path = out + ".report.json"
        _write_json(doc, report_path)
        _write_manifest(command, cfg, {}, {"report": report_path}, out + ".manifest.json")
    return 0 if report.passed else 1


def cmd_theory_check(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, THEORY_KEYS)
    damping = verify_gradient_damping(cfg["theory.grid_resolution"])
    collapse = verify_collapse_instability()
    fd = verify_expected_grad_fd()
    combined = {
        "gradient_damping": _report_dict(damping),
        "collapse_instability": _report_dict(collapse),
        "expected_grad_fd": _report_dict(fd),
    }
    passed = damping.passed and collapse.passed and fd.passed
    print(json.dumps(combined, indent=2))
    if args.out:
        out = _out_path(args.out)
        report_path = out + ".report.json"
        _write_json(combined, report_path)
        _write_manifest("theory-check", cfg, {}, {"report": report_path}, out + ".manifest.json")
    return 0 if passed else 1


def cmd_mc_check(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, MC_KEYS)
    report = verify_mc_consistency(
        points=cfg["mc.points"], samples=cfg["mc.samples"], seed=cfg["mc.seed"]
    )
    return _finish_check(report, args, "mc-check", cfg)


def cmd_gradcheck(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, GRADCHECK_KEYS)
    report = gradcheck_model(trials=cfg["gradcheck.trials"], seed=cfg["gradcheck.seed"])
    return _finish_check(report, args, "gradcheck", cfg)


def cmd_ablate(args: argparse.Namespace, doc: dict) -> int:
    cfg = _resolve(args, doc, ABLATE_KEYS)
    feat = _featurizer(cfg)
    out = _out_path(args.out)
    train_set = read_dataset(args.data)
    eval_set = read_dataset(args.eval_data)
    result = run_ablation(
        train_set,
        eval_set,
        seeds=cfg["ablate.seeds"],
        featurizer=feat,
        hidden_dim=cfg["ablate.hidden_dim"],
        epochs=cfg["ablate.epochs"],
        learning_rate=cfg["ablate.learning_rate"],
        batch_size=cfg["ablate.batch_size"],
    )
    table_path = out + ".ablation.json"
    _write_json(_report_dict(result), table_path)
    _write_manifest(
        "ablate", cfg, {"train": args.data, "eval": args.eval_data},
        {"table": table_path}, out + ".manifest.json",
    )
    print(f"{'buffer':>6} {'alpha':>5} {'mean_f1':>8}  per-seed")
    for c in result.cells:
        per_seed = " ".join(f"{v:.4f}" for v in c.seed_f1)
        print(f"{str(c.buffer_enabled):>6} {c.last_step_weight:>5} {c.mean_f1:>8.4f}  {per_seed}")
    print(f"baselines: always_clean f1={result.always_clean_f1} always_first f1={result.always_first_f1}")
    return 0


def _add_table_flags(parser: argparse.ArgumentParser, table) -> None:
    for key, flag, caster, _default in table:
        if caster is bool:
            parser.add_argument(
                flag, dest=_flag_attr(flag), action=argparse.BooleanOptionalAction,
                default=None, help=f"config key {key}",
            )
        else:
            parser.add_argument(
                flag, dest=_flag_attr(flag), type=caster, default=None,
                help=f"config key {key}",
            )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prmlab",
        description="Weakly supervised step-scorer laboratory.",
    )
    parser.add_argument("--config", default=None, help="flat JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    _add_table_flags(p, GEN_KEYS)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a step scorer")
    _add_table_flags(p, TRAIN_KEYS)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="first-error detection report")
    _add_table_flags(p, EVAL_KEYS)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="threshold sweep")
    _add_table_flags(p, SWEEP_KEYS)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bon", help="best-of-N reranking accuracy")
    _add_table_flags(p, BON_KEYS)
    p.add_argument("--candidates", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bon)

    p = sub.add_parser("theory-check", help="loss-surface guarantees")
    _add_table_flags(p, THEORY_KEYS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_theory_check)

    p = sub.add_parser("mc-check", help="sampled vs expected loss")
    _add_table_flags(p, MC_KEYS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mc_check)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _add_table_flags(p, GRADCHECK_KEYS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="objective ablation grid")
    _add_table_flags(p, ABLATE_KEYS)
    p.add_argument("--data", required=True, help="training dataset")
    p.add_argument("--eval-data", required=True, help="held-out dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        doc = _load_config_file(args.config)
        return args.func(args, doc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
