"""Experiment harness: single runs, sweeps, and report verification.

Output layout (one directory per run):

    <output_dir>/<run-id>/
        manifest.json        resolved config, its hash, seeds
        metrics-<seed>.csv   deterministic per-round metrics (learning curve)
        timings-<seed>.csv   wall-clock per round; observability only
        partition-<seed>.txt client index sets, for audit
        summary.json         final-accuracy mean/std across seeds

The metrics file is byte-reproducible from (config, seed): its first line
embeds the resolved config hash, floats are written with shortest
round-trip repr, and wall times live in the separate timings file.
Sweeps nest one run directory per axis value plus a comparison table.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .config import RunConfig, SweepSpec, resolve, set_axis_value
from .data import generate, heterogeneity_report, partition, save_partition, train_test_split
from .engine import ExperimentData, RoundMetrics, run_experiment
from .rng import RandomSource

METRICS_COLUMNS = ("round", "strategy", "accuracy", "loss", "grad_norm", "qp_activations")
SUMMARY_TOLERANCE = 1e-12


@dataclass
class SeedResult:
    seed: int
    metrics: list[RoundMetrics]
    divergence: float


@dataclass
class RunResult:
    run_dir: Path
    config_hash: str
    seed_results: list[SeedResult]
    summary: dict


@dataclass
class SweepResult:
    sweep_dir: Path
    axis: str
    rows: list[dict]
    runs: list[RunResult]


def execute_seed(cfg: RunConfig, seed: int) -> tuple[SeedResult, object]:
    """Generate data, split, partition, and run the engine for one seed."""
    rng = RandomSource(seed)
    features, labels = generate(cfg.synthetic, rng.derive("data/generate"))
    train, test = train_test_split(features, labels, cfg.test_fraction, rng.derive("data/split"))
    part = partition(train.labels, cfg.partition, rng.derive("data/partition"))
    divergence = heterogeneity_report(part, train.labels).divergence
    data = ExperimentData(train=train, partition=part, test=test)
    engine_cfg = replace(cfg.engine, seed=seed)
    metrics = run_experiment(engine_cfg, cfg.model, data)
    return SeedResult(seed=seed, metrics=metrics, divergence=divergence), part


def _fmt(value: float) -> str:
    return repr(float(value))


def write_metrics_csv(path: Path, metrics: list[RoundMetrics], strategy: str, cfg_hash: str) -> None:
    lines = [f"# config_hash={cfg_hash}", ",".join(METRICS_COLUMNS)]
    for m in metrics:
        lines.append(
            f"{m.round},{strategy},{_fmt(m.test_accuracy)},{_fmt(m.mean_train_loss)},"
            f"{_fmt(m.global_grad_norm)},{m.qp_activations}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_metrics_csv(path: Path) -> tuple[str, list[dict]]:
    """Independent reader for the metrics format; returns (config hash, rows)."""
    cfg_hash = ""
    rows: list[dict] = []
    header: list[str] | None = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key == "config_hash":
                cfg_hash = value
            continue
        if header is None:
            header = line.split(",")
            if tuple(header) != METRICS_COLUMNS:
                raise ValueError(f"unexpected metrics header in {path}: {header}")
            continue
        parts = line.split(",")
        rows.append(
            {
                "round": int(parts[0]),
                "strategy": parts[1],
                "accuracy": float(parts[2]),
                "loss": float(parts[3]),
                "grad_norm": float(parts[4]),
                "qp_activations": int(parts[5]),
            }
        )
    return cfg_hash, rows


def write_timings_csv(path: Path, metrics: list[RoundMetrics]) -> None:
    lines = ["round,wall_ms"]
    lines.extend(f"{m.round},{m.wall_ms}" for m in metrics)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _mean_std(values: list[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def _make_run_dir(base: Path, cfg_hash: str, prefix: str = "") -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S-%f")
    run_dir = base / f"{prefix}{stamp}-{cfg_hash[:12]}"
    suffix = 0
    while run_dir.exists():
        suffix += 1
        run_dir = base / f"{prefix}{stamp}-{cfg_hash[:12]}-{suffix}"
    run_dir.mkdir(parents=True)
    return run_dir


def run(cfg: RunConfig, run_dir: Path | None = None) -> RunResult:
    """Execute every seed, persist all artifacts, and summarize."""
    cfg_hash = cfg.hash
    if run_dir is None:
        run_dir = _make_run_dir(Path(cfg.output_dir), cfg_hash)
    else:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)

    manifest = {
        "kind": "run",
        "config_hash": cfg_hash,
        "config": cfg.resolved_dict(),
        "seeds": list(cfg.seeds),
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    seed_results: list[SeedResult] = []
    for seed in cfg.seeds:
        result, part = execute_seed(cfg, seed)
        seed_results.append(result)
        write_metrics_csv(
            run_dir / f"metrics-{seed}.csv", result.metrics, cfg.engine.strategy, cfg_hash
        )
        write_timings_csv(run_dir / f"timings-{seed}.csv", result.metrics)
        save_partition(run_dir / f"partition-{seed}.txt", part)

    finals = [r.metrics[-1].test_accuracy if r.metrics else 0.0 for r in seed_results]
    mean, std = _mean_std(finals)
    qp_means = [
        statistics.fmean([m.qp_activations for m in r.metrics]) if r.metrics else 0.0
        for r in seed_results
    ]
    summary = {
        "config_hash": cfg_hash,
        "strategy": cfg.engine.strategy,
        "num_rounds": cfg.engine.num_rounds,
        "seeds": list(cfg.seeds),
        "final_accuracy": {
            "per_seed": {str(r.seed): r.metrics[-1].test_accuracy if r.metrics else 0.0
                         for r in seed_results},
            "mean": mean,
            "std": std,
        },
        "mean_divergence": statistics.fmean([r.divergence for r in seed_results]),
        "mean_qp_activations": statistics.fmean(qp_means),
    }
    (run_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return RunResult(run_dir=run_dir, config_hash=cfg_hash, seed_results=seed_results, summary=summary)


def sweep(raw_config: dict, spec: SweepSpec, output_dir: Path | None = None) -> SweepResult:
    """One run per axis value, everything else (seeds included) held fixed."""
    base_cfg = resolve(raw_config)
    if output_dir is None:
        sweep_dir = _make_run_dir(Path(base_cfg.output_dir), base_cfg.hash, prefix="sweep-")
    else:
        sweep_dir = Path(output_dir)
        sweep_dir.mkdir(parents=True, exist_ok=True)

    manifest = {
        "kind": "sweep",
        "axis": spec.axis,
        "values": list(spec.values),
        "base_config_hash": base_cfg.hash,
        "base_config": base_cfg.resolved_dict(),
    }
    (sweep_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    rows: list[dict] = []
    runs: list[RunResult] = []
    for value in spec.values:
        point_cfg = resolve(set_axis_value(raw_config, spec.axis, value))
        point_dir = sweep_dir / f"{spec.axis}={value}"
        result = run(point_cfg, run_dir=point_dir)
        runs.append(result)
        rows.append(
            {
                "axis_value": value,
                "mean_final_accuracy": result.summary["final_accuracy"]["mean"],
                "std_final_accuracy": result.summary["final_accuracy"]["std"],
                "mean_divergence": result.summary["mean_divergence"],
                "mean_qp_activations": result.summary["mean_qp_activations"],
                "config_hash": result.config_hash,
            }
        )

    lines = [
        "axis_value,mean_final_accuracy,std_final_accuracy,mean_divergence,"
        "mean_qp_activations,config_hash"
    ]
    for row in rows:
        lines.append(
            f"{row['axis_value']},{_fmt(row['mean_final_accuracy'])},"
            f"{_fmt(row['std_final_accuracy'])},{_fmt(row['mean_divergence'])},"
            f"{_fmt(row['mean_qp_activations'])},{row['config_hash']}"
        )
    (sweep_dir / "comparison.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return SweepResult(sweep_dir=sweep_dir, axis=spec.axis, rows=rows, runs=runs)


def verify_run_dir(run_dir: Path) -> dict:
    """Independently recompute the summary from per-seed metrics files.

    Raises ValueError if the stored summary disagrees beyond 1e-12 or if any
    metrics file carries a mismatched config hash.
    """
    run_dir = Path(run_dir)
    summary = json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))
    finals: list[float] = []
    for seed in summary["seeds"]:
        cfg_hash, rows = read_metrics_csv(run_dir / f"metrics-{seed}.csv")
        if cfg_hash != summary["config_hash"]:
            raise ValueError(
                f"metrics-{seed}.csv hash {cfg_hash} != summary hash {summary['config_hash']}"
            )
        finals.append(rows[-1]["accuracy"] if rows else 0.0)
    mean, std = _mean_std(finals)
    if abs(mean - summary["final_accuracy"]["mean"]) > SUMMARY_TOLERANCE:
        raise ValueError(
            f"recomputed mean {mean!r} != stored {summary['final_accuracy']['mean']!r}"
        )
    if abs(std - summary["final_accuracy"]["std"]) > SUMMARY_TOLERANCE:
        raise ValueError(
            f"recomputed std {std!r} != stored {summary['final_accuracy']['std']!r}"
        )
    return {"recomputed_mean": mean, "recomputed_std": std, "summary": summary}


def report_lines(target_dir: Path) -> list[str]:
    """Human-readable report for a run or sweep directory, after verification."""
    target_dir = Path(target_dir)
    manifest = json.loads((target_dir / "manifest.json").read_text(encoding="utf-8"))
    lines: list[str] = []
    if manifest["kind"] == "run":
        check = verify_run_dir(target_dir)
        s = check["summary"]
        lines.append(f"run {target_dir.name} strategy={s['strategy']} rounds={s['num_rounds']}")
        lines.append(f"config_hash {s['config_hash']}")
        for seed, acc in sorted(s["final_accuracy"]["per_seed"].items(), key=lambda kv: int(kv[0])):
            lines.append(f"  seed {seed}: final accuracy {acc:.4f}")
        lines.append(
            f"  mean {s['final_accuracy']['mean']:.4f} +/- {s['final_accuracy']['std']:.4f} "
            f"(verified against per-seed files)"
        )
        lines.append(f"  mean divergence {s['mean_divergence']:.4f}")
        lines.append(f"  mean qp activations per round {s['mean_qp_activations']:.2f}")
        return lines
    if manifest["kind"] == "sweep":
        lines.append(f"sweep over {manifest['axis']}: {manifest['values']}")
        header = f"{'value':>12} {'mean_acc':>9} {'std':>8} {'divergence':>11} {'qp_act':>8}"
        lines.append(header)
        for value in manifest["values"]:
            point_dir = target_dir / f"{manifest['axis']}={value}"
            check = verify_run_dir(point_dir)
            s = check["summary"]
            lines.append(
                f"{value!s:>12} {s['final_accuracy']['mean']:>9.4f} "
                f"{s['final_accuracy']['std']:>8.4f} {s['mean_divergence']:>11.4f} "
                f"{s['mean_qp_activations']:>8.2f}"
            )
        return lines
    raise ValueError(f"unknown manifest kind {manifest['kind']!r}")
