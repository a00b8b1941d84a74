"""Seeded experiment harness and command-line entry point.

A grid config lists cells (d, q, k, m, learner, distribution kind, ...);
each cell runs `trials` independent repetitions, every trial owning its own
child random stream derived from the master seed, so results are identical
across runs and across worker counts.  Aggregates are emitted as CSV (the
data artifact), markdown (for reading), and SVG learning curves.

Config file (JSON):

    {
      "master_seed": 20260809,
      "workers": 1,
      "grid": [
        {"d": 10, "q": 3, "k": 1, "m": 2000, "s": 2000,
         "dist_kind": "centered", "learner": "spectral",
         "trials": 25, "test_size": 1000}
      ]
    }

Optional cell fields: flip_p (label-flip noise), offset (sample a nonzero
target offset), mixture_p (per-bag positive-count distribution over 0..q;
overrides k), baseline_candidates (random-baseline pool size), s (defaults
to m).
"""

from __future__ import annotations

import argparse
import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .numkit import RngStream, angle_min_dist, sample_std_normal
from .oracle import (
    GaussianSpec,
    LTF,
    OracleConfig,
    random_gaussian_spec,
    random_unit_vector,
    sample_bags,
    save_bags,
)
from .learners import (
    _bag_err_own_counts,
    bag_err_sample,
    learn_general,
    learn_mean_based,
    learn_spectral_homogeneous,
    random_ltf_baseline,
)

__all__ = [
    "ExperimentCell",
    "ExperimentConfig",
    "TrialResult",
    "AggregateRow",
    "load_config",
    "run_experiment",
    "aggregate",
    "emit",
    "parse_rows_csv",
    "main",
]

_DIST_KINDS = ("std", "centered", "general")
_LEARNERS = ("mean", "spectral", "general", "random")
_EVAL_BAGS = 200

CSV_COLUMNS = (
    "d,q,k,m,learner,dist_kind,trials,acc_mean,acc_stderr,angle_mean,seconds_mean"
)


@dataclass(frozen=True)
class ExperimentCell:
    d: int
    q: int
    k: int | None
    m: int
    learner: str
    dist_kind: str
    trials: int = 25
    test_size: int = 1000
    s: int | None = None
    flip_p: float = 0.0
    offset: bool = False
    mixture_p: tuple | None = None
    baseline_candidates: int = 100

    @property
    def s_eff(self) -> int:
        return self.m if self.s is None else self.s

    @property
    def k_label(self) -> int:
        return -1 if self.k is None else self.k

    @property
    def cell_id(self) -> str:
        tags = [
            f"d{self.d}",
            f"q{self.q}",
            f"k{self.k_label}",
            f"m{self.m}",
            self.learner,
            self.dist_kind,
        ]
        if self.flip_p > 0:
            tags.append(f"flip{self.flip_p}")
        if self.offset:
            tags.append("offset")
        if self.mixture_p is not None:
            tags.append("mixture")
        return "_".join(tags)

    @property
    def ambiguous(self) -> bool:
        """Cells whose two signed solutions are scored by the better one."""
        balanced = self.k is not None and 2 * self.k == self.q
        return balanced or self.flip_p > 0 or self.mixture_p is not None


@dataclass(frozen=True)
class ExperimentConfig:
    grid: tuple[ExperimentCell, ...]
    master_seed: int
    workers: int = 1
    out_dir: str = "results"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class TrialResult:
    cell_id: str
    cell_index: int
    trial: int
    accuracy: float
    angle: float
    bag_err: float
    seconds: float


@dataclass(frozen=True)
class AggregateRow:
    d: int
    q: int
    k: int
    m: int
    learner: str
    dist_kind: str
    trials: int
    acc_mean: float
    acc_stderr: float
    angle_mean: float
    seconds_mean: float


def _validate_cell(cell: ExperimentCell, index: int) -> None:
    where = f"cell {index} ({cell.cell_id})"
    if cell.d < 1 or cell.q < 1 or cell.m < 1 or cell.trials < 1 or cell.test_size < 1:
        raise ValueError(f"{where}: d, q, m, trials, test_size must be positive")
    if cell.dist_kind not in _DIST_KINDS:
        raise ValueError(f"{where}: unknown dist_kind {cell.dist_kind!r}")
    if cell.learner not in _LEARNERS:
        raise ValueError(f"{where}: unknown learner {cell.learner!r}")
    if cell.mixture_p is None:
        if cell.k is None or not 1 <= cell.k <= cell.q - 1:
            raise ValueError(f"{where}: need 1 <= k <= q-1")
    else:
        p = np.asarray(cell.mixture_p, dtype=float)
        if p.shape != (cell.q + 1,) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"{where}: mixture_p must be a probability vector over 0..q")
        if cell.learner in ("mean", "random"):
            raise ValueError(f"{where}: mixture cells support spectral/general learners")
    if not 0.0 <= cell.flip_p < 1.0:
        raise ValueError(f"{where}: flip_p must lie in [0, 1)")
    if cell.learner == "mean" and cell.k is not None and 2 * cell.k == cell.q:
        raise ValueError(f"{where}: mean learner cannot use balanced bags")


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = json.load(fh)
    cells = []
    for i, c in enumerate(raw.get("grid", [])):
        c = dict(c)
        if "mixture_p" in c and c["mixture_p"] is not None:
            c["mixture_p"] = tuple(float(v) for v in c["mixture_p"])
        cells.append(ExperimentCell(**c))
    cfg = ExperimentConfig(
        grid=tuple(cells),
        master_seed=int(raw["master_seed"]),
        workers=int(raw.get("workers", 1)),
        out_dir=str(raw.get("out_dir", "results")),
        formats=tuple(raw.get("formats", ["csv"])),
    )
    for i, cell in enumerate(cfg.grid):
        _validate_cell(cell, i)
    if not cfg.grid:
        raise ValueError("config grid is empty")
    return cfg


def _trial_instance(cell: ExperimentCell, rng: RngStream):
    """Draw the per-trial problem instance: target halfspace and Gaussian."""
    r_star = random_unit_vector(cell.d, rng)
    c_star = float(sample_std_normal(rng)) if cell.offset else 0.0
    if cell.dist_kind == "std":
        dist = GaussianSpec.standard(cell.d)
    else:
        dist = random_gaussian_spec(cell.d, rng, centered=cell.dist_kind == "centered")
    target = LTF(r_star, c_star)
    if cell.mixture_p is not None:
        cfg = OracleConfig(
            kind="mixed", q=cell.q, p=np.asarray(cell.mixture_p), target=target, dist=dist
        )
    elif cell.flip_p > 0:
        cfg = OracleConfig(
            kind="noisy", q=cell.q, k=cell.k, flip_p=cell.flip_p, target=target, dist=dist
        )
    else:
        cfg = OracleConfig(kind="exact", q=cell.q, k=cell.k, target=target, dist=dist)
    return target, dist, cfg


def _train(cell: ExperimentCell, cfg: OracleConfig, rng: RngStream):
    if cell.learner == "mean":
        return learn_mean_based(cfg, cell.m, rng)
    if cell.learner == "spectral":
        return learn_spectral_homogeneous(cfg, cell.m, cell.s_eff, rng)
    if cell.learner == "general":
        return learn_general(cfg, cell.m, cell.s_eff, rng)
    bags = sample_bags(cfg, cell.m, rng)
    return random_ltf_baseline(
        bags, cell.baseline_candidates, cfg.k, cell.q, rng, with_offset=cell.offset
    )


def _run_trial(payload) -> TrialResult:
    cell, cell_index, trial, master_seed = payload
    start = time.perf_counter()
    rng = RngStream(master_seed).child(cell_index).child(trial)
    target, dist, cfg = _trial_instance(cell, rng)
    hypothesis = _train(cell, cfg, rng)

    x_test = dist.sample(cell.test_size, rng)
    acc = float(np.mean(hypothesis.ltf.predict(x_test) == target.predict(x_test)))
    if cell.ambiguous:
        acc = max(acc, 1.0 - acc)
    angle = angle_min_dist(hypothesis.ltf.r, target.r)

    eval_bags = sample_bags(cfg, _EVAL_BAGS, rng)
    if cfg.kind == "mixed":
        bag_err = _bag_err_own_counts(hypothesis.ltf, eval_bags)
    else:
        bag_err = bag_err_sample(hypothesis.ltf, eval_bags, cfg.k, cfg.q)

    return TrialResult(
        cell_id=cell.cell_id,
        cell_index=cell_index,
        trial=trial,
        accuracy=acc,
        angle=angle,
        bag_err=bag_err,
        seconds=time.perf_counter() - start,
    )


def run_experiment(cfg: ExperimentConfig) -> list[TrialResult]:
    """Run every (cell, trial) pair; output order and values are seed-determined."""
    for i, cell in enumerate(cfg.grid):
        _validate_cell(cell, i)
    payloads = [
        (cell, ci, t, cfg.master_seed)
        for ci, cell in enumerate(cfg.grid)
        for t in range(cell.trials)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_trial, payloads, chunksize=1))
    else:
        results = [_run_trial(p) for p in payloads]
    results.sort(key=lambda r: (r.cell_index, r.trial))
    return results


def aggregate(results: list[TrialResult], grid: tuple[ExperimentCell, ...]) -> list[AggregateRow]:
    """Per-cell mean/stderr rows, sorted by (d, q, k, m, learner)."""
    if not results:
        raise ValueError("no results to aggregate")
    rows = []
    for ci, cell in enumerate(grid):
        cell_results = [r for r in results if r.cell_index == ci]
        if not cell_results:
            continue
        accs = np.array([r.accuracy for r in cell_results])
        angles = np.array([r.angle for r in cell_results])
        secs = np.array([r.seconds for r in cell_results])
        stderr = 0.0
        if accs.size > 1:
            stderr = float(np.std(accs, ddof=1) / np.sqrt(accs.size))
        rows.append(
            AggregateRow(
                d=cell.d,
                q=cell.q,
                k=cell.k_label,
                m=cell.m,
                learner=cell.learner,
                dist_kind=cell.dist_kind,
                trials=accs.size,
                acc_mean=float(accs.mean()),
                acc_stderr=stderr,
                angle_mean=float(angles.mean()),
                seconds_mean=float(secs.mean()),
            )
        )
    rows.sort(key=lambda r: (r.d, r.q, r.k, r.m, r.learner))
    return rows


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def rows_to_csv_text(rows: list[AggregateRow]) -> str:
    lines = [CSV_COLUMNS]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.d, r.q, r.k, r.m, r.learner, r.dist_kind, r.trials,
                    r.acc_mean, r.acc_stderr, r.angle_mean, r.seconds_mean,
                )
            )
        )
    return "\n".join(lines) + "\n"


def parse_rows_csv(path) -> list[AggregateRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            rows.append(
                AggregateRow(
                    d=int(rec["d"]),
                    q=int(rec["q"]),
                    k=int(rec["k"]),
                    m=int(rec["m"]),
                    learner=rec["learner"],
                    dist_kind=rec["dist_kind"],
                    trials=int(rec["trials"]),
                    acc_mean=float(rec["acc_mean"]),
                    acc_stderr=float(rec["acc_stderr"]),
                    angle_mean=float(rec["angle_mean"]),
                    seconds_mean=float(rec["seconds_mean"]),
                )
            )
    return rows


def _emit_markdown(rows: list[AggregateRow], path: Path) -> None:
    lines = [
        "| d | q | k | m | learner | dist | accuracy (%) | angle |",
        "|---|---|---|---|---------|------|--------------|-------|",
    ]
    for r in rows:
        acc = f"{100 * r.acc_mean:.2f} ±{100 * r.acc_stderr:.2f}"
        lines.append(
            f"| {r.d} | {r.q} | {r.k} | {r.m} | {r.learner} | {r.dist_kind} "
            f"| {acc} | {r.angle_mean:.4f} |"
        )
    path.write_text("\n".join(lines) + "\n")


def _emit_svg(rows: list[AggregateRow], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    families: dict[tuple, list[AggregateRow]] = {}
    for r in rows:
        families.setdefault((r.d, r.q, r.k, r.learner, r.dist_kind), []).append(r)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key, fam in sorted(families.items()):
        fam.sort(key=lambda r: r.m)
        ms = [r.m for r in fam]
        accs = [100 * r.acc_mean for r in fam]
        errs = [100 * r.acc_stderr for r in fam]
        label = f"d={key[0]} q={key[1]} k={key[2]} {key[3]}/{key[4]}"
        ax.errorbar(ms, accs, yerr=errs, marker="o", capsize=3, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("training bags m")
    ax.set_ylabel("test accuracy (%)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit(rows: list[AggregateRow], formats, out_dir) -> list[Path]:
    """Write the aggregate table in the requested formats; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out / "results.csv"
            path.write_text(rows_to_csv_text(rows))
        elif fmt == "markdown":
            path = out / "results.md"
            _emit_markdown(rows, path)
        elif fmt == "svg_learning_curve":
            path = out / "learning_curves.svg"
            _emit_svg(rows, path)
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written


def _dump_cell_bags(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Write each cell's trial-0 training-bag sample (first batch) as CSV."""
    written = []
    for ci, cell in enumerate(cfg.grid):
        rng = RngStream(cfg.master_seed).child(ci).child(0)
        _, _, oracle_cfg = _trial_instance(cell, rng)
        bags = sample_bags(oracle_cfg, cell.m, rng)
        path = out / f"bags_{cell.cell_id}.csv"
        save_bags(path, bags, fmt="csv")
        written.append(path)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="llpgauss",
        description="Run seeded bag-learning experiment grids and emit result tables.",
    )
    parser.add_argument("--config", required=True, help="JSON grid config path")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--trials", type=int, default=None, help="per-cell trials override")
    parser.add_argument(
        "--format",
        default=None,
        help="comma list of: csv, markdown, svg_learning_curve",
    )
    parser.add_argument("--workers", type=int, default=None, help="parallel trial workers")
    parser.add_argument(
        "--dump-bags", action="store_true", help="also dump each cell's training bags"
    )
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.trials is not None:
        cfg = replace(
            cfg, grid=tuple(replace(c, trials=args.trials) for c in cfg.grid)
        )
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.format is not None:
        cfg = replace(cfg, formats=tuple(args.format.split(",")))

    results = run_experiment(cfg)
    rows = aggregate(results, cfg.grid)
    written = emit(rows, cfg.formats, cfg.out_dir)
    if args.dump_bags:
        written += _dump_cell_bags(cfg, Path(cfg.out_dir))
    for row in rows:
        print(
            f"d={row.d} q={row.q} k={row.k} m={row.m} {row.learner}/{row.dist_kind}: "
            f"acc {100 * row.acc_mean:.2f}% ±{100 * row.acc_stderr:.2f} "
            f"angle {row.angle_mean:.4f}"
        )
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
