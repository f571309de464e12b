"""Experiment runners: grid sweeps, replication and CSV emission.

Every task (grid point x replicate) derives its random streams from the
run seed and its grid coordinates alone, so serial and threaded runs
produce identical files. Data streams omit the estimator, privacy budget
and assumed ``alpha``, so all estimators at a grid point see the same
samples.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..datagen import CovarianceModel, sample_mvn, to_matrix_csv
from ..estimators import (
    AdaptiveConfig,
    Dataset,
    EstimateReport,
    TridiagonalConfig,
    adaptive_estimator,
    blockwise_tridiagonal,
    default_k0,
    naive_full_estimator,
    select_block_size,
)
from ..matrix_core import SymMatrix, frobenius_norm, operator_norm
from ..rng import RandomStream
from ..theory import RateSpec, fit_loglog_slope, rate_terms
from .config import ExperimentConfig

RESULT_COLUMNS = (
    "experiment", "estimator", "n", "d", "rho", "alpha", "k_used", "replicate",
    "seed", "err_op_sq", "err_frob_sq_over_d", "wall_ms",
)
SUMMARY_COLUMNS = (
    "experiment", "estimator", "n", "d", "rho", "alpha", "k_used", "replicates",
    "mean_err_op_sq", "se_err_op_sq", "mean_err_frob_sq_over_d", "se_err_frob_sq_over_d",
)
LEDGER_COLUMNS = (
    "experiment", "estimator", "n", "d", "rho", "alpha", "replicate",
    "allocations", "spent_rho", "declared_rho", "within_budget",
)
SLOPE_COLUMNS = ("series", "metric", "alpha", "slope", "intercept", "r2", "expected_slope")
DECISION_COLUMNS = ("level", "index", "rows", "cols", "statistic", "threshold", "kept")


def fmt(v) -> str:
    """CSV cell text: ``inf`` for infinity, ``repr`` for floats."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class GridPoint:
    index: int
    n: int
    d: int
    rho: float


@dataclass(frozen=True)
class Fit:
    """One estimator evaluation on one dataset."""

    estimator: str
    alpha: float
    k_used: int
    report: EstimateReport
    err_op_sq: float
    err_frob_sq_over_d: float
    wall_ms: Optional[float]


@dataclass
class RunResult:
    files: dict[str, Path]
    rows: list[dict]
    summary: list[dict]


def grid_points(cfg: ExperimentConfig) -> list[GridPoint]:
    pts: list[tuple[int, int, float]] = []
    if cfg.experiment == "convergence":
        pts = [(n, cfg.regime.d_for(n), cfg.regime.rho_for(n)) for n in cfg.grid.n]
    else:
        pts = [(n, d, rho) for n in cfg.grid.n for d in cfg.grid.d for rho in cfg.grid.rho]
    return [GridPoint(i, n, d, rho) for i, (n, d, rho) in enumerate(pts)]


def _block_sizes(cfg: ExperimentConfig, pt: GridPoint, alpha: float) -> list[int]:
    if cfg.grid.k == "auto":
        return [select_block_size(cfg.norm, pt.n, pt.d, pt.rho, alpha, cfg.block_mode)]
    return [min(k, pt.d) for k in cfg.grid.k]


def _k0(cfg: ExperimentConfig, n: int, d: int) -> int:
    k0 = default_k0(n) if cfg.k0 == "auto" else cfg.k0
    return min(k0, d)


def _errors(est: SymMatrix, sigma: np.ndarray) -> tuple[float, float]:
    diff = est.array - sigma
    return operator_norm(diff) ** 2, frobenius_norm(diff) ** 2 / sigma.shape[0]


def _timed(fn: Callable[[], EstimateReport], timing: bool):
    t0 = time.perf_counter()
    rep = fn()
    return rep, ((time.perf_counter() - t0) * 1e3 if timing else None)


def _fits_for(cfg: ExperimentConfig, pt: GridPoint, data: Dataset, sigma: np.ndarray, root: RandomStream, rep: int) -> list[Fit]:
    out: list[Fit] = []
    for name in cfg.estimators:
        noise = root.split("noise", name, pt.index, rep)
        if name == "tridiagonal":
            for a_idx, alpha in enumerate(cfg.grid.alpha):
                for k in _block_sizes(cfg, pt, alpha):
                    tcfg = TridiagonalConfig(k=k, rho=pt.rho, L=cfg.L)
                    stream = noise.split(a_idx, k)
                    report, ms = _timed(lambda: blockwise_tridiagonal(data, tcfg, stream), cfg.timing)
                    out.append(Fit(name, alpha, k, report, *_errors(report.estimate, sigma), ms))
        elif name == "adaptive":
            acfg = AdaptiveConfig(rho=pt.rho, k0=_k0(cfg, pt.n, pt.d), L=cfg.L, L1=cfg.L1, c0=cfg.c0, norm=cfg.norm)
            report, ms = _timed(lambda: adaptive_estimator(data, acfg, noise), cfg.timing)
            out.append(Fit(name, cfg.model.alpha, acfg.k0, report, *_errors(report.estimate, sigma), ms))
        elif name == "naive":
            report, ms = _timed(lambda: naive_full_estimator(data, pt.rho, cfg.L, noise), cfg.timing)
            out.append(Fit(name, cfg.model.alpha, pt.d, report, *_errors(report.estimate, sigma), ms))
    return out


class _ModelCache:
    """Covariance models keyed by dimension; filled before any worker starts."""

    def __init__(self, cfg: ExperimentConfig):
        self._cfg = cfg
        self._cache: dict[int, np.ndarray] = {}

    def get(self, d: int) -> np.ndarray:
        if d not in self._cache:
            m = self._cfg.model
            sigma = CovarianceModel(m.family, d, m.alpha, m.gamma, m.c, m.seed).build().to_numpy()
            self._cache[d] = sigma
        return self._cache[d]


def _run_tasks(cfg: ExperimentConfig, threads: int) -> list[tuple[GridPoint, int, np.ndarray, list[Fit]]]:
    root = RandomStream(cfg.seed)
    models = _ModelCache(cfg)
    for d in sorted({pt.d for pt in grid_points(cfg)}):
        models.get(d)
    tasks = [(pt, rep) for pt in grid_points(cfg) for rep in range(cfg.replicates)]

    def work(task):
        pt, rep = task
        sigma = models.get(pt.d)
        x = sample_mvn(sigma, pt.n, root.split("data", pt.n, pt.d, rep))
        fits = _fits_for(cfg, pt, Dataset(x), sigma, root, rep)
        return pt, rep, sigma, fits

    if threads <= 1:
        return [work(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, tasks))


def _result_row(cfg: ExperimentConfig, pt: GridPoint, rep: int, f: Fit) -> dict:
    return {
        "experiment": cfg.experiment,
        "estimator": f.estimator,
        "n": pt.n,
        "d": pt.d,
        "rho": pt.rho,
        "alpha": f.alpha,
        "k_used": f.k_used,
        "replicate": rep,
        "seed": cfg.seed,
        "err_op_sq": f.err_op_sq,
        "err_frob_sq_over_d": f.err_frob_sq_over_d,
        "wall_ms": "NA" if f.wall_ms is None else f"{f.wall_ms:.3f}",
    }


def _ledger_row(cfg: ExperimentConfig, pt: GridPoint, rep: int, f: Fit) -> dict:
    b = f.report.budget
    return {
        "experiment": cfg.experiment,
        "estimator": f.estimator,
        "n": pt.n,
        "d": pt.d,
        "rho": pt.rho,
        "alpha": f.alpha,
        "replicate": rep,
        "allocations": len(b.ledger),
        "spent_rho": b.spent,
        "declared_rho": b.total_rho,
        "within_budget": b.within_budget(),
    }


def _mean_se(v: list[float]) -> tuple[float, float]:
    a = np.asarray(v, dtype=float)
    se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
    return float(a.mean()), se


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and standard error per (estimator, grid point, alpha, k), in first-seen order."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (r["experiment"], r["estimator"], r["n"], r["d"], r["rho"], r["alpha"], r["k_used"])
        groups.setdefault(key, []).append(r)
    out = []
    for key, rs in groups.items():
        op_m, op_se = _mean_se([r["err_op_sq"] for r in rs])
        fr_m, fr_se = _mean_se([r["err_frob_sq_over_d"] for r in rs])
        out.append(dict(zip(SUMMARY_COLUMNS, (*key, len(rs), op_m, op_se, fr_m, fr_se))))
    return out


def write_csv(path: Path, columns, rows: list[dict]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


# --------------------------------------------------------------------------
# experiment-specific outputs
# --------------------------------------------------------------------------


def _expected_slopes(cfg: ExperimentConfig, alpha: float) -> dict[str, float]:
    """Exponents of n in each rate term along the configured regime."""
    reg = cfg.regime
    stat = -2 * alpha / (2 * alpha + 1)
    out = {"formula_statistical": stat}
    if math.isfinite(reg.rho_scale):
        # d / (rho n^2) = (d_scale / rho_scale) n^(d_exp - rho_exp - 2)
        out["formula_privacy"] = (reg.d_exponent - reg.rho_exponent - 2) * alpha / (alpha + 1)
    return out


def formula_self_test(cfg: ExperimentConfig) -> list[dict]:
    """Fit slopes to each rate term evaluated along the regime.

    Each term is an exact power of ``n`` there (up to rounding ``d``, which
    the self-test avoids by using the unrounded ``d_scale n^d_exponent``),
    so the fitted slope must equal the closed-form exponent.
    """
    reg = cfg.regime
    alpha = cfg.grid.alpha[0]
    expected = _expected_slopes(cfg, alpha)
    rows = []
    for series, want in expected.items():
        pts = []
        for n in cfg.grid.n:
            d = reg.d_scale * n**reg.d_exponent
            terms = rate_terms(RateSpec("operator", n, d, reg.rho_for(n), alpha))
            pts.append((n, terms.statistical if series == "formula_statistical" else terms.privacy))
        fit = fit_loglog_slope(pts)
        rows.append({"series": series, "metric": "rate", "alpha": alpha, "slope": fit.slope,
                     "intercept": fit.intercept, "r2": fit.r2, "expected_slope": want})
    return rows


def _convergence_slopes(cfg: ExperimentConfig, summary: list[dict]) -> list[dict]:
    alpha = cfg.grid.alpha[0]
    rate_slope = _overall_rate_slope(cfg, alpha)
    rows = []
    series: dict[tuple, list[dict]] = {}
    for s in summary:
        series.setdefault((s["estimator"], s["alpha"]), []).append(s)
    for (est, a), ss in series.items():
        if len({s["n"] for s in ss}) < 3:
            continue
        for metric, col in (("err_op_sq", "mean_err_op_sq"), ("err_frob_sq_over_d", "mean_err_frob_sq_over_d")):
            fit = fit_loglog_slope([(s["n"], s[col]) for s in ss])
            rows.append({"series": est, "metric": metric, "alpha": a, "slope": fit.slope,
                         "intercept": fit.intercept, "r2": fit.r2,
                         "expected_slope": rate_slope if metric == "err_op_sq" else float("nan")})
    return rows + formula_self_test(cfg)


def _overall_rate_slope(cfg: ExperimentConfig, alpha: float) -> float:
    """Slope of the full operator-norm rate along the regime's n grid."""
    pts = []
    for n in cfg.grid.n:
        reg = cfg.regime
        pts.append((n, rate_terms(RateSpec("operator", n, reg.d_scale * n**reg.d_exponent, reg.rho_for(n), alpha)).total))
    return fit_loglog_slope(pts).slope


def _mask_csv(mask: np.ndarray) -> str:
    return to_matrix_csv(mask.astype(float))


def _snapshot_files(cfg: ExperimentConfig, out: Path, results) -> dict[str, Path]:
    pt, rep, sigma, fits = results[0]
    tri = next(f for f in fits if f.estimator == "tridiagonal")
    ada = next(f for f in fits if f.estimator == "adaptive")
    files = {}

    def put(name, text):
        p = out / name
        p.write_text(text)
        files[name] = p

    put("sigma_true.csv", to_matrix_csv(sigma))
    put("tridiagonal_estimate.csv", to_matrix_csv(tri.report.estimate.array))
    put("adaptive_estimate.csv", to_matrix_csv(ada.report.estimate.array))
    put("tridiagonal_support.csv", _mask_csv(tri.report.support.membership))
    put("adaptive_support.csv", _mask_csv(ada.report.support.membership))
    kept = np.zeros((pt.d, pt.d), dtype=bool)
    for region in ada.report.kept_regions:
        m = region.mask(pt.d).membership
        kept |= m | m.T
    put("adaptive_kept_regions.csv", _mask_csv(kept))
    rows = []
    for t in ada.report.decisions:
        b = t.region.block
        rows.append({"level": t.region.level, "index": t.region.index,
                     "rows": f"{b.rows[0]}-{b.rows[1]}", "cols": f"{b.cols[0]}-{b.cols[1]}",
                     "statistic": t.statistic, "threshold": t.threshold, "kept": t.kept})
    files["adaptive_decisions.csv"] = write_csv(out / "adaptive_decisions.csv", DECISION_COLUMNS, rows)
    return files


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> RunResult:
    """Run ``cfg`` and write its CSVs under ``out_dir`` (default ``cfg.output_dir``).

    Always writes ``results.csv``, ``summary.csv`` and ``ledger.csv``;
    ``convergence`` adds ``slopes.csv``; ``estimator_snapshot`` adds matrix,
    support-mask and threshold-decision CSVs for its first grid point and
    replicate.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = _run_tasks(cfg, max(1, int(threads)))
    rows, ledger = [], []
    for pt, rep, _, fits in results:
        for f in fits:
            rows.append(_result_row(cfg, pt, rep, f))
            ledger.append(_ledger_row(cfg, pt, rep, f))
    summary = summarize(rows)
    files = {
        "results.csv": write_csv(out / "results.csv", RESULT_COLUMNS, rows),
        "summary.csv": write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary),
        "ledger.csv": write_csv(out / "ledger.csv", LEDGER_COLUMNS, ledger),
    }
    if cfg.experiment == "convergence":
        files["slopes.csv"] = write_csv(out / "slopes.csv", SLOPE_COLUMNS, _convergence_slopes(cfg, summary))
    if cfg.experiment == "estimator_snapshot":
        files.update(_snapshot_files(cfg, out, results))
    return RunResult(files, rows, summary)


def _run_kind(kind: str):
    def run(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> RunResult:
        if cfg.experiment != kind:
            raise ValueError(f"config is for {cfg.experiment!r}, not {kind!r}")
        return run_experiment(cfg, out_dir, threads)

    run.__name__ = f"run_{kind}"
    run.__doc__ = f"Run a ``{kind}`` config; see :func:`run_experiment`."
    return run


run_err_vs_rho = _run_kind("err_vs_rho")
run_convergence = _run_kind("convergence")
run_adaptive_compare = _run_kind("adaptive_compare")
run_estimator_snapshot = _run_kind("estimator_snapshot")
