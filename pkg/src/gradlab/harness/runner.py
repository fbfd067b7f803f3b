"""Experiment orchestration: single runs, sweeps, studies, reports."""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .. import __version__
from ..bernstein import (
    levelset_scan,
    maximal_regularity_norm,
    thm1_ledger,
    thm2_ledger,
    weak_identity_check,
)
from ..errors import ConfigError, RegimeError
from ..grid import Box, ScalarField, build_grid, gradient, lp_norm
from ..model.exponents import build_exponent_table, effective_sobolev_dimension
from ..model.problem import ProblemSpec
from ..model.sources import Tabulated
from ..solver import SolverOptions, solve
from .config import RunConfig
from .records import persist_record, load_record

_SWEEP_AXES = ("eps", "scale", "h", "k", "lambda")


@dataclass
class ExperimentResult:
    payload: dict
    meta: dict
    u: ScalarField
    path: Path | None
    fresh: bool


def _patched_text(text: str, key: str, value: str) -> str:
    """Replace one ``key = value`` line of a canonical config text."""
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.startswith(f"{key} = "):
            lines[i] = f"{key} = {value}"
            return "\n".join(lines) + "\n"
    # key was defaulted and has no line; append it under its section is not
    # possible without section tracking, so refuse rather than guess
    raise ConfigError(f"cannot patch config: no explicit {key!r} entry")


def _norm_table(config: RunConfig, problem: ProblemSpec, u: ScalarField, table) -> dict:
    du = gradient(u)
    vol = u.grid.cell_volume
    norms = {
        "u_l2": float(np.sqrt(np.sum(u.values**2) * vol)),
        "u_linf": float(np.max(np.abs(u.values))),
        "du_l2": lp_norm(du, 2.0),
        "du_qgamma": lp_norm(du, float(config.q * config.gamma)),
    }
    if table.eta1 is not None:
        norms["du_eta"] = lp_norm(du, float(table.eta1))
    maxreg = maximal_regularity_norm(u, float(config.maxreg_q), float(config.gamma))
    norms["maxreg"] = maxreg.value
    norms["maxreg_agreement"] = maxreg.relative_agreement
    return norms


def run_experiment(
    config: RunConfig,
    out_dir: str | Path | None = None,
    initial: ScalarField | None = None,
    sweep_tag: tuple | None = None,
) -> ExperimentResult:
    """Solve one config and evaluate its requested analyses.

    The returned payload is deterministic for a given config and initial
    iterate; timing and provenance go to the meta side of the record.
    """
    problem = config.build_problem()
    grid = config.build_grid()
    t0 = time.perf_counter()
    u, report = solve(
        problem, grid, config.solver, initial=initial, continuation=config.continuation
    )
    wall = time.perf_counter() - t0

    table = build_exponent_table(
        grid.ndim,
        config.p,
        config.gamma,
        config.q,
        lam=config.lam,
        beta=config.beta,
        sobolev_dim=config.sobolev_dim,
    )

    payload: dict = {
        "config_digest": config.digest(),
        "parameters": {
            "p": str(config.p),
            "gamma": str(config.gamma),
            "lambda": str(config.lam),
            "q": str(config.q),
            "eps": config.eps,
            "beta": str(config.beta),
            "source_kind": config.source_kind,
            "source_params": {
                k: list(v) if isinstance(v, tuple) else v
                for k, v in config.source_params.items()
            },
            "extents": list(config.extents),
            "cells": list(config.cells),
            "sobolev_dim": table.sobolev_dim,
        },
        "solve": {
            "converged": report.converged,
            "residual_norm": report.residual_norm,
            "total_iterations": report.total_iterations,
            "stages": [
                {
                    "eps": s.eps,
                    "gamma": s.gamma,
                    "iterations": s.iterations,
                    "residual_norm": s.residual_norm,
                }
                for s in report.stages
            ],
        },
        "exponents": table.to_dict(),
        "norms": _norm_table(config, problem, u, table),
        "ledgers": {},
    }

    beta_f = float(config.beta)
    if "weak" in config.ledgers:
        payload["ledgers"]["weak"] = weak_identity_check(problem, u, beta_f).to_dict()
    if "thm1" in config.ledgers:
        payload["ledgers"]["thm1"] = thm1_ledger(
            problem, u, beta_f, sobolev_dim=config.sobolev_dim
        ).to_dict()
    if "thm2" in config.ledgers:
        if table.thm2 is None:
            reason = (
                f"proof-gap regime: r = {table.proof_gap_r}"
                if table.proof_gap_r is not None
                else f"regime {table.regime} has no superlevel block"
            )
            payload["ledgers"]["thm2"] = {"skipped": reason}
        else:
            k0 = config.k_levels[0] if config.k_levels else 1.0
            payload["ledgers"]["thm2"] = thm2_ledger(
                problem,
                u,
                k=k0,
                beta=float(table.thm2.beta),
                sobolev_dim=config.sobolev_dim,
            ).to_dict()
    if "scan" in config.ledgers:
        if table.thm2 is None or len(config.k_levels) < 4:
            payload["ledgers"]["scan"] = {
                "skipped": "needs a superlevel regime and at least 4 k_levels"
            }
        else:
            payload["ledgers"]["scan"] = levelset_scan(
                problem,
                u,
                r=float(table.thm2.r),
                k_list=config.k_levels,
                sobolev_dim=config.sobolev_dim,
            ).to_dict()
    if "maxreg" in config.ledgers:
        payload["ledgers"]["maxreg"] = {
            "q": str(config.maxreg_q),
            "value": payload["norms"]["maxreg"],
            "relative_agreement": payload["norms"]["maxreg_agreement"],
        }

    meta = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_time": wall,
        "version": __version__,
        "sweep_axis": sweep_tag[0] if sweep_tag else None,
        "sweep_value": sweep_tag[1] if sweep_tag else None,
    }
    path, fresh = (None, True)
    if out_dir is not None:
        path, fresh = persist_record(out_dir, payload, meta, u)
    return ExperimentResult(payload=payload, meta=meta, u=u, path=path, fresh=fresh)


def _sweep_variants(config: RunConfig, axis: str) -> list:
    if axis == "eps":
        values = config.epsilon_sweep
        if not values:
            raise ConfigError("eps sweep needs 'epsilon_sweep' values in [analysis]")
        return [
            config
            if v == config.eps
            else dataclasses.replace(
                config,
                eps=v,
                canonical_text=_patched_text(config.canonical_text, "eps", repr(v)),
            )
            for v in values
        ]
    if axis == "lambda":
        values = config.lambda_sweep
        if not values:
            raise ConfigError("lambda sweep needs 'lambda_sweep' values in [analysis]")
        out = []
        for v in values:
            lam = Fraction(v).limit_denominator(10**9)
            if lam == config.lam:
                out.append(config)
            else:
                out.append(
                    dataclasses.replace(
                        config,
                        lam=lam,
                        canonical_text=_patched_text(
                            config.canonical_text, "lambda", repr(v)
                        ),
                    )
                )
        return out
    if axis == "h":
        values = config.h_sweep
        if not values:
            raise ConfigError("h sweep needs 'h_sweep' cell counts in [analysis]")
        ndim = len(config.cells)
        out = []
        for n in values:
            cells = (int(n),) * ndim
            if cells == tuple(config.cells):
                out.append(config)
            else:
                out.append(
                    dataclasses.replace(
                        config,
                        cells=cells,
                        canonical_text=_patched_text(
                            config.canonical_text, "cells", " ".join(map(str, cells))
                        ),
                    )
                )
        return out
    if axis == "scale":
        values = config.scales
        if not values:
            raise ConfigError("scale sweep needs 'scales' values in [analysis]")
        out = []
        for v in values:
            if config.source_params.get("scale") == v:
                out.append(config)
                continue
            params = dict(config.source_params)
            params["scale"] = v
            try:
                text = _patched_text(config.canonical_text, "scale", repr(v))
            except ConfigError:
                text = config.canonical_text + f"scale = {v!r}\n"
            out.append(
                dataclasses.replace(config, source_params=params, canonical_text=text)
            )
        return out
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {_SWEEP_AXES}")


def sweep(config: RunConfig, axis: str, out_dir: str | Path | None = None) -> list:
    """Run a family of experiments along one axis.

    The eps axis is solved sequentially, warm-starting each solve from the
    previous solution, because continuation in eps is the whole point of
    that sweep.  The k axis reuses a single solve and varies only the
    analysis level.  All other axes are independent and run concurrently.
    """
    if axis == "k":
        if len(config.k_levels) < 1:
            raise ConfigError("k sweep needs 'k_levels' in [analysis]")
        ledgers = tuple(config.ledgers)
        if "thm2" not in ledgers:
            ledgers = ledgers + ("thm2",)
        results = []
        base = dataclasses.replace(config, ledgers=ledgers)
        problem = base.build_problem()
        grid = base.build_grid()
        u, _ = solve(problem, grid, base.solver, continuation=base.continuation)
        table = build_exponent_table(
            grid.ndim,
            base.p,
            base.gamma,
            base.q,
            lam=base.lam,
            beta=base.beta,
            sobolev_dim=base.sobolev_dim,
        )
        if table.thm2 is None:
            raise RegimeError("k sweep needs a superlevel regime (no thm2 block)")
        for k in base.k_levels:
            variant = dataclasses.replace(base, k_levels=(k,))
            result = run_experiment_with_solution(
                variant, problem, grid, u, table, out_dir, sweep_tag=("k", k)
            )
            results.append(result)
        return results

    variants = _sweep_variants(config, axis)
    results = []
    if axis == "eps":
        initial = None
        for variant, value in zip(variants, config.epsilon_sweep):
            result = run_experiment(
                variant, out_dir, initial=initial, sweep_tag=("eps", value)
            )
            initial = result.u
            results.append(result)
        return results

    values = {
        "lambda": config.lambda_sweep,
        "h": config.h_sweep,
        "scale": config.scales,
    }[axis]
    with ThreadPoolExecutor(max_workers=min(4, len(variants))) as pool:
        futures = [
            pool.submit(run_experiment, variant, out_dir, None, (axis, value))
            for variant, value in zip(variants, values)
        ]
        results = [f.result() for f in futures]
    return results


def run_experiment_with_solution(
    config: RunConfig,
    problem: ProblemSpec,
    grid,
    u: ScalarField,
    table,
    out_dir: str | Path | None,
    sweep_tag: tuple | None = None,
) -> ExperimentResult:
    """Analysis-only variant of :func:`run_experiment` for the k axis."""
    k0 = config.k_levels[0]
    payload = {
        "config_digest": config.digest(),
        "parameters": {
            "p": str(config.p),
            "gamma": str(config.gamma),
            "lambda": str(config.lam),
            "q": str(config.q),
            "eps": config.eps,
            "beta": str(config.beta),
            "source_kind": config.source_kind,
            "extents": list(config.extents),
            "cells": list(config.cells),
            "ledger_k": k0,
            "sobolev_dim": table.sobolev_dim,
        },
        "exponents": table.to_dict(),
        "norms": _norm_table(config, problem, u, table),
        "ledgers": {
            "thm2": thm2_ledger(
                problem, u, k=k0, beta=float(table.thm2.beta), sobolev_dim=config.sobolev_dim
            ).to_dict()
        },
    }
    meta = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_time": 0.0,
        "version": __version__,
        "sweep_axis": sweep_tag[0] if sweep_tag else None,
        "sweep_value": sweep_tag[1] if sweep_tag else None,
    }
    path, fresh = (None, True)
    if out_dir is not None:
        path, fresh = persist_record(out_dir, payload, meta, u)
    return ExperimentResult(payload=payload, meta=meta, u=u, path=path, fresh=fresh)


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------


@dataclass
class StudyLevel:
    cells: int
    h: float
    converged: bool
    error_linf: float | None
    error_l2: float | None


@dataclass
class ConvergenceStudy:
    levels: list
    orders_linf: list
    orders_l2: list

    def to_dict(self) -> dict:
        return {
            "levels": [dataclasses.asdict(lv) for lv in self.levels],
            "orders_linf": self.orders_linf,
            "orders_l2": self.orders_l2,
        }


def convergence_study(
    box: Box,
    p: float,
    gamma: float,
    lam: float,
    eps: float,
    f_exact,
    u_exact,
    base_cells: int,
    levels: int = 3,
    options: SolverOptions | None = None,
) -> ConvergenceStudy:
    """Solve against a known continuum solution on a doubling grid ladder.

    ``f_exact`` and ``u_exact`` take the tuple of center coordinate arrays.
    A level that fails to solve is recorded and skipped; orders are then
    computed over consecutive successful pairs.
    """
    if levels < 3:
        raise ConfigError("convergence study needs at least 3 levels")
    rows = []
    ndim = len(box.extents)
    for i in range(levels):
        n = base_cells * 2**i
        grid = build_grid(box, (n,) * ndim)
        centers = grid.centers()
        problem = ProblemSpec.power_model(
            box, p=p, gamma=gamma, lam=lam, eps=eps,
            source=Tabulated(np.asarray(f_exact(centers), dtype=float)),
        )
        exact = np.asarray(u_exact(centers), dtype=float)
        try:
            u, _ = solve(problem, grid, options)
        except Exception:  # noqa: BLE001 - the study reports partial results
            rows.append(StudyLevel(n, grid.max_spacing, False, None, None))
            continue
        diff = u.values - exact
        rows.append(
            StudyLevel(
                cells=n,
                h=grid.max_spacing,
                converged=True,
                error_linf=float(np.max(np.abs(diff))),
                error_l2=float(np.sqrt(np.sum(diff**2) * grid.cell_volume)),
            )
        )
    orders_linf, orders_l2 = [], []
    for a, b in zip(rows, rows[1:]):
        if a.converged and b.converged:
            ratio = np.log2(a.h / b.h)
            orders_linf.append(float(np.log2(a.error_linf / b.error_linf) / ratio))
            orders_l2.append(float(np.log2(a.error_l2 / b.error_l2) / ratio))
    return ConvergenceStudy(levels=rows, orders_linf=orders_linf, orders_l2=orders_l2)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

REPORT_COLUMNS = [
    "record",
    "sweep_axis",
    "sweep_value",
    "p",
    "gamma",
    "lambda",
    "eps",
    "q",
    "cells",
    "regime",
    "converged",
    "iterations",
    "residual",
    "u_l2",
    "u_linf",
    "du_l2",
    "du_eta",
    "du_qgamma",
    "maxreg",
    "weak_gap",
    "thm1_pass",
    "thm2_pass",
    "scan_small_branch",
]


def _report_row(record_dir: Path) -> dict:
    payload, meta = load_record(record_dir)
    params = payload.get("parameters", {})
    norms = payload.get("norms", {})
    solve_block = payload.get("solve", {})
    ledgers = payload.get("ledgers", {})

    def ledger_pass(name):
        block = ledgers.get(name)
        if not block or "skipped" in block:
            return ""
        return block["all_pass"]

    weak = ledgers.get("weak")
    scan = ledgers.get("scan")
    return {
        "record": record_dir.name,
        "sweep_axis": meta.get("sweep_axis") or "",
        "sweep_value": meta.get("sweep_value", ""),
        "p": params.get("p", ""),
        "gamma": params.get("gamma", ""),
        "lambda": params.get("lambda", ""),
        "eps": params.get("eps", ""),
        "q": params.get("q", ""),
        "cells": "x".join(str(c) for c in params.get("cells", [])),
        "regime": payload.get("exponents", {}).get("regime", ""),
        "converged": solve_block.get("converged", ""),
        "iterations": solve_block.get("total_iterations", ""),
        "residual": solve_block.get("residual_norm", ""),
        "u_l2": norms.get("u_l2", ""),
        "u_linf": norms.get("u_linf", ""),
        "du_l2": norms.get("du_l2", ""),
        "du_eta": norms.get("du_eta", ""),
        "du_qgamma": norms.get("du_qgamma", ""),
        "maxreg": norms.get("maxreg", ""),
        "weak_gap": weak["constants"]["relative_gap"] if weak and "constants" in weak else "",
        "thm1_pass": ledger_pass("thm1"),
        "thm2_pass": ledger_pass("thm2"),
        "scan_small_branch": scan.get("small_branch_ok", "") if scan and "skipped" not in scan else "",
    }


def emit_report(
    records_dir: str | Path,
    out_dir: str | Path | None = None,
    formats: tuple = ("csv", "json"),
) -> dict:
    """Aggregate all records under ``records_dir`` into report files.

    Writes ``report.csv`` with a fixed column order, ``report.json`` with
    the full payloads, and for each sweep axis present a two-column
    ``<axis>_du_qgamma.dat`` suitable for direct plotting.  Returns the
    mapping of written file names to paths.
    """
    records_dir = Path(records_dir)
    out_dir = Path(out_dir) if out_dir is not None else records_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    dirs = [d for d in records_dir.iterdir() if d.is_dir() and (d / "record.json").exists()] if records_dir.exists() else []
    dirs.sort(key=lambda d: d.name)
    rows = [_report_row(d) for d in dirs]
    written = {}

    if "csv" in formats:
        csv_path = out_dir / "report.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        written["report.csv"] = csv_path
    if "json" in formats:
        full = []
        for d in dirs:
            payload, meta = load_record(d)
            full.append({"record": d.name, "meta": meta, "payload": payload})
        json_path = out_dir / "report.json"
        json_path.write_text(json.dumps(full, sort_keys=True, indent=1))
        written["report.json"] = json_path

    by_axis: dict = {}
    for row in rows:
        axis = row["sweep_axis"]
        if axis and row["sweep_value"] != "" and row["du_qgamma"] != "":
            by_axis.setdefault(axis, []).append(
                (float(row["sweep_value"]), float(row["du_qgamma"]))
            )
    for axis, points in by_axis.items():
        points.sort()
        dat_path = out_dir / f"{axis}_du_qgamma.dat"
        with open(dat_path, "w") as fh:
            fh.write(f"# {axis} du_qgamma\n")
            for x, y in points:
                fh.write(f"{x!r} {y!r}\n")
        written[dat_path.name] = dat_path
    return written
