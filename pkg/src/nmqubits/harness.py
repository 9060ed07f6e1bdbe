"""Config-driven parameter sweeps over (kT, r, regime) with CSV persistence.

A config file is INI-style: section headers, ``key = value`` lines, lists
comma-separated.  Example::

    [bath]
    kT = 0, 0.03, 1, 10, 100
    r = 0.1
    gamma0 = 1

    [qubits]
    ej0 = 1
    j_coupling = 0.5
    regimes = 0, 4

    [run]
    t_final = 30
    dt_out = 0.01
    tol = 1e-10

    [output]
    dir = out/fig2

Every CSV carries a ``#`` provenance line (config hash and run settings)
above its header row; wall-clock timestamps live only in ``manifest.json``
so fixed-step reruns give byte-identical CSVs.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bath import BathSpec, compute_coefficients
from .dynamics import QubitPair, evolve
from .entanglement import (DEFAULT_THRESHOLD, EntanglementTrace, EsdEvent, detect_events,
                           write_events_csv)
from .errors import ConfigError, ContractError, NumericalError
from .preparation import bell_initial_xstate

log = logging.getLogger(__name__)

# documentation only; none of these enter the normalized dynamics
HARDWARE_METADATA = {
    "C_J": "4.3 pF",
    "I_0": "13.3 uA",
    "I_b": "0.9725 I_0",
    "C_J/C": "~0.1",
    "omega_0": "2 pi x 6 GHz",
}


def _floats(text: str, key: str) -> List[float]:
    try:
        values = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as a list of numbers") from exc
    if not values:
        raise ConfigError(f"{key}: list must not be empty")
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    kT: Tuple[float, ...]
    r: Tuple[float, ...]
    regimes: Tuple[float, ...] = (0.0, 4.0)
    gamma0: float = 1.0
    ej0: float = 1.0
    j_coupling: float = 0.5
    t_final: float = 30.0
    dt_out: float = 0.01
    tol: float = 1e-10
    fixed_step: Optional[float] = None
    threshold: float = DEFAULT_THRESHOLD
    out_dir: str = "out"
    name: str = "sweep"
    metadata: Dict[str, str] = field(default_factory=lambda: dict(HARDWARE_METADATA))

    def __post_init__(self):
        for key in ("kT", "r", "regimes"):
            values = getattr(self, key)
            if not values:
                raise ConfigError(f"{key}: list must not be empty")
            object.__setattr__(self, key, tuple(float(v) for v in values))
        if any(v < 0 for v in self.kT):
            raise ConfigError("kT values must be non-negative")
        if any(v <= 0 for v in self.r):
            raise ConfigError("r values must be positive")
        if any(v < 0 for v in self.regimes):
            raise ConfigError("regime splittings must be non-negative")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if not self.dt_out > 0 or self.dt_out > self.t_final:
            raise ConfigError("dt_out must be in (0, t_final]")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise ConfigError("fixed_step must be positive")
        if not self.gamma0 > 0:
            raise ConfigError("gamma0 must be positive")

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        known = {"bath", "qubits", "run", "output", "metadata"}
        unknown = set(parser.sections()) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        if not parser.has_section("bath"):
            raise ConfigError("config needs a [bath] section")
        kw = {}
        bath = parser["bath"]
        for key in ("kT", "r"):
            if key not in bath:
                raise ConfigError(f"[bath] is missing {key}")
            kw[key] = tuple(_floats(bath[key], key))
        scalar_keys = {
            "bath": ("gamma0",),
            "qubits": ("ej0", "j_coupling"),
            "run": ("t_final", "dt_out", "tol", "fixed_step", "threshold"),
        }
        for section, keys in scalar_keys.items():
            if not parser.has_section(section):
                continue
            allowed = set(keys) | ({"kT", "r"} if section == "bath" else set()) \
                | ({"regimes"} if section == "qubits" else set())
            extra = set(parser[section]) - allowed
            if extra:
                raise ConfigError(f"[{section}] has unknown keys {sorted(extra)}")
            for key in keys:
                if key in parser[section]:
                    kw[key] = _floats(parser[section][key], key)[0]
        if parser.has_section("qubits") and "regimes" in parser["qubits"]:
            kw["regimes"] = tuple(_floats(parser["qubits"]["regimes"], "regimes"))
        if parser.has_section("output"):
            kw["out_dir"] = parser["output"].get("dir", "out")
            kw["name"] = parser["output"].get("name", "sweep")
        if parser.has_section("metadata"):
            kw["metadata"] = {**HARDWARE_METADATA, **dict(parser["metadata"])}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, **overrides)

    def physics_dict(self) -> dict:
        d = asdict(self)
        for key in ("out_dir", "metadata"):
            d.pop(key)
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.physics_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def cells(self) -> List[Tuple[float, float, float]]:
        return [(kT, r, reg) for reg in self.regimes for r in self.r for kT in self.kT]


def cell_id(kT: float, r: float, regime: float) -> str:
    return f"kT{kT:g}_r{r:g}_reg{regime:g}"


def _coeff_id(kT: float, r: float) -> str:
    return f"kT{kT:g}_r{r:g}"


@dataclass
class CellResult:
    kT: float
    r: float
    regime: float
    status: str = "ok"
    error: Optional[str] = None
    trace: Optional[EntanglementTrace] = field(default=None, repr=False)
    events: List[EsdEvent] = field(default_factory=list)
    coeff_file: Optional[str] = None
    trajectory_file: Optional[str] = None
    concurrence_file: Optional[str] = None
    events_file: Optional[str] = None
    trace_error: Optional[float] = None
    min_eigenvalue: Optional[float] = None
    max_abs_entry: Optional[float] = None

    @property
    def id(self) -> str:
        return cell_id(self.kT, self.r, self.regime)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def first(self, kind: str) -> Optional[float]:
        return next((ev.time for ev in self.events if ev.kind == kind), None)

    def to_record(self) -> dict:
        rec = {k: v for k, v in asdict(self).items() if k not in ("trace", "events")}
        rec["events"] = [[ev.kind, ev.time] for ev in self.events]
        return rec


@dataclass
class SweepResult:
    config: ExperimentConfig
    out_dir: Path
    cells: List[CellResult]
    config_hash: str
    timestamp: str

    def cell(self, kT: float, r: float, regime: float) -> CellResult:
        for c in self.cells:
            if c.kT == kT and c.r == r and c.regime == regime:
                return c
        raise KeyError(cell_id(kT, r, regime))

    @property
    def n_failed(self) -> int:
        return sum(not c.ok for c in self.cells)

    def exit_code(self) -> int:
        if self.n_failed == 0:
            return 0
        return 2 if self.n_failed == len(self.cells) else 3

    @classmethod
    def load(cls, out_dir) -> "SweepResult":
        out_dir = Path(out_dir)
        manifest = out_dir / "manifest.json"
        if not manifest.exists():
            raise FileNotFoundError(f"no manifest.json in {out_dir}")
        data = json.loads(manifest.read_text())
        cfg = data["config"]
        cfg["metadata"] = data.get("metadata", {})
        cfg["out_dir"] = str(out_dir)
        config = ExperimentConfig(**cfg)
        cells = []
        for rec in data["cells"]:
            events = [EsdEvent(k, t) for k, t in rec.pop("events")]
            cell = CellResult(**rec)
            cell.events = events
            if cell.ok and cell.concurrence_file and (out_dir / cell.concurrence_file).exists():
                cell.trace = EntanglementTrace.from_csv(out_dir / cell.concurrence_file)
            cells.append(cell)
        return cls(config, out_dir, cells, data["config_hash"], data["timestamp"])


def provenance(config: ExperimentConfig, **extra) -> str:
    parts = [f"config_hash={config.config_hash}", f"tol={config.tol:g}",
             f"fixed_step={config.fixed_step if config.fixed_step is not None else 'none'}"]
    parts += [f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in extra.items()]
    return " ".join(parts)


def _run_bath_group(config: ExperimentConfig, kT: float, r: float, out_dir: str) -> List[CellResult]:
    """Coefficients for one (kT, r) pair, then every regime; each cell persists its own files."""
    out = Path(out_dir)
    results = []
    try:
        spec = BathSpec.from_ratio(r, kT, gamma0=config.gamma0)
        coeffs = compute_coefficients(spec, config.t_final)
        coeff_file = f"coeffs_{_coeff_id(kT, r)}.csv"
        coeffs.to_csv(out / coeff_file, provenance(config, kind="coefficients", kT=kT, r=r))
    except Exception as exc:  # noqa: BLE001 - recorded per cell
        msg = f"{type(exc).__name__}: {exc}"
        for reg in config.regimes:
            cell = CellResult(kT, r, reg, status="failed", error=msg)
            _write_cell_record(out, cell)
            results.append(cell)
        return results

    for reg in config.regimes:
        cell = CellResult(kT, r, reg, coeff_file=coeff_file)
        try:
            qubits = QubitPair.regime(reg, ej0=config.ej0, j_coupling=config.j_coupling)
            traj = evolve(bell_initial_xstate(), qubits, coeffs, config.t_final,
                          tol=config.tol, dt_out=config.dt_out,
                          fixed_step=config.fixed_step, strict=False)
            trace = EntanglementTrace.from_trajectory(traj)
            events = detect_events(trace, config.threshold)
            prov = provenance(config, kT=kT, r=r, regime=reg)
            cell.trajectory_file = f"trajectory_{cell.id}.csv"
            cell.concurrence_file = f"concurrence_{cell.id}.csv"
            cell.events_file = f"events_{cell.id}.csv"
            traj.to_csv(out / cell.trajectory_file, prov)
            trace.to_csv(out / cell.concurrence_file, prov)
            write_events_csv(events, out / cell.events_file, prov)
            cell.trace, cell.events = trace, events
            cell.trace_error = traj.trace_error
            cell.min_eigenvalue = traj.min_eigenvalue
            cell.max_abs_entry = float(np.max(np.abs(traj.states)))
        except (NumericalError, ContractError, FloatingPointError, ArithmeticError) as exc:
            cell.status, cell.error = "failed", f"{type(exc).__name__}: {exc}"
        except Exception as exc:  # noqa: BLE001
            cell.status = "failed"
            cell.error = f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"
        _write_cell_record(out, cell)
        results.append(cell)
    return results


def _write_cell_record(out: Path, cell: CellResult):
    cells_dir = out / "cells"
    cells_dir.mkdir(exist_ok=True)
    tmp = cells_dir / f".{cell.id}.json.tmp"
    tmp.write_text(json.dumps(cell.to_record(), indent=1, sort_keys=True))
    os.replace(tmp, cells_dir / f"{cell.id}.json")


def _write_manifest(result: SweepResult):
    data = {
        "config_hash": result.config_hash,
        "timestamp": result.timestamp,
        "config": result.config.physics_dict(),
        "metadata": result.config.metadata,
        "cells": [c.to_record() for c in result.cells],
    }
    tmp = result.out_dir / ".manifest.json.tmp"
    tmp.write_text(json.dumps(data, indent=1))
    os.replace(tmp, result.out_dir / "manifest.json")


def run_sweep(config: ExperimentConfig, out_dir=None, workers: int = 1) -> SweepResult:
    """Evolve the Bell state for every (kT, r, regime) cell of the config.

    Work is grouped by (kT, r) so each coefficient trace is computed once;
    groups run on a process pool of ``workers``.  Each cell writes its CSVs
    and a ``cells/<id>.json`` record as soon as it finishes, and the
    manifest is rewritten after every group.  Numerical failures are stored
    on the cell and do not stop the sweep.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    order = {c: i for i, c in enumerate(config.cells())}
    result = SweepResult(config, out, [], config.config_hash, stamp)
    groups = [(kT, r) for r in config.r for kT in config.kT]

    def collect(cells):
        result.cells.extend(cells)
        result.cells.sort(key=lambda c: order[(c.kT, c.r, c.regime)])
        _write_manifest(result)
        for c in cells:
            log.info("cell %s: %s", c.id, c.status if c.ok else c.error)

    if workers <= 1:
        for kT, r in groups:
            collect(_run_bath_group(config, kT, r, str(out)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_bath_group, config, kT, r, str(out)) for kT, r in groups]
            for fut in as_completed(futures):
                collect(fut.result())
    return result


@dataclass(frozen=True)
class EventSummaryRow:
    regime: float
    r: float
    kT: float
    first_death: Optional[float]
    first_birth: Optional[float]
    status: str = "ok"

    @staticmethod
    def _fmt(v):
        return "none" if v is None else f"{v:.4f}"

    def as_strings(self) -> List[str]:
        return [f"{self.regime:g}", f"{self.r:g}", f"{self.kT:g}",
                self._fmt(self.first_death), self._fmt(self.first_birth), self.status]


def summarize_events(result: SweepResult) -> List[EventSummaryRow]:
    """First death and first birth per cell, sorted by (regime, r, kT)."""
    rows = [EventSummaryRow(c.regime, c.r, c.kT, c.first("death"), c.first("birth"),
                            "ok" if c.ok else "failed")
            for c in result.cells]
    return sorted(rows, key=lambda row: (row.regime, row.r, row.kT))


def format_summary(rows: List[EventSummaryRow]) -> str:
    header = ["regime", "r", "kT", "first_death", "first_birth", "status"]
    table = [header] + [row.as_strings() for row in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(line, widths)) for line in table)


def write_summary_csv(rows: List[EventSummaryRow], path, comment: Optional[str] = None) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["regime", "r", "kT", "first_death", "first_birth", "status"])
        for row in rows:
            writer.writerow(row.as_strings())
    return path


_PLOT_TEMPLATE = '''"""{title}

Generated plot script; run from anywhere with matplotlib installed.
"""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
PANELS = {panels!r}


def load(name):
    with open(HERE / name, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    next(reader)
    t, c = [], []
    for row in reader:
        t.append(float(row[0]))
        c.append(float(row[1]))
    return t, c


fig, axes = plt.subplots(1, len(PANELS), figsize=(5 * len(PANELS), 4), squeeze=False)
for ax, (panel_title, curves) in zip(axes[0], PANELS):
    for label, fname in curves:
        t, c = load(fname)
        ax.plot(t, c, label=label)
    ax.set_title(panel_title)
    ax.set_xlabel(r"$\\omega_0 t$")
    ax.set_ylabel("concurrence")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(HERE / "{stem}.png", dpi=150)
'''


def emit_plots(result: SweepResult, style: str = "both") -> List[Path]:
    """Write matplotlib scripts next to the CSVs they plot.

    ``style`` is "kT" (one panel per (r, regime), curves over kT), "r"
    (one panel per (kT, regime), curves over r) or "both".
    """
    if not result.cells:
        raise ContractError("sweep result has no cells to plot")
    if style not in ("kT", "r", "both"):
        raise ValueError(f"unknown plot style {style!r}")
    ok = [c for c in result.cells if c.ok]
    if not ok:
        raise ContractError("no successful cells to plot")
    for c in ok:
        if not c.concurrence_file or not (result.out_dir / c.concurrence_file).exists():
            raise FileNotFoundError(f"missing concurrence CSV for cell {c.id}")
    cfg = result.config
    written = []

    def panel_list(fixed_keys, vary_key):
        panels = []
        keys = sorted({tuple(getattr(c, k) for k in fixed_keys) for c in ok})
        for key in keys:
            members = [c for c in ok if tuple(getattr(c, k) for k in fixed_keys) == key]
            members.sort(key=lambda c: getattr(c, vary_key))
            title = ", ".join(f"{k}={v:g}" for k, v in zip(fixed_keys, key))
            curves = [(f"{vary_key}={getattr(c, vary_key):g}", c.concurrence_file) for c in members]
            panels.append((title, curves))
        return panels

    if style in ("kT", "both"):
        path = result.out_dir / "plot_kT_family.py"
        path.write_text(_PLOT_TEMPLATE.format(
            title=f"Concurrence vs time, kT family ({cfg.name}, config {result.config_hash})",
            panels=panel_list(("r", "regime"), "kT"), stem="plot_kT_family"))
        written.append(path)
    if style in ("r", "both"):
        path = result.out_dir / "plot_r_family.py"
        path.write_text(_PLOT_TEMPLATE.format(
            title=f"Concurrence vs time, r family ({cfg.name}, config {result.config_hash})",
            panels=panel_list(("kT", "regime"), "r"), stem="plot_r_family"))
        written.append(path)
    return written

