"""Convergence studies over (problem x family x tau x h).

A study integrates every cell to the final time, measures the discrete L2
distance to a reference (closed form for transport, fine-step Strang
otherwise), times the stepping loop, and fits log-log slopes per tau.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import statistics
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .duhamel import reference_solution
from .errors import ConfigurationError, InvalidArgument, SplitkitError
from .expaction import ExpActionBackend
from .models import random_matrix_problem, schrodinger_problem, transport_exact_grid, transport_problem
from .splittings import EXP_A, build_scheme, integrate, step_count

log = logging.getLogger(__name__)

__all__ = [
    "StudyConfig",
    "ErrorRow",
    "ErrorTable",
    "InsufficientData",
    "OutputError",
    "run_convergence_study",
    "estimate_order",
    "emit_outputs",
    "write_csv",
    "write_svg",
    "CSV_HEADER",
    "NOISE_FACTOR",
]

CSV_HEADER = ["problem", "family", "tau", "h", "steps", "error_l2", "runtime_ms"]
NOISE_FACTOR = 100.0
PROBLEMS = ("schrodinger", "transport", "matrix")
BACKENDS = ("dense", "krylov", "diagonal-auto")


class InsufficientData(SplitkitError):
    pass


class OutputError(SplitkitError, OSError):
    def __init__(self, message, path):
        super().__init__(f"{message}: {path}")
        self.path = path


@dataclass
class StudyConfig:
    problem: str = "schrodinger"
    family: str = "F"
    tau: list = field(default_factory=lambda: [0.5])
    h: list = field(default_factory=lambda: [1 / 50, 1 / 100, 1 / 200])
    t_end: float = 1.0
    backend: str = "diagonal-auto"
    ref: str = "fine-step"
    out: str = "study-out"
    emit: str = "both"
    grid_n: int = 128
    dx: float = 0.004
    dim: int = 8
    seed: int = 0
    repeats: int = 3
    ref_factor: int = 64
    ref_rtol: float = 1e-6

    def validate(self) -> "StudyConfig":
        self.family = self.family.upper()
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.family not in ("F", "D"):
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.ref not in ("exact", "fine-step"):
            raise ConfigurationError(f"unknown reference mode {self.ref!r}")
        if self.ref == "exact" and self.problem != "transport":
            raise ConfigurationError("exact reference is only available for the transport problem")
        if self.emit not in ("csv", "svg", "both"):
            raise ConfigurationError(f"unknown emit mode {self.emit!r}")
        if not self.t_end > 0:
            raise ConfigurationError("t-end must be positive")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        hi = 0.5 if self.family == "F" else 1.0
        for t in self.tau:
            if not 0.0 <= t <= hi:
                raise ConfigurationError(f"tau={t} outside [0, {hi}] for family {self.family}")
        if not self.h:
            raise ConfigurationError("h-list is empty")
        if any(b >= a for a, b in zip(self.h, self.h[1:])):
            raise ConfigurationError("h-list must be strictly decreasing")
        for h in self.h:
            try:
                step_count(self.t_end, h)
            except InvalidArgument as exc:
                raise ConfigurationError(f"h={h}: {exc}") from None
        return self


@dataclass
class ErrorRow:
    problem: str
    family: str
    tau: float
    h: float
    steps: int
    error_l2: float
    runtime_ms: float
    norm_drift: float = float("nan")
    warmup_ms: float = 0.0
    failure: Optional[str] = None

    @property
    def per_step_ms(self) -> float:
        return self.runtime_ms / self.steps if self.steps else float("nan")


@dataclass
class ErrorTable:
    rows: list
    orders: dict = field(default_factory=dict)  # (problem, family, tau) -> slope or None
    reference_floor: float = 0.0

    def slice(self, tau: Optional[float] = None, problem: Optional[str] = None, family: Optional[str] = None):
        return [
            r
            for r in self.rows
            if (tau is None or r.tau == tau) and (problem is None or r.problem == problem) and (family is None or r.family == family)
        ]

    def error(self, tau: float, h: float) -> float:
        for r in self.rows:
            if r.tau == tau and r.h == h:
                return r.error_l2
        raise KeyError((tau, h))

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r.failure is not None]


def estimate_order(hs: Sequence[float], errors: Sequence[float], floor: float = 0.0) -> float:
    """Least-squares slope of log(error) against log(h).

    Points with error below NOISE_FACTOR * floor are treated as reference
    noise and dropped.  Needs at least three usable points.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = np.isfinite(errors) & (errors > 0) & (errors >= NOISE_FACTOR * floor)
    if np.count_nonzero(keep) < 3:
        raise InsufficientData(f"need >= 3 usable points for an order fit, have {np.count_nonzero(keep)}")
    slope, _ = np.polyfit(np.log(hs[keep]), np.log(errors[keep]), 1)
    return float(slope)


def make_problem(cfg: StudyConfig):
    if cfg.problem == "schrodinger":
        return schrodinger_problem(cfg.grid_n, cfg.t_end)
    if cfg.problem == "transport":
        return transport_problem(cfg.dx, cfg.t_end)
    return random_matrix_problem(cfg.dim, cfg.seed, cfg.t_end)


def make_backend(name: str) -> ExpActionBackend:
    return ExpActionBackend({"dense": "dense", "krylov": "krylov", "diagonal-auto": "auto"}[name])


def _reference(cfg, problem, backend):
    if cfg.ref == "exact":
        return transport_exact_grid(problem.meta["spec"].grid.points, cfg.t_end), 0.0
    steps = max(10_000, step_count(cfg.t_end, cfg.h[-1]) * cfg.ref_factor)
    res = reference_solution(problem, backend, cfg.t_end, steps, rtol=cfg.ref_rtol, full=True)
    return res.u, res.difference


def _warm(scheme, problem, backend, h) -> float:
    t0 = time.perf_counter()
    if backend.route(problem.A) == "dense":
        for s in scheme.stages:
            if s.kind == EXP_A:
                backend.cached_expm(problem.A, float(s.coeff) * h)
    return 1e3 * (time.perf_counter() - t0)


def _run_cell(cfg, problem, backend, tau, h, ref) -> ErrorRow:
    scheme = build_scheme(cfg.family, tau)
    warm = _warm(scheme, problem, backend, h)
    loops = []
    u = None
    for _ in range(cfg.repeats):
        res = integrate(scheme, problem, backend, h, t_end=cfg.t_end)
        loops.append(res.loop_seconds)
        u = res.u
    n0 = problem.norm(problem.u0)
    drift = abs(problem.norm(u) / n0 - 1.0) if n0 else float("nan")
    return ErrorRow(
        cfg.problem,
        cfg.family,
        tau,
        h,
        res.steps,
        problem.norm(u - ref),
        1e3 * statistics.median(loops),
        norm_drift=drift,
        warmup_ms=warm,
    )


def run_convergence_study(cfg: StudyConfig) -> ErrorTable:
    cfg.validate()
    if not cfg.tau:
        return ErrorTable([])
    problem = make_problem(cfg)
    backend = make_backend(cfg.backend)
    try:
        ref, floor = _reference(cfg, problem, backend)
    except SplitkitError as exc:
        log.error("reference computation failed: %s", exc)
        rows = [
            ErrorRow(cfg.problem, cfg.family, tau, h, step_count(cfg.t_end, h), float("nan"), float("nan"), failure=f"reference: {exc}")
            for tau in cfg.tau
            for h in cfg.h
        ]
        return ErrorTable(rows, {(cfg.problem, cfg.family, tau): None for tau in cfg.tau})

    cells = {}
    # h-major so cached exponentials of A are shared between taus, then dropped
    for h in cfg.h:
        backend.clear_cache()
        for tau in cfg.tau:
            try:
                row = _run_cell(cfg, problem, backend, tau, h, ref)
            except Exception as exc:  # recorded per row; the study continues
                log.error("cell tau=%s h=%s failed: %s", tau, h, exc)
                row = ErrorRow(cfg.problem, cfg.family, tau, h, step_count(cfg.t_end, h), float("nan"), float("nan"), failure=str(exc))
            log.info("tau=%-8g h=%-10g error=%.3e runtime=%.1fms", tau, h, row.error_l2, row.runtime_ms)
            cells[(tau, h)] = row
    backend.clear_cache()

    rows = [cells[(tau, h)] for tau in cfg.tau for h in cfg.h]
    table = ErrorTable(rows, reference_floor=floor)
    for tau in cfg.tau:
        sl = table.slice(tau=tau)
        try:
            table.orders[(cfg.problem, cfg.family, tau)] = estimate_order([r.h for r in sl], [r.error_l2 for r in sl], floor)
        except InsufficientData:
            table.orders[(cfg.problem, cfg.family, tau)] = None
    return table


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(table: ErrorTable, path: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in table.rows:
                w.writerow([r.problem, r.family, _fmt(r.tau), _fmt(r.h), r.steps, _fmt(r.error_l2), format(r.runtime_ms, ".3f")])
    except OSError as exc:
        raise OutputError(f"cannot write CSV ({exc.strerror})", path) from exc


_PALETTE = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"]


def write_svg(table: ErrorTable, path: str, title: str = "") -> None:
    """Log-log error plot: one polyline per tau plus a dashed h^2 guide."""
    good = [r for r in table.rows if r.failure is None and r.error_l2 > 0 and math.isfinite(r.error_l2)]
    if not good:
        return
    W, H, ml, mr, mt, mb = 640, 480, 80, 140, 40, 60
    lh = np.log10([r.h for r in good])
    le = np.log10([r.error_l2 for r in good])
    x0, x1 = math.floor(lh.min()), math.ceil(lh.max())
    y0, y1 = math.floor(le.min()), math.ceil(le.max())
    if x1 == x0:
        x1 += 1
    if y1 == y0:
        y1 += 1

    def px(v):
        return ml + (v - x0) / (x1 - x0) * (W - ml - mr)

    def py(v):
        return H - mb - (v - y0) / (y1 - y0) * (H - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{ml}" y1="{H - mb}" x2="{W - mr}" y2="{H - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H - mb}" stroke="black"/>',
    ]
    for k in range(x0, x1 + 1):
        out.append(f'<line x1="{px(k):.2f}" y1="{H - mb}" x2="{px(k):.2f}" y2="{H - mb + 5}" stroke="black"/>')
        out.append(f'<text x="{px(k):.2f}" y="{H - mb + 20}" text-anchor="middle" font-family="sans-serif" font-size="12">1e{k}</text>')
    for k in range(y0, y1 + 1):
        out.append(f'<line x1="{ml - 5}" y1="{py(k):.2f}" x2="{ml}" y2="{py(k):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(k) + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="12">1e{k}</text>')
    out.append(f'<text x="{(ml + W - mr) / 2:.1f}" y="{H - 15}" text-anchor="middle" font-family="sans-serif" font-size="14">h</text>')
    out.append(
        f'<text x="20" y="{(mt + H - mb) / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="14" '
        f'transform="rotate(-90 20 {(mt + H - mb) / 2:.1f})">global error</text>'
    )
    # h^2 guide through the geometric centre of the data
    cx, cy = lh.mean(), le.mean()
    gx = np.array([lh.min(), lh.max()])
    gy = cy + 2.0 * (gx - cx)
    out.append(
        f'<polyline class="guide" points="{px(gx[0]):.2f},{py(gy[0]):.2f} {px(gx[1]):.2f},{py(gy[1]):.2f}" '
        f'fill="none" stroke="black" stroke-dasharray="6,4"/>'
    )
    taus = sorted({r.tau for r in good})
    for i, tau in enumerate(taus):
        pts = sorted((r.h, r.error_l2) for r in good if r.tau == tau)
        coords = " ".join(f"{px(math.log10(h)):.2f},{py(math.log10(e)):.2f}" for h, e in pts)
        color = _PALETTE[i % len(_PALETTE)]
        out.append(f'<polyline class="series" data-tau="{_fmt(tau)}" points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 18 * i + 10
        out.append(f'<line x1="{W - mr + 10}" y1="{ly}" x2="{W - mr + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - mr + 35}" y="{ly + 4}" font-family="sans-serif" font-size="12">tau={tau:g}</text>')
    ly = mt + 18 * len(taus) + 10
    out.append(f'<line x1="{W - mr + 10}" y1="{ly}" x2="{W - mr + 30}" y2="{ly}" stroke="black" stroke-dasharray="6,4"/>')
    out.append(f'<text x="{W - mr + 35}" y="{ly + 4}" font-family="sans-serif" font-size="12">h^2</text>')
    out.append("</svg>")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write SVG ({exc.strerror})", path) from exc


def emit_outputs(table: ErrorTable, cfg: StudyConfig) -> list:
    """Write CSV and/or SVG into cfg.out; returns the written paths."""
    try:
        os.makedirs(cfg.out, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory ({exc.strerror})", cfg.out) from exc
    stem = os.path.join(cfg.out, f"{cfg.problem}_{cfg.family}")
    written = []
    if cfg.emit in ("csv", "both"):
        write_csv(table, stem + ".csv")
        written.append(stem + ".csv")
    if cfg.emit in ("svg", "both") and table.rows:
        write_svg(table, stem + ".svg", title=f"{cfg.problem}, family {cfg.family}")
        if os.path.exists(stem + ".svg"):
            written.append(stem + ".svg")
    return written


# --- config files --------------------------------------------------------

_KEYS = {
    "problem": ("problem", str),
    "family": ("family", str),
    "tau": ("tau", "list"),
    "h": ("h", "list"),
    "t-end": ("t_end", "num"),
    "backend": ("backend", str),
    "ref": ("ref", str),
    "out": ("out", str),
    "emit": ("emit", str),
    "grid-n": ("grid_n", int),
    "dx": ("dx", "num"),
    "dim": ("dim", int),
    "seed": ("seed", int),
    "repeats": ("repeats", int),
    "ref-factor": ("ref_factor", int),
    "ref-rtol": ("ref_rtol", "num"),
}


def parse_number(text: str) -> float:
    """Decimal or rational ("1/50") literal."""
    text = text.strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigurationError(f"not a number: {text!r}") from None


def _convert(kind, raw: str):
    if kind == "num":
        return parse_number(raw)
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"not an integer: {raw!r}") from None
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; tau and h accumulate."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        attr, kind = _KEYS[key]
        if kind == "list":
            values.setdefault(attr, []).extend(parse_number(p) for p in raw.split(",") if p.strip())
        else:
            values[attr] = _convert(kind, raw)
    return values


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> StudyConfig:
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                values = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return replace(StudyConfig(), **values).validate()
