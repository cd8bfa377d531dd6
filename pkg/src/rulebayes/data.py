"""Synthetic generators, the advection solver, table loading and the
train/test, labelling and class-balancing helpers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import MissingColumn, NonNumericCell, SingleClass, UnknownColumn, UnstableConfig
from .expr import COMPARE_OPS, Dataset

# ---------------------------------------------------------------------------
# linear data


@dataclass(frozen=True)
class LinearDataConfig:
    n_total: int = 500
    x_lo: float = 0.0
    x_hi: float = 10.0
    intercept: float = 1.0
    slope: float = 2.0
    noise_sd: float = 3.0
    train_lo: float = 4.0
    train_hi: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n_total < 1 or self.x_hi <= self.x_lo or self.noise_sd < 0:
            raise ValueError("invalid linear data configuration")
        if not self.x_lo <= self.train_lo < self.train_hi <= self.x_hi:
            raise ValueError("training window must lie inside the x range")


def generate_linear(cfg: LinearDataConfig):
    """Uniform x, ``y = intercept + slope * x + N(0, noise_sd^2)``.

    Returns ``(train, full)`` where ``train`` keeps the rows with x inside
    the training window.
    """
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(cfg.x_lo, cfg.x_hi, cfg.n_total)
    y = cfg.intercept + cfg.slope * x + cfg.noise_sd * rng.standard_normal(cfg.n_total)
    full = Dataset({"x": x, "y": y})
    inside = (x >= cfg.train_lo) & (x <= cfg.train_hi)
    return full.subset(inside), full


# ---------------------------------------------------------------------------
# advection


@dataclass(frozen=True)
class AdvectionConfig:
    """Forced inviscid Burgers problem on the periodic interval [0, 2 pi).

    ``initial`` names the initial profile: ``"zero"`` or ``"sine"``
    (``offset + amp * sin(x)`` from ``initial_params``).
    """

    amplitude: float = 0.001
    phase: float = math.pi
    grid_points: int = 256
    snapshot_times: tuple = (1.0, 2.0, 3.0)
    samples_per_snapshot: int = 32
    noise_sd: float = 0.002
    initial: str = "zero"
    initial_params: tuple = (1.0, 0.5)
    dt_max: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.grid_points < 4 * self.samples_per_snapshot:
            raise ValueError("grid_points must be at least 4 * samples_per_snapshot")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if self.initial not in ("zero", "sine"):
            raise ValueError("initial must be 'zero' or 'sine'")
        if any(t < 0 for t in self.snapshot_times) or list(self.snapshot_times) != sorted(
            self.snapshot_times
        ):
            raise ValueError("snapshot times must be non-negative and increasing")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")

    def initial_profile(self, x):
        if self.initial == "zero":
            return np.zeros_like(x)
        offset, amp = self.initial_params
        return offset + amp * np.sin(x)

    def forcing(self, x):
        return self.amplitude * np.sin(x + self.phase)


def _godunov_flux(u_left, u_right):
    # exact Riemann flux for f(u) = u^2 / 2
    return np.maximum(np.maximum(u_left, 0.0) ** 2, np.minimum(u_right, 0.0) ** 2) / 2.0


def advect(cfg: AdvectionConfig, times: Optional[Sequence[float]] = None):
    """Integrate to each requested time; returns ``(grid, [u(t) ...])``."""
    n = cfg.grid_points
    dx = 2.0 * math.pi / n
    x = dx * np.arange(n)
    u = cfg.initial_profile(x).astype(float)
    f = cfg.forcing(x)
    bound = 10.0 * (np.max(np.abs(u)) + 1.0)
    t = 0.0
    out = []
    for target in cfg.snapshot_times if times is None else times:
        while t < target:
            umax = float(np.max(np.abs(u)))
            dt = cfg.dt_max if umax == 0 else min(cfg.dt_max, 0.5 * dx / umax)
            if target - t < dt:
                dt = target - t
            flux = _godunov_flux(u, np.roll(u, -1))  # at i + 1/2
            u = u - dt / dx * (flux - np.roll(flux, 1)) + dt * f
            t = target if dt == target - t else t + dt
            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > bound:
                raise UnstableConfig(f"solution blew up near t = {t:.3f}")
        out.append(u.copy())
    return x, out


def periodic_interp(x_new, x_grid, values):
    return np.interp(x_new, x_grid, values, period=2.0 * math.pi)


def solve_advection(cfg: AdvectionConfig) -> Dataset:
    """Noisy snapshots ``u1, u2, ...`` at equispaced sample points plus the
    noiseless ``u1_true, ...`` columns."""
    grid, snaps = advect(cfg)
    xs = np.linspace(0.0, 2.0 * math.pi, cfg.samples_per_snapshot, endpoint=False)
    rng = np.random.default_rng(cfg.seed)
    cols = {"x": xs}
    for k, u in enumerate(snaps, start=1):
        truth = periodic_interp(xs, grid, u)
        cols[f"u{k}"] = truth + cfg.noise_sd * rng.standard_normal(xs.size)
        cols[f"u{k}_true"] = truth
    return Dataset(cols)


# ---------------------------------------------------------------------------
# tables


def load_table(path, schema: Sequence[str]) -> Dataset:
    """Read a comma-separated file with a header row, keeping ``schema``
    columns (in schema order)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: file is empty") from None
        missing = [c for c in schema if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {missing}")
        pos = [header.index(c) for c in schema]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = []
            for c, p in zip(schema, pos):
                cell = row[p].strip() if p < len(row) else ""
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericCell(lineno, c, cell) from None
            rows.append(values)
    arr = np.array(rows, dtype=float).reshape(len(rows), len(schema))
    return Dataset({c: arr[:, i] for i, c in enumerate(schema)})


def write_table(path, data: Dataset, columns: Optional[Sequence[str]] = None):
    columns = list(columns or data.names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in np.column_stack([data[c] for c in columns]):
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class Predicate:
    """Row filter ``column op value``."""

    column: str
    op: str
    value: float

    def __post_init__(self):
        if self.op not in COMPARE_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def __call__(self, data: Dataset):
        return COMPARE_OPS[self.op](data.original(self.column), self.value)


def percentile_predicate(data: Dataset, column: str, op: str, q: float) -> Predicate:
    """Predicate against the ``q``-th percentile of ``column``."""
    return Predicate(column, op, float(np.percentile(data.original(column), q)))


def split_by_predicate(data: Dataset, predicate: Callable[[Dataset], np.ndarray]):
    """``(rows where predicate holds, the rest)``."""
    mask = np.asarray(predicate(data), dtype=bool)
    if mask.shape != (data.n,):
        raise ValueError("predicate must give one flag per row")
    return data.subset(mask), data.subset(~mask)


def label_classes(data: Dataset, column: str, cutoff: float, name: Optional[str] = None) -> Dataset:
    """Add a binary column: 0 where ``column >= cutoff``, 1 below it."""
    if column not in data:
        raise UnknownColumn(f"unknown column {column!r}")
    name = name or f"{column}_class"
    values = np.where(data.original(column) >= cutoff, 0.0, 1.0)
    return data.with_columns(**{name: values})


def upsample_minority(train: Dataset, class_column: str, seed: int = 0) -> Dataset:
    """Append minority-class rows drawn with replacement until both classes
    have the majority count."""
    if class_column not in train:
        raise UnknownColumn(f"unknown column {class_column!r}")
    y = train[class_column]
    idx0 = np.flatnonzero(y == 0)
    idx1 = np.flatnonzero(y == 1)
    if idx0.size == 0 or idx1.size == 0:
        raise SingleClass("both classes must be present to upsample")
    minority, majority = (idx0, idx1) if idx0.size < idx1.size else (idx1, idx0)
    extra = np.random.default_rng(seed).choice(minority, majority.size - minority.size, replace=True)
    return train.subset(np.concatenate([np.arange(train.n), extra]))


# ---------------------------------------------------------------------------
# synthetic stand-ins for the two tabular datasets

POWERPLANT_SCHEMA = ("AT", "V", "AP", "RH", "PE")
EMISSIONS_SCHEMA = ("AT", "AH", "AFDP", "GTEP", "CO")


def _correlated(rng, z, mean, sd, rho):
    return mean + sd * (rho * z + math.sqrt(1.0 - rho * rho) * rng.standard_normal(z.size))


def synthetic_powerplant(n: int = 9568, seed: int = 0) -> Dataset:
    """Combined-cycle-plant-like table: output PE falls with temperature AT
    and exhaust vacuum V."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    at = np.clip(20.2 + 7.4 * z, 1.8, 37.1)
    v = np.clip(_correlated(rng, z, 54.3, 12.7, 0.84), 25.4, 81.6)
    ap = _correlated(rng, z, 1013.3, 5.9, -0.51)
    rh = np.clip(_correlated(rng, z, 73.3, 14.6, -0.54), 25.6, 100.0)
    pe = 454.6 - 1.977 * at - 0.234 * v + 0.0621 * ap - 0.158 * rh + 4.56 * rng.standard_normal(n)
    cols = {"AT": at, "V": v, "AP": ap, "RH": rh, "PE": pe}
    return Dataset({k: np.round(c, 2) for k, c in cols.items()})


def synthetic_emissions(n: int = 7152, seed: int = 0) -> Dataset:
    """Gas-turbine-like table: CO falls with exhaust pressure GTEP and rises
    with humidity AH."""
    rng = np.random.default_rng(seed)
    at = rng.uniform(-6.0, 37.0, n)
    raw = _correlated(rng, (at - 15.5) / 12.4, 74.0, 13.0, -0.45)
    ah = 100.2 - 1.5 * np.logaddexp(0.0, (100.2 - raw) / 1.5)  # soft cap below 100.2
    afdp = np.clip(3.9 + 0.6 * rng.standard_normal(n) + 0.02 * (at - 15.5), 2.1, 7.6)
    gtep = np.clip(25.8 + 4.2 * rng.standard_normal(n) - 0.05 * (at - 15.5), 17.7, 37.4)
    log_co = 0.4 - 0.03 * (at - 15.5) + 0.006 * (ah - 78.0) + 0.12 * (afdp - 3.9)
    log_co = log_co - 0.16 * (gtep - 25.8) + 0.35 * rng.standard_normal(n)
    co = np.exp(log_co)
    cols = {"AT": at, "AH": ah, "AFDP": afdp, "GTEP": gtep, "CO": co}
    return Dataset({k: np.round(c, 4) for k, c in cols.items()})
