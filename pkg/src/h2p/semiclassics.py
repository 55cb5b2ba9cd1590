"""Semiclassical equations of motion for the pair and the closed-form Bloch path.

For broad, well-separated packets with narrow momentum distributions the mean
positions and momenta obey

    dx/dt = 2 J sin(p_x)     dp_x/dt = +sign(y - x) dV/ds(|y - x|)
    dy/dt = 2 J sin(p_y)     dp_y/dt = -sign(y - x) dV/ds(|y - x|)

so p_x + p_y is a constant of motion.  Starting at rest with momenta (0, pi)
the separation never changes, the interaction force F = gamma U exp(-gamma d)
is constant, and the trajectory is the self-induced Bloch oscillation

    x(t) = x(0) + (2J/F) [cos(F t) - 1],    y(t) = x(t) - d

with period 2 pi / |F|.  The model is void at coincidence: trajectories abort
when |y - x| falls below MIN_SEPARATION.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import HubbardParams

MIN_SEPARATION = 0.5
DEFAULT_STEP = 1e-3


class CoincidenceError(RuntimeError):
    """Trajectory reached |y - x| < MIN_SEPARATION where the model is invalid.

    Carries the samples integrated so far in `partial` (list of t, x, y, px, py).
    """

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass
class SemiclassicalState:
    x: float
    y: float
    px: float
    py: float


@dataclass(frozen=True)
class ForceModel:
    """Constant interaction force at fixed separation d: F = gamma U exp(-gamma d)."""

    F: float
    d: float

    @classmethod
    def from_params(cls, params: HubbardParams, d: float) -> "ForceModel":
        if params.shape == "exponential":
            F = params.gamma * params.U * math.exp(-params.gamma * abs(d))
        else:
            F = 0.0
        return cls(F=F, d=d)

    @property
    def period(self) -> float:
        if self.F == 0.0:
            raise ValueError("zero force: no Bloch oscillation period")
        return 2.0 * math.pi / abs(self.F)

    @property
    def amplitude(self) -> float:
        """Extremal displacement |4J/F| of the closed-form path, in units of J=1."""
        if self.F == 0.0:
            raise ValueError("zero force: unbounded path")
        return abs(4.0 / self.F)


def interaction_force(params: HubbardParams, s: float) -> float:
    """dV/ds at separation |s| > 0; for exponential tails this is -gamma U e^{-gamma|s|}."""
    if s == 0.0:
        raise ValueError("force undefined at coincidence s = 0")
    if params.shape == "exponential":
        return -params.gamma * params.U * math.exp(-params.gamma * abs(s))
    if params.shape == "onsite_only":
        return 0.0
    raise ValueError(f"no smooth force model for shape {params.shape!r}")


class _Coincide(Exception):
    pass


def _rhs(state, params):
    x, y, px, py = state
    s = y - x
    if abs(s) < MIN_SEPARATION:
        raise _Coincide
    f = interaction_force(params, s)
    sgn = 1.0 if s > 0 else -1.0
    return (
        2.0 * params.J * math.sin(px),
        2.0 * params.J * math.sin(py),
        sgn * f,
        -sgn * f,
    )


def integrate(
    initial: SemiclassicalState,
    params: HubbardParams,
    t_final: float,
    dt_out: float = 0.1,
    step: float = DEFAULT_STEP,
):
    """Fixed-step 4th-order trajectory sampled on the dt_out grid.

    Returns an array of rows (t, x, y, px, py).  The two momentum forces are
    exactly opposite, so px + py is conserved to roundoff.  Raises
    CoincidenceError carrying the partial trajectory if |y - x| falls below
    MIN_SEPARATION before t_final.
    """
    if t_final <= 0:
        raise ValueError(f"t_final must be > 0, got {t_final}")
    n_out = int(round(t_final / dt_out))
    if abs(n_out * dt_out - t_final) > 1e-9 * max(1.0, t_final):
        n_out = int(math.ceil(t_final / dt_out))
    dt_out = t_final / n_out
    sub = max(1, int(round(dt_out / step)))
    h = dt_out / sub

    state = (initial.x, initial.y, initial.px, initial.py)
    rows = [(0.0, *state)]
    for i in range(n_out):
        for j in range(sub):
            try:
                k1 = _rhs(state, params)
                k2 = _rhs(tuple(u + 0.5 * h * k for u, k in zip(state, k1)), params)
                k3 = _rhs(tuple(u + 0.5 * h * k for u, k in zip(state, k2)), params)
                k4 = _rhs(tuple(u + h * k for u, k in zip(state, k3)), params)
            except _Coincide:
                raise CoincidenceError(
                    f"separation fell below {MIN_SEPARATION} at t ~ {i * dt_out + j * h:.4g}",
                    np.asarray(rows),
                ) from None
            state = tuple(
                u + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                for u, a, b, c, d in zip(state, k1, k2, k3, k4)
            )
        rows.append(((i + 1) * dt_out, *state))
    return np.asarray(rows)


def closed_form_bloch(x0: float, d: float, params: HubbardParams, t) -> tuple:
    """Constant-force Bloch path: x(t) = x0 + (2J/F)(cos Ft - 1), y(t) = x(t) - d.

    The x-formula is even in F, so it describes the leading coordinate for
    either ordering; the companion coordinate is offset by the constant d.
    Falls back to the zero-force limit x(t) = x0 when F vanishes.
    """
    fm = ForceModel.from_params(params, d)
    t = np.asarray(t, dtype=float)
    if fm.F == 0.0:
        x = np.full_like(t, x0)
    else:
        x = x0 + (2.0 * params.J / fm.F) * (np.cos(fm.F * t) - 1.0)
    return x, x - d


def bloch_period(params: HubbardParams, d: float) -> float:
    """Oscillation period 2 pi / |F| of the self-induced Bloch path."""
    return ForceModel.from_params(params, d).period


def write_trajectory_csv(path, rows, force_model: ForceModel | None = None) -> None:
    """Trajectory CSV (header t,x,y,px,py) plus a sidecar JSON {F, period, amplitude}."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "px", "py"])
        for row in np.asarray(rows):
            writer.writerow([repr(float(v)) for v in row])
    if force_model is not None:
        meta = {
            "F": force_model.F,
            "period": force_model.period if force_model.F else None,
            "amplitude": force_model.amplitude if force_model.F else None,
        }
        sidecar = str(path) + ".json"
        with open(sidecar, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ("t", "x", "y", "px", "py"):
            raise ValueError(f"unexpected trajectory header {header}")
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=float)
    return {name: data[:, i] for i, name in enumerate(("t", "x", "y", "px", "py"))}
