"""Measured quantities: marginals, means, lattice velocities, momentum distribution.

The velocity observable is the shift-operator matrix element

    v_x = 2 J Im sum_{x,y} conj(psi(x,y)) psi(x+1,y)

which equals 2J <sin p_x> exactly on the lattice and needs no momentum grid;
it is the time derivative of <x> (the lattice Ehrenfest identity).  The bare
quasi-momentum mean is only defined modulo 2 pi and is deliberately not an
observable here; use the momentum distribution for diagnostics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import TwoParticleState


@dataclass(frozen=True)
class MarginalDistribution:
    """Single-particle site occupations P_up(x) = sum_y |psi|^2, P_down(y) = sum_x |psi|^2."""

    p_up: np.ndarray
    p_down: np.ndarray


def marginals(state: TwoParticleState) -> MarginalDistribution:
    prob = np.abs(state.amplitudes) ** 2
    return MarginalDistribution(p_up=prob.sum(axis=1), p_down=prob.sum(axis=0))


def mean_positions(state: TwoParticleState) -> tuple[float, float]:
    """First moments (<x>, <y>) of the marginals."""
    m = marginals(state)
    sites = np.arange(state.n_sites, dtype=float)
    w = m.p_up.sum()
    return float(sites @ m.p_up / w), float(sites @ m.p_down / w)


def velocity_expectations(state: TwoParticleState, J: float) -> tuple[float, float]:
    """(v_x, v_y) = 2J <sin p>, exact shift-operator form; values lie in [-2J, 2J]."""
    psi = state.amplitudes
    periodic = state.lattice is not None and state.lattice.boundary == "periodic"
    if periodic:
        sx = np.sum(np.conj(psi) * np.roll(psi, -1, axis=0))
        sy = np.sum(np.conj(psi) * np.roll(psi, -1, axis=1))
    else:
        sx = np.sum(np.conj(psi[:-1, :]) * psi[1:, :])
        sy = np.sum(np.conj(psi[:, :-1]) * psi[:, 1:])
    return 2.0 * J * float(sx.imag), 2.0 * J * float(sy.imag)


def momentum_grid(n: int) -> np.ndarray:
    """Monotone momentum grid in [-pi, pi); equals p_k = 2 pi k / n - pi for even n."""
    return 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(n))


def momentum_distribution(state: TwoParticleState) -> tuple[np.ndarray, np.ndarray]:
    """Joint probability over (p_x, p_y) on the momentum grid, via 2D DFT.

    The transform treats the grid as periodic; for open boundaries this is the
    standard windowed approximation.  Parseval: the distribution sums to the
    squared state norm.  Returns (P, p) with P[i, j] at (p[i], p[j]).
    """
    n = state.n_sites
    # fft uses e^{-ipx}; normalize so probabilities sum to ||psi||^2
    amp = np.fft.fft2(state.amplitudes) / n
    prob = np.fft.fftshift(np.abs(amp) ** 2)
    return prob, momentum_grid(n)


@dataclass
class ObservableSeries:
    """Per-sample time series written by the evolution loop."""

    t: list = field(default_factory=list)
    mean_x: list = field(default_factory=list)
    mean_y: list = field(default_factory=list)
    sep: list = field(default_factory=list)
    com: list = field(default_factory=list)
    vx: list = field(default_factory=list)
    vy: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    edge_leak: list = field(default_factory=list)

    COLUMNS = ("t", "mean_x", "mean_y", "sep", "com", "vx", "vy", "norm", "energy", "edge_leak")

    def append(self, **kw) -> None:
        for name in self.COLUMNS:
            getattr(self, name).append(kw[name])

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(getattr(self, name), dtype=float) for name in self.COLUMNS}

    def __len__(self) -> int:
        return len(self.t)


def record_sample(series: ObservableSeries, state: TwoParticleState, J: float,
                  energy: float, edge_leak: float) -> None:
    mx, my = mean_positions(state)
    vx, vy = velocity_expectations(state, J)
    series.append(
        t=state.time, mean_x=mx, mean_y=my, sep=my - mx, com=0.5 * (mx + my),
        vx=vx, vy=vy, norm=state.norm(), energy=energy, edge_leak=edge_leak,
    )


def write_series_csv(path, series: ObservableSeries) -> None:
    """CSV with the exact header t,mean_x,mean_y,sep,com,vx,vy,norm,energy,edge_leak."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ObservableSeries.COLUMNS)
        cols = [getattr(series, name) for name in ObservableSeries.COLUMNS]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])


def read_series_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ObservableSeries.COLUMNS:
            raise ValueError(f"unexpected series header {header}")
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=float)
    return {name: data[:, i] for i, name in enumerate(ObservableSeries.COLUMNS)}


def ehrenfest_check(record) -> tuple[float, float]:
    """Max |central-difference d<x>/dt - v_x| over interior samples (same for y).

    Requires dt_out <= 0.01 so the O(dt^2) differencing error stays well under
    the identity's scale; raises on coarser sampling.
    """
    series = record.observables
    t = np.asarray(series.t)
    if len(t) < 3:
        raise ValueError("need at least 3 samples for a central difference")
    dt = float(t[1] - t[0])
    if dt > 0.01 + 1e-12:
        raise ValueError(f"sampling dt_out = {dt} too coarse; need <= 0.01")
    res = []
    for pos, vel in ((series.mean_x, series.vx), (series.mean_y, series.vy)):
        p = np.asarray(pos)
        v = np.asarray(vel)
        deriv = (p[2:] - p[:-2]) / (2.0 * dt)
        res.append(float(np.max(np.abs(deriv - v[1:-1]))))
    return res[0], res[1]
