"""Lattice geometry, interaction potential, two-particle states and the Hamiltonian.

The system is two distinguishable particles (or two bosons) hopping on a 1D
chain of ``n_sites`` sites with hopping rate J and a separation-dependent
interaction W(|y-x|).  A two-particle state is a complex amplitude grid
psi(x, y); the Hamiltonian acts as the five-point stencil

    (H psi)(x, y) = -J [psi(x-1,y) + psi(x+1,y) + psi(x,y-1) + psi(x,y+1)]
                    + W(|y-x|) psi(x, y)

with out-of-range neighbours dropped (open boundary) or wrapped (periodic).
Energies are measured in units of J, times in units of 1/J.

Everything here is a pure function of its inputs; reductions (norms, inner
products) go through numpy's deterministic summation, so repeated runs are
bit-identical and states can be handed freely between threads.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

BOUNDARIES = ("open", "periodic")
SHAPES = ("exponential", "onsite_only", "custom")
STATISTICS = ("distinguishable", "bosonic")

EDGE_STRIP = 2          # sites counted as "edge" for leakage/clipping checks
CLIP_TOL = 1e-8         # initial edge occupation above this flags a clipped packet


class ClippedPacketWarning(UserWarning):
    """Initial wave packet has non-negligible weight on the lattice edge."""


@dataclass(frozen=True)
class LatticeSpec:
    """1D chain housing both particle coordinates x, y in 0..n_sites-1."""

    n_sites: int
    boundary: str = "open"

    def __post_init__(self):
        if self.n_sites < 4:
            raise ValueError(f"n_sites must be >= 4, got {self.n_sites}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")


@dataclass(frozen=True)
class HubbardParams:
    """Physical constants: hopping J, on-site U, interaction range gamma.

    J sets the unit of energy (J=1 in all shipped experiments) but J=0 is
    accepted so the purely diagonal limit stays constructible.  For the
    exponential shape W(s) = U exp(-gamma |s|) at every integer separation,
    so W(0) = U; onsite_only means W(0)=U and W(s)=0 otherwise.
    """

    J: float = 1.0
    U: float = 0.0
    gamma: float = 1.0
    shape: str = "exponential"
    statistics: str = "distinguishable"
    custom_table: tuple[float, ...] | None = None

    def __post_init__(self):
        if not np.isfinite(self.J) or self.J < 0:
            raise ValueError(f"J must be finite and >= 0, got {self.J}")
        if not np.isfinite(self.U):
            raise ValueError(f"U must be finite, got {self.U}")
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.shape == "exponential" and (not np.isfinite(self.gamma) or self.gamma <= 0):
            raise ValueError(f"gamma must be finite and > 0 for exponential shape, got {self.gamma}")
        if self.statistics not in STATISTICS:
            raise ValueError(f"statistics must be one of {STATISTICS}, got {self.statistics!r}")
        if self.shape == "custom" and self.custom_table is None:
            raise ValueError("custom shape requires custom_table")


@dataclass(frozen=True)
class InteractionPotential:
    """Tabulated W(s) for integer separations s = 0..len(table)-1."""

    table: np.ndarray

    def __call__(self, s):
        return self.table[np.abs(s)]

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.table)))


def potential_table(params: HubbardParams, length: int) -> np.ndarray:
    """W(s) values for s = 0..length-1 under the configured shape."""
    s = np.arange(length)
    if params.shape == "exponential":
        return params.U * np.exp(-params.gamma * s)
    if params.shape == "onsite_only":
        table = np.zeros(length)
        table[0] = params.U
        return table
    table = np.zeros(length)
    src = np.asarray(params.custom_table, dtype=float)
    m = min(length, len(src))
    table[:m] = src[:m]
    return table


def build_potential(params: HubbardParams, lattice: LatticeSpec) -> InteractionPotential:
    """Interaction table over all separations realisable on the lattice."""
    return InteractionPotential(potential_table(params, lattice.n_sites))


@dataclass
class TwoParticleState:
    """Complex amplitude grid psi[x, y] (x is the first/row index) at a given time."""

    amplitudes: np.ndarray
    time: float = 0.0
    lattice: LatticeSpec | None = None

    @property
    def n_sites(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "TwoParticleState":
        return TwoParticleState(self.amplitudes.copy(), self.time, self.lattice)


def separation_grid(lattice: LatticeSpec) -> np.ndarray:
    """|y - x| on the amplitude grid; geodesic distance on a periodic chain."""
    n = lattice.n_sites
    x = np.arange(n)
    d = np.abs(x[None, :] - x[:, None])
    if lattice.boundary == "periodic":
        d = np.minimum(d, n - d)
    return d


def potential_grid(potential: InteractionPotential, lattice: LatticeSpec) -> np.ndarray:
    return potential.table[separation_grid(lattice)]


def apply_hamiltonian(
    state: TwoParticleState,
    potential: InteractionPotential,
    params: HubbardParams,
    lattice: LatticeSpec,
) -> TwoParticleState:
    """Unnormalized image H psi (linear, Hermitian)."""
    psi = state.amplitudes
    if psi.shape != (lattice.n_sites, lattice.n_sites):
        raise ValueError(
            f"state grid {psi.shape} does not match lattice ({lattice.n_sites}, {lattice.n_sites})"
        )
    out = potential_grid(potential, lattice) * psi
    _accumulate_kinetic(out, psi, params.J, lattice.boundary)
    return TwoParticleState(out, state.time, lattice)


def _accumulate_kinetic(out: np.ndarray, psi: np.ndarray, J: float, boundary: str) -> None:
    """Add -J * (sum of four nearest-neighbour shifts of psi) into out, in place."""
    if J == 0.0:
        return
    if boundary == "periodic":
        out -= J * (np.roll(psi, 1, axis=0) + np.roll(psi, -1, axis=0)
                    + np.roll(psi, 1, axis=1) + np.roll(psi, -1, axis=1))
    else:
        out[1:, :] -= J * psi[:-1, :]
        out[:-1, :] -= J * psi[1:, :]
        out[:, 1:] -= J * psi[:, :-1]
        out[:, :-1] -= J * psi[:, 1:]


def edge_occupation(state: TwoParticleState) -> float:
    """Probability within EDGE_STRIP sites of any lattice edge (0 for periodic chains)."""
    if state.lattice is not None and state.lattice.boundary == "periodic":
        return 0.0
    prob = np.abs(state.amplitudes) ** 2
    k = EDGE_STRIP
    total = prob[:k, :].sum() + prob[-k:, :].sum()
    total += prob[k:-k, :k].sum() + prob[k:-k, -k:].sum()
    return float(total)


def gaussian_packet(
    lattice: LatticeSpec,
    center: tuple[float, float],
    width: float,
    momenta: tuple[float, float] = (0.0, 0.0),
    statistics: str = "distinguishable",
) -> TwoParticleState:
    """Normalized product Gaussian exp[-(x-x0)^2/w^2 - (y-y0)^2/w^2] e^{i(px x + py y)}.

    Positive momentum p gives positive group velocity 2 J sin p.  For bosonic
    statistics the packet is exchange-symmetrized.  A packet whose tail
    occupies the edge strip beyond CLIP_TOL emits ClippedPacketWarning.
    """
    x0, y0 = center
    n = lattice.n_sites
    if width <= 0:
        raise ValueError(f"width must be > 0, got {width}")
    if not (0 <= x0 < n and 0 <= y0 < n):
        raise ValueError(f"packet center {center} outside lattice 0..{n - 1}")
    px, py = momenta
    x = np.arange(n)
    gx = np.exp(-((x - x0) ** 2) / width**2) * np.exp(1j * px * x)
    gy = np.exp(-((x - y0) ** 2) / width**2) * np.exp(1j * py * x)
    psi = np.outer(gx, gy)
    psi /= np.linalg.norm(psi)
    state = TwoParticleState(psi, 0.0, lattice)
    if statistics == "bosonic":
        state = symmetrize(state)
    if edge_occupation(state) > CLIP_TOL:
        warnings.warn(
            f"initial packet clipped by boundary (edge occupation > {CLIP_TOL:g})",
            ClippedPacketWarning,
            stacklevel=2,
        )
    return state


def symmetrize(state: TwoParticleState) -> TwoParticleState:
    """Exchange-symmetric projection [psi(x,y) + psi(y,x)] / norm."""
    sym = state.amplitudes + state.amplitudes.T
    nrm = np.linalg.norm(sym)
    if nrm <= 1e-12 * max(state.norm(), 1e-300):
        raise ValueError("state is annihilated by symmetrization (antisymmetric input)")
    return TwoParticleState(sym / nrm, state.time, state.lattice)


def checkerboard_phase(amplitudes: np.ndarray) -> np.ndarray:
    """Pointwise gauge map (G psi)(x,y) = (-1)^(x+y) psi(x,y).

    Conjugating H by G flips the sign of the kinetic term, so occupation
    dynamics under (W, psi0) and (-W, G conj(psi0)) coincide.
    """
    n = amplitudes.shape[0]
    sign = (-1.0) ** (np.arange(n)[:, None] + np.arange(n)[None, :])
    return sign * amplitudes


def inner(a: TwoParticleState, b: TwoParticleState) -> complex:
    """<a|b> with deterministic summation order."""
    return complex(np.vdot(a.amplitudes, b.amplitudes))


# Grid dump format: little-endian, header {magic "H2PG", u32 n_sites, f64 time},
# then n_sites^2 amplitudes as interleaved f64 (re, im), row-major in x.
GRID_MAGIC = b"H2PG"


def save_grid(path, state: TwoParticleState) -> None:
    n = state.n_sites
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<I", n))
        fh.write(struct.pack("<d", state.time))
        flat = np.ascontiguousarray(state.amplitudes, dtype=np.complex128)
        pairs = np.empty((n * n, 2), dtype="<f8")
        pairs[:, 0] = flat.real.ravel()
        pairs[:, 1] = flat.imag.ravel()
        fh.write(pairs.tobytes())


def load_grid(path) -> TwoParticleState:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != GRID_MAGIC:
            raise ValueError(f"bad grid dump magic {magic!r}")
        (n,) = struct.unpack("<I", fh.read(4))
        (time,) = struct.unpack("<d", fh.read(8))
        pairs = np.frombuffer(fh.read(16 * n * n), dtype="<f8").reshape(n * n, 2)
        psi = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(n, n)
    return TwoParticleState(psi, time, None)
