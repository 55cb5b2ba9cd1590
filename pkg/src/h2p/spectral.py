"""Relative-motion eigenproblem at fixed total quasi-momentum K.

Separating the pair state as f(y-x) exp[iK(x+y)/2] reduces the two-particle
problem to a single tridiagonal operator in the relative coordinate s:

    -2 J cos(K/2) [f(s+1) + f(s-1)] + W(|s|) f(s) = E f(s)

Its spectrum splits into a continuum band |E| <= 4J|cos(K/2)| (scattered
pair states) and discrete levels outside the band (doublons, i.e. bound
pairs).  The operator is truncated to s in [-S, S]; a level only counts as a
certified bound state when its wavefunction has decayed at the truncation
edge, measured through the infinite-operator residual |t_eff| |f(+-S)|.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .model import HubbardParams, InteractionPotential, potential_table

BAND_MARGIN = 1e-8        # energy margin when classifying bound vs continuum
EDGE_TOL = 1e-8           # max |t_eff/2J| * |f(+-S)| for a certified bound state


class TruncationError(RuntimeError):
    """Bound-state candidate has not decayed at s = +-S; enlarge S."""


def default_truncation(params: HubbardParams) -> int:
    """Half-width S of the relative coordinate window; >= 12/gamma for exponential tails."""
    if params.shape == "exponential":
        return max(100, math.ceil(12.0 / params.gamma))
    return 100


@dataclass(frozen=True)
class RelativeProblem:
    """Truncated relative-coordinate problem at total quasi-momentum K."""

    K: float
    S: int
    potential: InteractionPotential
    J: float = 1.0

    def __post_init__(self):
        if not -np.pi <= self.K <= np.pi:
            raise ValueError(f"K must lie in [-pi, pi], got {self.K}")
        if len(self.potential.table) < self.S + 1:
            raise ValueError(
                f"potential table covers s < {len(self.potential.table)}, need S+1 = {self.S + 1}"
            )

    @property
    def t_eff(self) -> float:
        """Off-diagonal element -2 J cos(K/2) of the tridiagonal operator."""
        return -2.0 * self.J * math.cos(self.K / 2.0)

    @property
    def band_edge(self) -> float:
        """Half-width 4J|cos(K/2)| of the scattering continuum."""
        return 2.0 * abs(self.t_eff)


def relative_problem(params: HubbardParams, K: float, S: int | None = None) -> RelativeProblem:
    """Convenience constructor evaluating the interaction out to the truncation edge."""
    if S is None:
        S = default_truncation(params)
    if params.shape == "exponential" and S < 10.0 / params.gamma:
        raise ValueError(f"S = {S} too small: need S >= 10/gamma = {10.0 / params.gamma:.1f}")
    pot = InteractionPotential(potential_table(params, S + 1))
    return RelativeProblem(K=K, S=S, potential=pot, J=params.J)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Real symmetric tridiagonal matrix stored as diagonal + off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        idx = np.arange(len(self.off))
        m[idx, idx + 1] = self.off
        m[idx + 1, idx] = self.off
        return m

    def matvec(self, f: np.ndarray) -> np.ndarray:
        out = self.diag * f
        out[:-1] += self.off * f[1:]
        out[1:] += self.off * f[:-1]
        return out


def relative_hamiltonian(problem: RelativeProblem) -> TridiagonalOperator:
    """Tridiagonal operator of dimension 2S+1: diag W(|s|), off-diagonal -2J cos(K/2)."""
    s = np.arange(-problem.S, problem.S + 1)
    diag = problem.potential.table[np.abs(s)].astype(float)
    off = np.full(2 * problem.S, problem.t_eff)
    return TridiagonalOperator(diag, off)


@dataclass(frozen=True)
class BoundState:
    energy: float
    wavefunction: np.ndarray     # real f(s) over s in [-S, S], unit norm
    parity: str                  # "symmetric" | "antisymmetric"
    K: float


@dataclass(frozen=True)
class ScatteringSolution:
    q: float
    delta_s: float
    delta_a: float
    K: float
    energy: float
    fit_residual: float


def _parity_split(vectors: np.ndarray, tol: float = 1e-7) -> list[tuple[str, np.ndarray]]:
    """Resolve a (near-)degenerate eigenvector cluster into definite-parity vectors.

    Columns of `vectors` span one eigenvalue cluster.  Both parity projections
    are rank-revealed with QR; ranks add up to the cluster size.
    """
    out = []
    for parity, sign in (("symmetric", 1.0), ("antisymmetric", -1.0)):
        proj = 0.5 * (vectors + sign * vectors[::-1, :])
        q, r = np.linalg.qr(proj)
        keep = np.abs(np.diag(r)) > tol
        for col in np.where(keep)[0]:
            v = q[:, col]
            v = 0.5 * (v + sign * v[::-1])   # re-project to kill QR roundoff
            out.append((parity, v / np.linalg.norm(v)))
    return out


def solve_bound_states(problem: RelativeProblem, strict: bool = False) -> list[BoundState]:
    """All certified bound states, ordered by energy.

    A level qualifies when |E| > band_edge + BAND_MARGIN and its edge residual
    |t_eff| max|f(+-S)| is below 2J * EDGE_TOL (at K=0 this is the plain edge
    amplitude test |f(+-S)| <= EDGE_TOL; at K=pi localized levels are exact
    eigenstates and pass automatically).  Candidates failing the edge test are
    dropped, or raise TruncationError when strict=True.
    """
    op = relative_hamiltonian(problem)
    w, v = eigh_tridiagonal(op.diag, op.off)
    cutoff = problem.band_edge + BAND_MARGIN
    idx = np.where(np.abs(w) > cutoff)[0]
    if idx.size == 0:
        return []

    scale = 2.0 * problem.J if problem.J > 0 else 1.0
    states: list[BoundState] = []
    # group candidates into eigenvalue clusters so degenerate pairs get definite parity
    groups: list[list[int]] = [[idx[0]]]
    for i in idx[1:]:
        if abs(w[i] - w[groups[-1][-1]]) < 1e-12 * max(1.0, abs(w[i])):
            groups[-1].append(i)
        else:
            groups.append([i])
    for grp in groups:
        energy = float(np.mean(w[grp]))
        for parity, f in _parity_split(v[:, grp]):
            edge = abs(problem.t_eff) * max(abs(f[0]), abs(f[-1]))
            if edge > scale * EDGE_TOL:
                if strict:
                    raise TruncationError(
                        f"bound-state candidate at E={energy:.6g} has edge residual "
                        f"{edge:.3g} > {scale * EDGE_TOL:.3g}; enlarge S"
                    )
                continue
            states.append(BoundState(energy=energy, wavefunction=f, parity=parity, K=problem.K))
    states.sort(key=lambda b: (b.energy, b.parity))
    return states


def certify_bound_states(
    problem: RelativeProblem, params: HubbardParams, energy_tol: float = 1e-10
) -> list[BoundState]:
    """Solve at S and 2S; require certified energies to shift by less than energy_tol."""
    states = solve_bound_states(problem)
    doubled = relative_problem(params, problem.K, 2 * problem.S)
    ref = solve_bound_states(doubled)
    ref_e = np.array([b.energy for b in ref])
    for b in states:
        if not len(ref_e) or np.min(np.abs(ref_e - b.energy)) > energy_tol:
            raise TruncationError(
                f"bound energy {b.energy:.12g} shifts by more than {energy_tol:g} "
                f"when S doubles from {problem.S}"
            )
    return states


def onsite_doublon_energy(U: float, J: float, K: float) -> float:
    """Analytic bound-pair dispersion -sign(U) sqrt(U^2 + 16 J^2 cos^2(K/2)) for W = U delta_s0."""
    root = math.sqrt(U * U + 16.0 * J * J * math.cos(K / 2.0) ** 2)
    return -root if U < 0 else root


def doublon_band_sweep(
    params: HubbardParams, k_grid, S: int | None = None
) -> list[tuple[float, list[BoundState]]]:
    """Certified bound states for each K in k_grid (each K solved independently)."""
    out = []
    for K in k_grid:
        problem = relative_problem(params, float(K), S)
        out.append((float(K), solve_bound_states(problem)))
    return out


def write_band_table(path, sweep: list[tuple[float, list[BoundState]]]) -> None:
    """CSV export, one row per (K, branch): header K,branch,E_over_J,parity."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["K", "branch", "E_over_J", "parity"])
        for K, states in sweep:
            for branch, b in enumerate(states):
                writer.writerow([repr(K), branch, repr(b.energy), b.parity])


def scattering_phase_shift(
    problem: RelativeProblem,
    q: float,
    fit_window: int = 24,
    decay_tol: float = 1e-12,
    fit_tol: float = 1e-8,
    q_margin: float = 0.01,
) -> ScatteringSolution:
    """Phase shifts of symmetric/antisymmetric scattered states at relative momentum q.

    Integrates the three-term recurrence outward from s=0 at the band energy
    E = -4J cos(K/2) cos q, then reads amplitude and phase off the free tail
    where the potential has decayed below decay_tol.  Phases measure the
    deviation from free motion in each channel:

        f_S ~ cos(q|s| + delta_S),    f_A ~ sign(s) sin(q|s| + delta_A)

    so W = 0 gives delta_S = delta_A = 0.  Both are reduced to (-pi/2, pi/2]
    modulo pi (eigenfunctions are defined up to overall sign).
    """
    if not (q_margin < q < np.pi - q_margin):
        raise ValueError(f"q = {q} too close to 0 or pi (degenerate tail fit)")
    t = problem.t_eff
    if t == 0.0:
        raise ValueError("K = +-pi: zero effective hopping, no propagating states")
    table = problem.potential.table
    S = problem.S
    window = np.arange(S - fit_window, S + 1)
    if np.max(np.abs(table[window])) > decay_tol:
        raise ValueError(
            f"potential not decayed below {decay_tol:g} on the fit window s in "
            f"[{window[0]}, {S}]"
        )
    energy = 2.0 * t * math.cos(q)

    def integrate(f0: float, f1: float) -> np.ndarray:
        f = np.empty(S + 1)
        f[0], f[1] = f0, f1
        for s in range(1, S):
            f[s + 1] = (energy - table[s]) * f[s] / t - f[s - 1]
        return f

    # symmetric: f(-1) = f(1), so the s=0 row gives 2 t f(1) + W(0) f(0) = E f(0)
    f_sym = integrate(1.0, (energy - table[0]) / (2.0 * t))
    # antisymmetric: f(0) = 0, f(1) free
    f_anti = integrate(0.0, 1.0)

    def tail_phase(f: np.ndarray, reference: float) -> tuple[float, float]:
        s1 = S - 1
        c1, c2 = f[s1], f[s1 + 1]
        # c1 = A cos(q s1 + th), c2 = A cos(q (s1+1) + th)
        a_sin = (c1 * math.cos(q) - c2) / math.sin(q)
        theta = math.atan2(a_sin, c1)
        amp = math.hypot(a_sin, c1)
        # residual of the fitted cosine over the whole window
        model = amp * np.cos(q * window + theta - q * s1)
        resid = float(np.max(np.abs(f[window] - model)) / max(amp, 1e-300))
        delta = theta - q * s1 + reference
        delta = (delta + np.pi / 2) % np.pi - np.pi / 2
        if delta <= -np.pi / 2 + 1e-14:
            delta += np.pi
        return delta, resid

    # symmetric channel measured against cos(qs); antisymmetric against sin(qs)
    delta_s, res_s = tail_phase(f_sym, 0.0)
    delta_a, res_a = tail_phase(f_anti, math.pi / 2)
    resid = max(res_s, res_a)
    if resid > fit_tol:
        raise ValueError(f"tail fit residual {resid:.3g} exceeds {fit_tol:g}")
    return ScatteringSolution(
        q=q, delta_s=delta_s, delta_a=delta_a, K=problem.K, energy=energy, fit_residual=resid
    )
