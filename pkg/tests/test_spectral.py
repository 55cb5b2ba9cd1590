import math

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from h2p.model import HubbardParams, InteractionPotential
from h2p.spectral import (
    BAND_MARGIN,
    BoundState,
    RelativeProblem,
    TruncationError,
    certify_bound_states,
    default_truncation,
    doublon_band_sweep,
    onsite_doublon_energy,
    relative_hamiltonian,
    relative_problem,
    scattering_phase_shift,
    solve_bound_states,
    write_band_table,
)

EXP_PARAMS = HubbardParams(J=1.0, U=-6.0, gamma=1 / 12)
ONSITE_PARAMS = HubbardParams(J=1.0, U=-6.0, shape="onsite_only")


def dense_bound_energies(problem):
    """Brute-force oracle: dense diagonalization of the truncated tridiagonal operator."""
    op = relative_hamiltonian(problem)
    evals = np.linalg.eigvalsh(op.to_dense())
    return evals[np.abs(evals) > problem.band_edge + BAND_MARGIN]


class TestRelativeHamiltonian:
    def test_k_pi_flat_band(self):
        problem = relative_problem(EXP_PARAMS, K=math.pi, S=144)
        op = relative_hamiltonian(problem)
        assert np.max(np.abs(op.off)) < 1e-15
        evals = np.sort(np.linalg.eigvalsh(op.to_dense()))
        s = np.arange(-144, 145)
        expected = np.sort(EXP_PARAMS.U * np.exp(-EXP_PARAMS.gamma * np.abs(s)))
        np.testing.assert_allclose(evals, expected, atol=1e-12)

    def test_k_zero_hopping(self):
        op = relative_hamiltonian(relative_problem(EXP_PARAMS, K=0.0, S=144))
        np.testing.assert_allclose(op.off, -2.0, atol=1e-15)

    def test_free_spectrum_fills_band(self):
        pot = InteractionPotential(np.zeros(301))
        problem = RelativeProblem(K=0.0, S=300, potential=pot, J=1.0)
        evals = eigh_tridiagonal(*_diag_off(problem), eigvals_only=True)
        assert evals.min() > -4.0 and evals.max() < 4.0
        assert evals.min() == pytest.approx(-4.0, abs=1e-3)
        assert evals.max() == pytest.approx(4.0, abs=1e-3)

    def test_matvec_matches_dense(self, rng):
        problem = relative_problem(EXP_PARAMS, K=0.7, S=144)
        op = relative_hamiltonian(problem)
        f = rng.normal(size=2 * 144 + 1)
        np.testing.assert_allclose(op.matvec(f), op.to_dense() @ f, atol=1e-12)


def _diag_off(problem):
    op = relative_hamiltonian(problem)
    return op.diag, op.off


class TestSolveBoundStates:
    def test_onsite_single_doublon_matches_oracles(self):
        problem = relative_problem(ONSITE_PARAMS, K=0.0)
        states = solve_bound_states(problem)
        assert len(states) == 1
        # dense diagonalization oracle on the same truncated operator
        oracle = dense_bound_energies(problem)
        assert len(oracle) == 1
        assert states[0].energy == pytest.approx(oracle[0], abs=1e-12)
        # analytic on-site doublon dispersion -sqrt(U^2 + 16 J^2)
        assert states[0].energy == pytest.approx(-math.sqrt(52.0), abs=1e-6)
        assert states[0].parity == "symmetric"

    def test_no_potential_no_doublons(self):
        params = HubbardParams(J=1.0, U=0.0, gamma=1 / 12)
        assert solve_bound_states(relative_problem(params, K=0.0)) == []

    def test_long_range_count_near_25(self):
        problem = relative_problem(EXP_PARAMS, K=0.0)
        count = len(solve_bound_states(problem))
        assert 23 <= count <= 27

    def test_count_stable_under_doubling(self):
        s0 = default_truncation(EXP_PARAMS)
        for S in (s0, 2 * s0):
            count = len(solve_bound_states(relative_problem(EXP_PARAMS, K=0.0, S=S)))
            assert 23 <= count <= 27

    def test_strict_mode_raises_on_unconverged_tail(self):
        # near-threshold levels have not decayed at the default truncation
        problem = relative_problem(EXP_PARAMS, K=0.0)
        with pytest.raises(TruncationError):
            solve_bound_states(problem, strict=True)

    def test_certify_energy_stability(self):
        problem = relative_problem(EXP_PARAMS, K=0.0)
        states = certify_bound_states(problem, EXP_PARAMS, energy_tol=1e-10)
        assert len(states) >= 23

    def test_bound_state_invariants(self):
        problem = relative_problem(EXP_PARAMS, K=0.0)
        op = relative_hamiltonian(problem)
        states = solve_bound_states(problem)
        for b in states:
            f = b.wavefunction
            # eigen-residual against the truncated operator
            assert np.linalg.norm(op.matvec(f) - b.energy * f) <= 1e-9
            # converged truncation: negligible edge amplitude
            assert max(abs(f[0]), abs(f[-1])) <= 1e-8
            # strict band separation
            assert abs(b.energy) > problem.band_edge
            # exact parity after projection
            sign = 1.0 if b.parity == "symmetric" else -1.0
            np.testing.assert_array_equal(f, sign * f[::-1])

    def test_orthonormality(self):
        problem = relative_problem(EXP_PARAMS, K=0.0)
        states = solve_bound_states(problem)
        basis = np.stack([b.wavefunction for b in states])
        gram = basis @ basis.T
        np.testing.assert_allclose(gram, np.eye(len(states)), atol=1e-10)

    def test_completeness_of_classification(self):
        problem = relative_problem(EXP_PARAMS, K=0.4, S=144)
        evals = eigh_tridiagonal(*_diag_off(problem), eigvals_only=True)
        n_bound = np.sum(np.abs(evals) > problem.band_edge + BAND_MARGIN)
        n_cont = np.sum(np.abs(evals) <= problem.band_edge + BAND_MARGIN)
        assert n_bound + n_cont == 2 * problem.S + 1

    def test_large_gamma_converges_to_onsite(self):
        sharp = HubbardParams(J=1.0, U=-6.0, gamma=20.0)
        e_sharp = solve_bound_states(relative_problem(sharp, K=0.0, S=100))[0].energy
        e_onsite = solve_bound_states(relative_problem(ONSITE_PARAMS, K=0.0, S=100))[0].energy
        assert e_sharp == pytest.approx(e_onsite, abs=1e-8)

    def test_truncation_floor_enforced(self):
        with pytest.raises(ValueError, match="10/gamma"):
            relative_problem(EXP_PARAMS, K=0.0, S=50)


class TestDoublonBandSweep:
    def test_onsite_band_matches_analytic(self):
        k_grid = np.linspace(-math.pi, math.pi, 41)
        sweep = doublon_band_sweep(ONSITE_PARAMS, k_grid, S=100)
        for K, states in sweep:
            assert len(states) == 1
            expected = onsite_doublon_energy(-6.0, 1.0, K)
            assert states[0].energy == pytest.approx(expected, abs=1e-6)
            # independent dense-diagonalization oracle at this K
            oracle = dense_bound_energies(relative_problem(ONSITE_PARAMS, K, S=100))
            assert states[0].energy == pytest.approx(oracle[0], abs=1e-12)

    def test_flat_band_limit_returns_diagonal_levels(self):
        sweep = doublon_band_sweep(EXP_PARAMS, [math.pi], S=144)
        _, states = sweep[0]
        got = np.sort([b.energy for b in states])
        s = np.arange(-144, 145)
        expected = np.sort(EXP_PARAMS.U * np.exp(-EXP_PARAMS.gamma * np.abs(s)))
        expected = expected[np.abs(expected) > BAND_MARGIN]
        np.testing.assert_allclose(got, expected, atol=1e-10)

    def test_band_even_in_k(self):
        for K in (0.3, 1.1, 2.5):
            plus = solve_bound_states(relative_problem(EXP_PARAMS, K))
            minus = solve_bound_states(relative_problem(EXP_PARAMS, -K))
            assert len(plus) == len(minus)
            for a, b in zip(plus, minus):
                assert a.energy == pytest.approx(b.energy, abs=1e-10)

    def test_band_continuity(self):
        k_grid = np.linspace(0.0, 2.0, 21)
        sweep = doublon_band_sweep(EXP_PARAMS, k_grid)
        deepest = [states[0].energy for _, states in sweep]
        dk = k_grid[1] - k_grid[0]
        assert np.max(np.abs(np.diff(deepest))) < 4.0 * dk

    def test_csv_export(self, tmp_path):
        path = tmp_path / "band.csv"
        write_band_table(path, doublon_band_sweep(ONSITE_PARAMS, [0.0, 1.0], S=100))
        lines = path.read_text().splitlines()
        assert lines[0] == "K,branch,E_over_J,parity"
        assert len(lines) == 3
        k, branch, energy, parity = lines[1].split(",")
        assert float(k) == 0.0 and branch == "0" and parity == "symmetric"
        assert float(energy) == pytest.approx(-math.sqrt(52.0), abs=1e-6)


def box_phase_shift_oracle(params, L, q_target):
    """Half-line hard-wall diagonalization; phase shift via level positions.

    The symmetric sector on s = 0..L (wall at L+1) is the tridiagonal with
    hopping sqrt(2) t between s=0,1.  Continuum levels E_n = 2 t cos(q_n)
    satisfy q_n (L+1) + delta_S(q_n) = (n + 1/2) pi, so each level yields the
    phase shift modulo pi.  Returns (q_n, delta) for the level nearest q_target.
    """
    t = -2.0 * params.J
    diag = params.U * np.exp(-params.gamma * np.arange(L + 1))
    off = np.full(L, t)
    off[0] = math.sqrt(2.0) * t
    evals = eigh_tridiagonal(diag, off, eigvals_only=True)
    cont = evals[np.abs(evals) < 2.0 * abs(t) - 1e-9]
    qn = np.sort(np.arccos(np.clip(cont / (2.0 * t), -1.0, 1.0)))
    i = int(np.argmin(np.abs(qn - q_target)))
    delta = (i + 0.5) * math.pi - qn[i] * (L + 1)
    delta = (delta + math.pi / 2) % math.pi - math.pi / 2
    if delta <= -math.pi / 2 + 1e-14:
        delta += math.pi
    return float(qn[i]), float(delta)


class TestScatteringPhaseShift:
    def test_free_motion_no_shift(self):
        pot = InteractionPotential(np.zeros(201))
        problem = RelativeProblem(K=0.0, S=200, potential=pot, J=1.0)
        sol = scattering_phase_shift(problem, 1.1)
        assert abs(sol.delta_s) <= 1e-9
        assert abs(sol.delta_a) <= 1e-9

    def test_energy_is_band_dispersion(self):
        problem = relative_problem(EXP_PARAMS, K=0.8, S=420)
        q = 0.9
        sol = scattering_phase_shift(problem, q)
        assert sol.energy == pytest.approx(-4.0 * math.cos(0.4) * math.cos(q), abs=1e-14)

    def test_matches_finite_box_oracle_at_half_pi(self):
        q_star, delta_oracle = box_phase_shift_oracle(EXP_PARAMS, L=2000, q_target=math.pi / 2)
        problem = relative_problem(EXP_PARAMS, K=0.0, S=420)
        sol = scattering_phase_shift(problem, q_star)
        assert sol.delta_s == pytest.approx(delta_oracle, abs=1e-4)

    @pytest.mark.parametrize("q_target", [0.7, 1.3, 2.2])
    def test_matches_finite_box_oracle_across_band(self, q_target):
        q_star, delta_oracle = box_phase_shift_oracle(EXP_PARAMS, L=2000, q_target=q_target)
        problem = relative_problem(EXP_PARAMS, K=0.0, S=420)
        sol = scattering_phase_shift(problem, q_star)
        assert sol.delta_s == pytest.approx(delta_oracle, abs=1e-4)

    def test_branch_reduction_window(self):
        problem = relative_problem(EXP_PARAMS, K=0.0, S=420)
        for q in np.linspace(0.2, math.pi - 0.2, 17):
            sol = scattering_phase_shift(problem, float(q))
            assert -math.pi / 2 < sol.delta_s <= math.pi / 2
            assert -math.pi / 2 < sol.delta_a <= math.pi / 2
            assert sol.fit_residual <= 1e-8

    def test_degenerate_q_rejected(self):
        problem = relative_problem(EXP_PARAMS, K=0.0, S=420)
        with pytest.raises(ValueError, match="too close"):
            scattering_phase_shift(problem, 1e-4)
        with pytest.raises(ValueError, match="too close"):
            scattering_phase_shift(problem, math.pi - 1e-4)

    def test_undecayed_potential_rejected(self):
        # at S = 144 the exponential tail is ~3e-5 on the fit window
        problem = relative_problem(EXP_PARAMS, K=0.0, S=144)
        with pytest.raises(ValueError, match="not decayed"):
            scattering_phase_shift(problem, 1.2)
