"""
Tests for the adaptive steering protocol on the bilayer.
"""

import numpy as np
import pytest
from scipy.linalg import block_diag

from fermion_steer.chern_model import Band, Orbital, OWModeSet, build_ow_mode, ground_state_correlation
from fermion_steer.config import ProtocolConfig
from fermion_steer.errors import TrajectoryError
from fermion_steer.gaussian import CorrelationMatrix, RandomStream
from fermion_steer.lattice import AlphaField, LatticeSpec
from fermion_steer.observables import TripleRegionPartition, regularized_chern
from fermion_steer.protocol import (BilayerState, EnsembleResult, ancilla_redistribute, apply_noise, hopping_gate,
                                    init_bilayer, run_cycle, run_ensemble, run_trajectory, step_measure_feedforward,
                                    sweep_order)


def small_config(**kwargs):
    params = dict(L=4, alpha=1.5, n_shell=1, cycles=2, trajectories=3, seed=11)
    params.update(kwargs)
    return ProtocolConfig(**params)


def steered_bilayer(lattice, alpha, ancilla_occupations):
    G_ci = ground_state_correlation(lattice, alpha)
    ancilla = np.diag(np.asarray(ancilla_occupations, dtype=complex))
    return BilayerState(lattice, CorrelationMatrix(block_diag(G_ci.data, ancilla), pure=True, check=False))


class TestBilayer:

    def test_init_has_exact_charge(self):
        config = small_config()
        state = init_bilayer(config, RandomStream(0))
        assert state.G.dim == 4 * 16
        assert state.G.total_charge() == config.initial_charge
        assert state.cross_residual() == 0.0

    def test_init_rejects_charge(self):
        config = small_config()
        config.initial_charge = 16
        with pytest.raises(ValueError):
            init_bilayer(config, RandomStream(0))

    def test_ancilla_index_sits_above_physical_mode(self):
        lattice = LatticeSpec(4)
        state = init_bilayer(small_config(), RandomStream(0))
        assert state.ancilla_index(5, Orbital.B) == lattice.n_modes + lattice.mode_index(1, 1, 1)

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            BilayerState(LatticeSpec(4), CorrelationMatrix.product_state(32, [0] * 32))


class TestFeedforward:

    def test_wrong_outcome_is_swapped_into_the_ancilla(self):
        lattice = LatticeSpec(4)
        occupations = np.zeros(2 * lattice.n_modes, dtype=int)
        occupations[lattice.n_modes:] = 1
        state = BilayerState(lattice, CorrelationMatrix.product_state(2 * lattice.n_modes, occupations))
        mode = build_ow_mode(lattice, 1.5, (1, 1), Orbital.A, Band.LOWER)
        ancilla = state.ancilla_index(5, Orbital.A)
        outcome, swapped = step_measure_feedforward(state, mode, ancilla, RandomStream(0))
        assert (outcome, swapped) == (0, True)
        w = mode.wavefunction.embed(state.G.dim)
        assert state.G.occupation_expectation(w) == pytest.approx(1.0, abs=1e-12)
        assert state.G.data[ancilla, ancilla].real == pytest.approx(0.0, abs=1e-12)

    def test_target_outcome_is_left_alone(self):
        lattice = LatticeSpec(4)
        state = steered_bilayer(lattice, 1.5, [0] * lattice.n_modes)
        before = state.G.data.copy()
        mode = build_ow_mode(lattice, 1.5, (0, 0), Orbital.B, Band.UPPER)
        outcome, swapped = step_measure_feedforward(state, mode, state.ancilla_index(0, Orbital.B), RandomStream(0))
        assert (outcome, swapped) == (0, False)
        np.testing.assert_allclose(state.G.data, before, atol=1e-10)


class TestAncillaLayer:

    @pytest.mark.parametrize("theta", [0.0, 0.4, 2.0])
    def test_hopping_gate_is_unitary(self, theta):
        g = hopping_gate(theta)
        np.testing.assert_allclose(g.conj().T @ g, np.eye(2), atol=1e-15)

    def test_redistribution_collapses_the_ancillas(self):
        lattice = LatticeSpec(4)
        ancilla = np.arange(lattice.n_modes) % 3 == 0
        state = steered_bilayer(lattice, 1.5, ancilla)
        physical = state.physical().data.copy()
        ancilla_redistribute(state, RandomStream(2))
        occupations = np.diag(state.ancilla().data).real
        np.testing.assert_allclose(occupations, np.round(occupations), atol=1e-10)
        assert occupations.sum() == pytest.approx(ancilla.sum(), abs=1e-10)
        np.testing.assert_allclose(state.physical().data, physical, atol=1e-12)
        assert state.cross_residual() < 1e-12

    def test_noise_keeps_occupations_and_purity(self):
        lattice = LatticeSpec(4)
        state = steered_bilayer(lattice, 1.5, [0] * lattice.n_modes)
        diag = np.diag(state.G.data).copy()
        apply_noise(state, 0.3, RandomStream(1))
        np.testing.assert_allclose(np.diag(state.G.data), diag, atol=1e-14)
        assert state.physical().purity_deviation() < 1e-10

    def test_noise_range(self):
        state = steered_bilayer(LatticeSpec(2), 1.5, [0] * 8)
        with pytest.raises(ValueError):
            apply_noise(state, 1.5, RandomStream(1))

    def test_zero_noise_draws_nothing(self):
        state = steered_bilayer(LatticeSpec(2), 1.5, [0] * 8)
        rng = RandomStream(1)
        apply_noise(state, 0.0, rng)
        assert rng.counter == 0

    def test_sweep_order(self):
        lattice = LatticeSpec(3)
        assert sweep_order(lattice, RandomStream(0), False).tolist() == list(range(9))
        assert sorted(sweep_order(lattice, RandomStream(0), True).tolist()) == list(range(9))


class TestCycle:

    def test_target_state_is_a_fixed_point(self):
        lattice = LatticeSpec(6)
        config = ProtocolConfig(L=6, alpha=1.5, n_shell=None, noise_sigma=0.0)
        modes = OWModeSet.build(AlphaField.uniform(lattice, 1.5), None)
        occupations = np.zeros(lattice.n_modes, dtype=int)
        occupations[::3] = 1
        state = steered_bilayer(lattice, 1.5, occupations)
        target = state.physical().data.copy()
        counts = run_cycle(state, modes, config, RandomStream(5))
        assert counts == {"measured": 4 * lattice.n_cells, "swaps": 0}
        np.testing.assert_allclose(state.physical().data, target, atol=1e-8)
        assert state.cycle == 1

    def test_cycle_conserves_charge(self):
        config = small_config(noise_sigma=0.2)
        lattice = LatticeSpec(config.L)
        modes = OWModeSet.build(AlphaField.uniform(lattice, config.alpha), config.n_shell)
        rng = RandomStream(3)
        state = init_bilayer(config, rng)
        for _ in range(3):
            run_cycle(state, modes, config, rng)
            assert state.G.total_charge() == pytest.approx(config.initial_charge, abs=1e-10)
            assert state.cross_residual() < 1e-8


class TestTrajectory:

    def test_report(self):
        config = small_config(snapshot_cycles=[0, 2])
        outcome = run_trajectory(config, index=1)
        report = outcome.report
        assert report.seed == [11, 1]
        assert [c.cycle for c in report.cycles] == [0, 1, 2]
        assert report.final.charge_drift < 1e-10
        assert report.rng_draws > 0
        assert sorted(outcome.snapshots) == [0, 2]
        assert outcome.final_physical.shape == (32, 32)

    def test_observe_every(self):
        config = small_config(cycles=5, observe_every=2, observables=["charge"])
        report = run_trajectory(config).report
        assert [c.cycle for c in report.cycles] == [0, 2, 4, 5]
        assert report.cycles[1].chern is None
        assert report.cycles[1].charge == pytest.approx(config.initial_charge)

    def test_deterministic(self):
        config = small_config()
        a = run_trajectory(config, index=2).report.model_dump()
        b = run_trajectory(config, index=2).report.model_dump()
        assert a == b

    def test_trajectories_differ(self):
        config = small_config()
        a = run_trajectory(config, index=0).final_physical
        b = run_trajectory(config, index=1).final_physical
        assert not np.allclose(a, b)


class TestEnsemble:

    def test_independent_of_worker_count(self):
        config = small_config(trajectories=4)
        serial = run_ensemble(config, n_jobs=1, progress=False)
        parallel = run_ensemble(config, n_jobs=2, progress=False)
        assert [r.index for r in parallel.reports] == [0, 1, 2, 3]
        assert [r.final.chern for r in serial.reports] == pytest.approx([r.final.chern for r in parallel.reports])
        np.testing.assert_allclose(serial.averaged().data, parallel.averaged().data, atol=1e-12)

    def test_averaged_snapshots(self):
        config = small_config(snapshot_cycles=[1])
        result = run_ensemble(config, progress=False)
        snapshots = result.averaged_snapshots()
        assert list(snapshots) == [1]
        assert snapshots[1].dim == 32
        assert result.completed == 3

    def test_failures_are_recorded(self):
        result = EnsembleResult(small_config())
        result.add(TrajectoryError(3, 11, "CorruptStateError: boom"))
        assert result.completed == 0
        assert result.averaged() is None
        assert result.failures[0].index == 3
        assert result.failures[0].seed == [11, 3]


@pytest.mark.slow
class TestSteering:

    def test_reaches_the_chern_insulator(self):
        config = ProtocolConfig(L=12, alpha=1.5, n_shell=2, cycles=10, trajectories=8, seed=1)
        result = run_ensemble(config, n_jobs=2, progress=False)
        mean = np.mean([r.final.chern for r in result.reports])
        assert mean == pytest.approx(-1.0, abs=0.1)

    def test_trivial_side(self):
        config = ProtocolConfig(L=12, alpha=2.5, n_shell=2, cycles=12, trajectories=8, seed=1)
        result = run_ensemble(config, n_jobs=2, progress=False)
        mean = np.mean([r.final.chern for r in result.reports])
        assert mean == pytest.approx(0.0, abs=0.1)


@pytest.mark.slow
class TestNoiseThresholds:

    @pytest.fixture(scope="class")
    def modes(self):
        return OWModeSet.build(AlphaField.uniform(LatticeSpec(12), 1.0), n_shell=3)

    def steer(self, modes, sigma):
        config = ProtocolConfig(L=12, alpha=1.0, n_shell=3, cycles=12, trajectories=8, seed=3, noise_sigma=sigma)
        result = run_ensemble(config, n_jobs=2, progress=False, modes=modes)
        resolved = np.mean([r.final.chern for r in result.reports])
        averaged = regularized_chern(result.averaged(), TripleRegionPartition(LatticeSpec(12)))
        return resolved, averaged

    def test_weak_noise_keeps_the_topological_state(self, modes):
        resolved, averaged = self.steer(modes, 0.1)
        assert resolved == pytest.approx(-1.0, abs=0.15)
        assert averaged == pytest.approx(-1.0, abs=0.15)

    def test_averaged_state_outlasts_trajectories(self, modes):
        resolved, averaged = self.steer(modes, 0.4)
        assert abs(resolved + 1.0) > 0.3
        assert averaged == pytest.approx(-1.0, abs=0.15)

    def test_strong_noise_destroys_the_averaged_state(self, modes):
        _, averaged = self.steer(modes, 0.9)
        assert averaged == pytest.approx(0.0, abs=0.15)
