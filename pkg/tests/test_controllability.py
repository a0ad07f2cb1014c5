"""Kalman rank, resonance detection, reduced kernel test, candidate periods."""

import numpy as np
import pytest

from mrilqr import (
    ContinuousPlant,
    UncontrollablePlantError,
    candidate_pathological_periods,
    is_pathological,
    kalman_controllable,
    reduced_hautus_mri,
    resonant_eigenvalues,
    sample_plant,
)

from conftest import random_controllable_plant

SOUZA_BASE = 2.0 * np.pi / np.sqrt(23.0)


class TestKalman:
    def test_souza_pair_is_controllable(self, souza_plant):
        assert kalman_controllable(souza_plant.A, souza_plant.B)

    def test_zero_input_matrix(self):
        assert not kalman_controllable(np.eye(2), np.zeros((2, 1)))

    def test_rotation_sampled_pair_at_full_turn(self, rotation_plant):
        m = sample_plant(rotation_plant, 2.0 * np.pi)
        assert not kalman_controllable(m.A_d, np.hstack([m.B_d, m.B_i]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            kalman_controllable(np.eye(2), np.zeros((3, 1)))


class TestResonantEigenvalues:
    def test_rotation_full_turn_resonates(self, rotation_plant):
        res = resonant_eigenvalues(rotation_plant.A, 2.0 * np.pi)
        vals = sorted(res.values(), key=lambda z: z.imag)
        assert np.allclose(vals, [-1j, 1j])
        # each partners the other
        for mu, partners in res.entries:
            assert len(partners) == 1
            assert abs(partners[0] - mu.conjugate()) < 1e-9

    def test_souza_nonresonant_at_unit_period(self, souza_plant):
        assert len(resonant_eigenvalues(souza_plant.A, 1.0)) == 0

    def test_souza_resonant_at_base_period(self, souza_plant):
        res = resonant_eigenvalues(souza_plant.A, SOUZA_BASE)
        vals = sorted(res.values(), key=lambda z: z.imag)
        assert np.allclose(vals, [0.5 - 1j * np.sqrt(23) / 2, 0.5 + 1j * np.sqrt(23) / 2])

    def test_real_spectrum_never_resonates(self):
        A = np.diag([-1.0, -2.0, -2.0])
        for T in (0.1, 1.0, np.pi, 10.0):
            assert len(resonant_eigenvalues(A, T)) == 0

    def test_rejects_nonpositive_period(self, souza_plant):
        with pytest.raises(ValueError):
            resonant_eigenvalues(souza_plant.A, 0.0)


class TestReducedHautus:
    def test_souza_mri_controllable_at_pathological_period(self, souza_plant):
        report = reduced_hautus_mri(souza_plant, SOUZA_BASE)
        assert report.controllable
        assert len(report.resonant_set) == 2
        assert report.failures == ()
        assert np.isfinite(report.margin) and report.margin > 1e-6

    def test_rotation_not_controllable_at_full_turn(self, rotation_plant):
        report = reduced_hautus_mri(rotation_plant, 2.0 * np.pi)
        assert not report.controllable
        assert report.failures
        assert all(kdim >= 1 for _, kdim in report.failures)
        assert report.margin < 1e-9

    def test_empty_resonant_set_short_circuits(self, souza_plant):
        report = reduced_hautus_mri(souza_plant, 1.0)
        assert report.controllable
        assert len(report.resonant_set) == 0
        assert report.margin == np.inf

    def test_uncontrollable_pair_raises(self):
        plant = ContinuousPlant(np.eye(2), np.zeros((2, 1)))
        with pytest.raises(UncontrollablePlantError):
            reduced_hautus_mri(plant, 1.0)

    def test_agrees_with_kalman_on_random_plants(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            plant = random_controllable_plant(rng, n)
            T = rng.uniform(0.1, 5.0)
            m = sample_plant(plant, T)
            expected = kalman_controllable(m.A_d, np.hstack([m.B_d, m.B_i]))
            assert reduced_hautus_mri(plant, T).controllable == expected


class TestIsPathological:
    def test_souza_at_base_period(self, souza_plant):
        assert is_pathological(souza_plant, SOUZA_BASE, "regular")
        assert is_pathological(souza_plant, SOUZA_BASE, "impulsive")
        assert not is_pathological(souza_plant, SOUZA_BASE, "mri")

    def test_rotation_at_full_turn_all_modes(self, rotation_plant):
        for mode in ("regular", "impulsive", "mri"):
            assert is_pathological(rotation_plant, 2.0 * np.pi, mode)

    def test_non_pathological_period(self, souza_plant):
        for mode in ("regular", "impulsive", "mri"):
            assert not is_pathological(souza_plant, 1.0, mode)

    def test_mri_pathology_implies_single_channel_pathology(self, souza_plant, rotation_plant):
        rng = np.random.default_rng(34)
        plants = [souza_plant, rotation_plant]
        plants += [random_controllable_plant(rng, int(rng.integers(2, 5))) for _ in range(10)]
        for plant in plants:
            periods = [c.period for c in candidate_pathological_periods(plant.A, 8.0)]
            periods += list(rng.uniform(0.1, 5.0, size=3))
            for T in periods:
                if is_pathological(plant, T, "mri"):
                    assert is_pathological(plant, T, "regular")
                    assert is_pathological(plant, T, "impulsive")

    def test_hypothesis_violation(self):
        plant = ContinuousPlant(np.eye(2), np.zeros((2, 1)))
        with pytest.raises(UncontrollablePlantError):
            is_pathological(plant, 1.0, "regular")


class TestCandidatePeriods:
    def test_souza_candidates_up_to_five(self, souza_plant):
        cands = candidate_pathological_periods(souza_plant.A, 5.0)
        periods = [c.period for c in cands]
        expected = [SOUZA_BASE, 2 * SOUZA_BASE, 3 * SOUZA_BASE]
        assert np.allclose(periods, expected, rtol=1e-9)
        assert {c.base_period for c in cands} == {periods[0]}
        assert [c.multiple for c in cands] == [1, 2, 3]
        # common real part is 1/2, so no per-multiple testing needed
        assert not any(c.needs_per_multiple_test for c in cands)

    def test_real_spectrum_has_no_candidates(self):
        assert candidate_pathological_periods(np.diag([-1.0, -2.0]), 100.0) == []

    def test_rotation_candidates_flagged(self, rotation_plant):
        cands = candidate_pathological_periods(rotation_plant.A, 7.0)
        periods = [c.period for c in cands]
        assert np.allclose(periods, [np.pi, 2 * np.pi], rtol=1e-9)
        assert all(c.needs_per_multiple_test for c in cands)

    def test_imaginary_eigenvalue_guarantees_regular_pathology(self, rotation_plant):
        # with ib in the spectrum, T = 2*pi/|b| is pathological for the
        # hold-only model
        b = 1.0
        T = 2.0 * np.pi / b
        periods = [c.period for c in candidate_pathological_periods(rotation_plant.A, 7.0)]
        assert any(abs(p - T) < 1e-9 for p in periods)
        assert is_pathological(rotation_plant, T, "regular")

    def test_zero_paired_with_imaginary_is_flagged(self):
        # spectrum {0, +2i, -2i}: the (0, 2i) family has a zero member
        A = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -2.0], [0.0, 2.0, 0.0]])
        cands = candidate_pathological_periods(A, 4.0)
        base_pi = [c for c in cands if abs(c.base_period - np.pi) < 1e-9]
        assert base_pi and all(c.needs_per_multiple_test for c in base_pi)

    def test_candidates_cover_every_random_resonance(self):
        rng = np.random.default_rng(35)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            A = rng.normal(size=(n, n))
            T_max = 10.0
            periods = [c.period for c in candidate_pathological_periods(A, T_max)]
            for T in np.linspace(0.2, T_max, 23):
                if len(resonant_eigenvalues(A, T)) > 0:
                    assert any(abs(T - p) <= 1e-6 * (1 + T) for p in periods)
