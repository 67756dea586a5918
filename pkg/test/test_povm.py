import pytest

from fermion_steer.gaussian import RandomStream
from fermion_steer.povm import (ADMISSIBLE, INADMISSIBLE, povm_check_construction, povm_elements,
                                povm_witness_inadmissible)
from fermion_steer.symmetry import ClassLabel


class TestConstructions:

    @pytest.mark.parametrize("label", ADMISSIBLE)
    @pytest.mark.parametrize("alpha", [0.1, 0.7, 2.0])
    def test_completeness(self, label, alpha):
        assert povm_check_construction(label, alpha) <= 1e-12

    @pytest.mark.parametrize("label", ADMISSIBLE)
    def test_two_outcomes(self, label):
        elements = povm_elements(label, 0.7)
        assert len(elements) == 2
        assert all(w > 0 for w, _ in elements)

    def test_inadmissible_has_no_construction(self):
        with pytest.raises(ValueError):
            povm_elements(ClassLabel.DIII, 0.7)


class TestWitnesses:

    @pytest.mark.parametrize("label", INADMISSIBLE)
    def test_completeness_is_violated(self, label):
        report = povm_witness_inadmissible(label, 2, 5, RandomStream(3, key=(int(label),)))
        assert report.passed
        assert report.min_slack > 0.0
        assert len(report.records) + report.skipped == 5

    def test_dimension_is_rounded_up(self):
        report = povm_witness_inadmissible(ClassLabel.CII, 2, 2, RandomStream(0))
        assert report.n_modes == 4

    def test_admissible_class_has_no_witness(self):
        with pytest.raises(ValueError):
            povm_witness_inadmissible(ClassLabel.A, 2, 1, RandomStream(0))
