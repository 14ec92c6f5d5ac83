import math

import numpy as np
import pytest

from pulsedtls import (
    SystemParams,
    closed_form_square,
    compute_statistics,
    exclusive_Pn,
    expected_n,
    g2_zero,
    g2_zero_short_pulse,
    make_pulse,
    purities,
    variance_rel,
)

PI = math.pi


def truncated_poisson(mean, kmax):
    return [math.exp(-mean) * mean ** k / math.factorial(k)
            for k in range(kmax + 1)]


class TestExpectedN:
    def test_vacuum(self):
        assert expected_n([1.0]) == 0.0

    def test_single_photon(self):
        assert expected_n([0.0, 1.0]) == 1.0

    def test_square_pi_closed_forms(self, sys1):
        d = exclusive_Pn(make_pulse("square", PI, 0.1), sys1)
        cf = closed_form_square(PI, 0.1)
        expect = cf.P1 + 2 * cf.P2  # 1.01064, three-photon part negligible
        assert expected_n(d) == pytest.approx(expect, abs=1e-3)
        assert expect == pytest.approx(1.01064, abs=5e-5)


class TestG2Zero:
    def test_single_photon(self):
        assert g2_zero([0.0, 1.0]) == 0.0

    def test_photon_pair(self):
        assert g2_zero([0.0, 0.0, 1.0]) == pytest.approx(0.5)

    def test_two_outcome_always_zero(self):
        for p1 in (0.2, 0.5, 0.9):
            assert g2_zero([1.0 - p1, p1]) == 0.0

    def test_truncated_poisson_near_one(self):
        assert g2_zero(truncated_poisson(1.0, 6)) == pytest.approx(1.0,
                                                                   abs=1e-2)

    def test_vacuum_rejected(self):
        with pytest.raises(ValueError):
            g2_zero([1.0])


class TestG2ShortPulse:
    def test_perfect_single_photon(self):
        assert g2_zero_short_pulse(1.0, 0.0) == 0.0

    def test_square_pi_small_width(self):
        cf = closed_form_square(PI, 0.01)
        val = g2_zero_short_pulse(cf.P1, cf.P2)
        assert val == pytest.approx(0.00249, abs=5e-5)

    def test_agreement_with_full_definition(self, sys1):
        for gt, tol in ((0.1, 0.10), (0.01, 0.01)):
            d = exclusive_Pn(make_pulse("square", PI, gt), sys1)
            approx = g2_zero_short_pulse(d.exclusive[1], d.exclusive[2])
            assert approx == pytest.approx(g2_zero(d), rel=tol)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            g2_zero_short_pulse(0.0, 0.0)


class TestVarianceRel:
    def test_number_state(self):
        assert variance_rel([0.0, 1.0]) == pytest.approx(0.0)

    def test_truncated_poisson_is_unity(self):
        assert variance_rel(truncated_poisson(1.0, 8)) == pytest.approx(
            1.0, abs=1e-3)

    def test_super_poissonian_at_2pi(self, sys1):
        d = exclusive_Pn(make_pulse("square", 2 * PI, 0.3), sys1)
        assert variance_rel(d) > 1.0

    def test_sub_poissonian_at_pi(self, sys1):
        d = exclusive_Pn(make_pulse("square", PI, 0.3), sys1)
        assert variance_rel(d) < 1.0


class TestPurities:
    def test_single_photon_only(self):
        assert purities([0.5, 0.5])[0] == pytest.approx(1.0)

    def test_equal_split(self):
        pi = purities([0.8, 0.1, 0.1])
        assert pi[0] == pytest.approx(0.5)
        assert pi[1] == pytest.approx(0.5)

    def test_sum_to_one(self, sys1):
        d = exclusive_Pn(make_pulse("square", 2 * PI, 0.5), sys1)
        assert sum(purities(d)) == pytest.approx(1.0, abs=1e-12)

    def test_all_vacuum_rejected(self):
        with pytest.raises(ValueError):
            purities([1.0])


class TestComputeStatistics:
    def test_bundle_consistency(self, sys1):
        d = exclusive_Pn(make_pulse("square", PI, 0.2), sys1)
        st = compute_statistics(d)
        assert st.mean_n == pytest.approx(expected_n(d))
        assert st.g2_zero == pytest.approx(g2_zero(d))
        assert st.var_rel == pytest.approx(variance_rel(d))
        assert st.truncation_sensitive in (False, True)

    def test_truncation_flag_for_fragile_distribution(self):
        from pulsedtls import PhotocountDistribution
        d = PhotocountDistribution(inclusive=(0.1, 0.05, 0.03),
                                   exclusive=(0.9, 0.05, 0.02, 0.01),
                                   truncation_bound=0.02,
                                   provenance="exact-oracle")
        assert compute_statistics(d).truncation_sensitive

    def test_truncation_flag_clear_for_tight_bound(self, sys1):
        d = exclusive_Pn(make_pulse("square", PI, 0.05), sys1)
        assert not compute_statistics(d).truncation_sensitive
