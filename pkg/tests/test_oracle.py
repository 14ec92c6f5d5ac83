import math
import os
import subprocess
import sys

import numpy as np
import pytest

from pulsedtls import (
    QuadratureConfig,
    RandomStream,
    SystemParams,
    closed_form_square,
    density_fn,
    make_pulse,
)
from pulsedtls.numerics import integrate_1d
from pulsedtls.oracle import (
    TwoLevelState,
    exact_density_fn,
    exact_distribution,
    excited_population,
    g2_pulsewise,
    g2_two_time,
    master_equation_rho,
    propagate_conditional,
    sample_trajectories,
    trajectory_histogram,
)

PI = math.pi


class TestConditionalPropagation:
    def test_area_theorem_negligible_decay(self):
        sys_p = SystemParams(1e-9)
        p = make_pulse("square", PI, 1.0)
        out = propagate_conditional(p, sys_p, TwoLevelState(1.0, 0.0),
                                    0.0, 1.0)
        assert abs(out.amp_e) ** 2 == pytest.approx(1.0, abs=1e-7)
        assert abs(out.amp_g) ** 2 == pytest.approx(0.0, abs=1e-7)

    def test_pure_decay_without_drive(self, sys1):
        p = make_pulse("square", 0.0, 1.0)
        out = propagate_conditional(p, sys1, TwoLevelState(0.0, 1.0),
                                    0.0, 2.0)
        assert abs(out.amp_e) == pytest.approx(math.exp(-1.0), rel=1e-8)
        assert out.norm_sq == pytest.approx(math.exp(-2.0), rel=1e-8)

    def test_norm_monotone_nonincreasing(self, sys1):
        p = make_pulse("square", 3 * PI, 0.7)
        state = TwoLevelState(1.0, 0.0)
        prev = 1.0
        for t in np.linspace(0.05, 3.0, 40):
            norm = propagate_conditional(p, sys1, TwoLevelState(1.0, 0.0),
                                         0.0, t).norm_sq
            assert norm <= prev + 1e-12
            prev = norm

    def test_survival_matches_poisson_rate_small_width(self, sys1):
        # e^{-lambda} with lambda = int gamma sin^2(A(t)/2) dt is the
        # short-pulse survival; exact at gammaT -> 0
        gt = 1e-3
        p = make_pulse("square", PI, gt)
        lam, _ = integrate_1d(
            lambda t: sys1.gamma * math.sin(PI * t / (2 * gt)) ** 2, 0.0, gt)
        surv = propagate_conditional(p, sys1, TwoLevelState(1.0, 0.0),
                                     0.0, gt).norm_sq
        assert surv == pytest.approx(math.exp(-lam), rel=1e-4)

    def test_survival_poisson_rate_deviates_at_finite_width(self, sys1):
        # the Poisson-rate form is only a leading-order approximation:
        # its error at gammaT = 0.1 must dominate the one at 1e-3
        devs = []
        for gt in (1e-3, 0.1):
            p = make_pulse("square", PI, gt)
            lam, _ = integrate_1d(
                lambda t: sys1.gamma * math.sin(PI * t / (2 * gt)) ** 2,
                0.0, gt)
            surv = propagate_conditional(p, sys1, TwoLevelState(1.0, 0.0),
                                         0.0, gt).norm_sq
            devs.append(abs(surv / math.exp(-lam) - 1.0))
        assert devs[1] > 10 * devs[0]
        assert devs[1] < 0.05


class TestExactDensity:
    def test_post_pulse_exponential(self, sys1):
        gt = 1e-3
        p = make_pulse("square", PI, gt)
        for t1 in (0.5, 1.5):
            expect = sys1.gamma * math.exp(-sys1.gamma * (t1 - gt))
            assert exact_density_fn(p, sys1, [t1]) == pytest.approx(
                expect, rel=5e-3)

    def test_double_post_pulse_zero(self, sys1):
        p = make_pulse("square", PI, 0.5)
        assert exact_density_fn(p, sys1, [0.8, 1.5]) < 1e-12

    def test_converges_to_analytic_density(self, sys1):
        ratios = []
        for gt in (0.1, 0.01, 0.001):
            p = make_pulse("square", PI, gt)
            times = [0.4 * gt, gt + 0.2]
            ratios.append(exact_density_fn(p, sys1, times)
                          / density_fn(p, sys1, times))
        errs = [abs(r - 1.0) for r in ratios]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 5e-3


class TestExactDistribution:
    def test_pi_pulse_short_limit(self, sys1):
        p = make_pulse("square", PI, 1e-3)
        d = exact_distribution(p, sys1)
        assert d.exclusive[1] > 0.998

    def test_analytic_convergence_monotone(self, sys1):
        for mult in (1.0, 2.0):
            errs = {1: [], 2: []}
            for gt in (0.3, 0.1, 0.03, 0.01):
                p = make_pulse("square", mult * PI, gt)
                d = exact_distribution(p, sys1)
                cf = closed_form_square(mult * PI, gt)
                errs[1].append(abs(cf.F1 / d.inclusive[0] - 1.0))
                errs[2].append(abs(cf.F2 / d.inclusive[1] - 1.0))
            for n in (1, 2):
                seq = errs[n]
                assert all(a > b for a, b in zip(seq, seq[1:])), (mult, n, seq)

    def test_distribution_invariants(self, sys1):
        p = make_pulse("square", 2 * PI, 0.5)
        d = exact_distribution(p, sys1)
        assert 1.0 + 1e-9 >= d.inclusive[0] >= d.inclusive[1] >= d.inclusive[2] >= 0.0
        assert sum(d.exclusive) + d.truncation_bound >= 1.0 - 1e-6


class TestTrajectorySampling:
    def test_negligible_decay_no_emissions(self):
        sys_p = SystemParams(1e-12)
        p = make_pulse("square", PI, 1.0)
        recs = sample_trajectories(p, sys_p, 200, RandomStream(5),
                                   t_horizon=5.0)
        assert all(r.count == 0 for r in recs)

    def test_post_inversion_lifetime(self, sys1):
        # a near-instantaneous pi pulse inverts the emitter, after which the
        # first jump time is exponential with mean 1/gamma
        gt = 1e-6
        p = make_pulse("square", PI, gt)
        recs = sample_trajectories(p, sys1, 100000, RandomStream(17))
        first = np.array([r.emission_times[0] for r in recs if r.count > 0])
        assert len(first) > 99000
        se = first.std() / math.sqrt(len(first))
        assert abs(first.mean() - gt - 1.0) < 3 * se

    def test_seed_determinism(self, sys1):
        p = make_pulse("square", 2 * PI, 0.3)
        a = sample_trajectories(p, sys1, 500, RandomStream(99))
        b = sample_trajectories(p, sys1, 500, RandomStream(99))
        assert [r.count for r in a] == [r.count for r in b]
        for ra, rb in zip(a, b):
            assert ra.emission_times == rb.emission_times

    def test_numpy_fallback_agrees(self, sys1, tmp_path):
        p = make_pulse("square", 2 * PI, 0.3)
        recs = sample_trajectories(p, sys1, 300, RandomStream(7))
        script = (
            "import json, math\n"
            "from pulsedtls import make_pulse, RandomStream, SystemParams\n"
            "from pulsedtls.oracle import sample_trajectories\n"
            "p = make_pulse('square', 2*math.pi, 0.3)\n"
            "r = sample_trajectories(p, SystemParams(1.0), 300, RandomStream(7))\n"
            "print(json.dumps([[list(x.emission_times), x.count] for x in r]))\n"
        )
        env = dict(os.environ, PULSEDTLS_DISABLE_NUMBA="1")
        out = subprocess.run([sys.executable, "-c", script], env=env,
                             capture_output=True, text=True, check=True)
        import json
        other = json.loads(out.stdout.strip().splitlines()[-1])
        assert [r.count for r in recs] == [c for _, c in other]
        for ra, (times, _) in zip(recs, other):
            assert np.allclose(ra.emission_times, times, atol=1e-9)

    def test_even_pi_ratio_monte_carlo(self, sys1):
        p = make_pulse("square", 2 * PI, 1e-2)
        recs = sample_trajectories(p, sys1, 100000, RandomStream(31))
        probs, errs = trajectory_histogram(recs, nmax=3)
        ratio = probs[2] / probs[1]
        sigma = ratio * math.sqrt((errs[1] / probs[1]) ** 2
                                  + (errs[2] / probs[2]) ** 2)
        assert abs(ratio - 3.0) < 3 * sigma + 0.15


class TestMasterEquation:
    def test_full_inversion_negligible_decay(self):
        sys_p = SystemParams(1e-9)
        p = make_pulse("square", PI, 1.0)
        rho = master_equation_rho(p, sys_p, 1.0)
        assert rho.rho_ee.real == pytest.approx(1.0, abs=1e-6)

    def test_post_pulse_exponential_decay(self, sys1):
        gt = 1e-3
        p = make_pulse("square", PI, gt)
        r1 = master_equation_rho(p, sys1, gt).rho_ee.real
        r2 = master_equation_rho(p, sys1, gt + 1.0).rho_ee.real
        assert r2 / r1 == pytest.approx(math.exp(-1.0), rel=1e-6)

    def test_trace_and_hermiticity(self, sys1):
        p = make_pulse("gaussian", 2 * PI, 0.4)
        rho = master_equation_rho(p, sys1, 0.7)
        assert (rho.rho_gg + rho.rho_ee).real == pytest.approx(1.0, abs=1e-8)
        assert rho.rho_ge == pytest.approx(np.conj(rho.rho_eg), abs=1e-10)

    def test_matches_trajectory_ensemble_mean(self, sys1):
        p = make_pulse("square", PI, 0.1)
        recs = sample_trajectories(p, sys1, 100000, RandomStream(23))
        counts = np.array([r.count for r in recs], dtype=float)
        ts = np.linspace(0.0, 0.1 + 20.0, 4000)
        mean_n = np.trapezoid(sys1.gamma * excited_population(p, sys1, ts), ts)
        se = counts.std() / math.sqrt(len(counts))
        assert abs(counts.mean() - mean_n) < 3 * se


class TestTwoTimeCoherence:
    def test_symmetric_zero_diagonal(self, sys1):
        p = make_pulse("square", PI, 3.3)
        ts = np.linspace(0.0, 3.3 + 4.0, 40)
        corr = g2_two_time(p, sys1, ts, ts)
        assert np.allclose(corr.values, corr.values.T, atol=1e-9)
        assert np.max(np.abs(np.diag(corr.values))) < 1e-6 * corr.values.max()

    def test_short_pulse_slivers(self, sys1):
        # support restricted to min(t1,t2) inside the pulse window
        gt = 0.01
        p = make_pulse("square", PI, gt)
        ts = np.concatenate([np.linspace(0.0, gt, 8),
                             np.linspace(gt * 1.5, gt + 5.0, 24)])
        corr = g2_two_time(p, sys1, ts, ts)
        t1g, t2g = np.meshgrid(ts, ts, indexing="ij")
        outside = (t1g > gt) & (t2g > gt)
        assert corr.values[outside].max() <= 1e-12 * corr.values.max()

    def test_matches_short_pulse_joint_density(self, sys1):
        from pulsedtls.counting import density_p2_joint
        gt = 1e-2
        p = make_pulse("square", PI, gt)
        pairs = [(0.3 * gt, gt + 0.5), (0.6 * gt, gt + 1.0)]
        ts = np.array(sorted({0.0} | {a for pr in pairs for a in pr}))
        corr = g2_two_time(p, sys1, ts, ts)
        for t1, t2 in pairs:
            i, j = list(ts).index(t1), list(ts).index(t2)
            # the regression value equals twice the symmetrized pair density,
            # which is the ordered joint density itself
            expect = density_p2_joint(p, sys1, t1, t2)
            assert corr.values[i, j] == pytest.approx(expect, rel=0.05)

    def test_pulsewise_matches_distribution_moment(self, sys1):
        p = make_pulse("square", PI, 1.0)
        d = exact_distribution(p, sys1)
        en = sum(k * q for k, q in enumerate(d.exclusive))
        moment = sum(k * (k - 1) * q for k, q in enumerate(d.exclusive))
        assert g2_pulsewise(p, sys1) == pytest.approx(moment / en ** 2,
                                                      rel=0.01)
