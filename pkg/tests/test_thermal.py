import numpy as np
import pytest
import sympy
from scipy import stats

from layercode import f2core, thermal
from layercode.clusterdec import build_hypergraph, decode as cluster_decode
from layercode.csscode import CssCode
from layercode.layerbuild import build


def toy_checks(n=12):
    ring = [(i, (i + 1) % n) for i in range(n)]
    return ring + [(0, 4, 8), (1, 5, 9), (2, 6, 10), (3, 7, 11)]


def hamiltonian(checks, sigma):
    return -0.5 * sum(np.prod([sigma[q] for q in c]) for c in checks)


FIG1_L = build(
    CssCode(
        f2core.BitMatrix.from_dense([[1, 1, 1, 1]]),
        f2core.BitMatrix.from_dense([[1, 1, 1, 1]]),
    ),
    1,
)


def cluster_decoder(code):
    graph = build_hypergraph(code)
    return lambda syndrome: cluster_decode(graph, syndrome)


class TestSpinSystem:
    def test_ground_state_delta_e_counts_checks(self):
        sys = thermal.SpinSystem.from_code(FIG1_L, beta=2.0)
        per_spin = [0] * FIG1_L.n_qubits
        for members in FIG1_L.checks_z:
            for q in members:
                per_spin[q] += 1
        for i in range(sys.n):
            assert thermal.delta_e(sys, i) == per_spin[i]
        assert sys.energy() == -0.5 * len(FIG1_L.checks_z)

    def test_step_negates_delta_e_of_flipped_spin(self):
        sys = thermal.SpinSystem(12, toy_checks(), beta=1.0)
        rng = np.random.default_rng(1)
        for _ in range(50):
            before = sys._delta_e.copy()
            i, dt = thermal.nfold_step(sys, rng)
            assert dt > 0
            assert thermal.delta_e(sys, i) == -before[i]

    def test_delta_e_matches_hamiltonian_difference(self):
        checks = [(0, 1), (1, 2, 3), (3, 4), (4, 5, 6, 7), (7, 8, 9), (2, 9)]
        sys = thermal.SpinSystem(10, checks, beta=0.7)
        rng = np.random.default_rng(6)
        for _ in range(200):
            thermal.nfold_step(sys, rng)
            i = int(rng.integers(10))
            sigma = sys.sigma.astype(int)
            flipped = sigma.copy()
            flipped[i] = -flipped[i]
            want = hamiltonian(checks, flipped) - hamiltonian(checks, sigma)
            assert thermal.delta_e(sys, i) == want
        sys.audit()

    def test_rates_at_beta_zero_are_half(self):
        sys = thermal.SpinSystem(4, [(0, 1), (2, 3)], beta=0.0)
        assert np.all(sys.rates == 0.5)

    def test_rates_survive_extreme_beta(self):
        with np.errstate(over="raise"):
            rates = thermal._glauber_rates(1000.0, 6)
        assert np.all((rates >= 0) & (rates <= 1))
        assert rates[6] == 0.5

    def test_audit_detects_tampering(self):
        sys = thermal.SpinSystem(12, toy_checks(), beta=1.0)
        rng = np.random.default_rng(2)
        for _ in range(100):
            thermal.nfold_step(sys, rng)
        sys.audit()
        sys._delta_e[0] += 2
        with pytest.raises(RuntimeError):
            sys.audit()


class TestDetailedBalance:
    def test_rate_ratio_identity_symbolic(self):
        x = sympy.symbols("x", real=True)
        rate = 1 / (1 + sympy.exp(x))
        ratio = rate / rate.subs(x, -x)
        assert sympy.simplify(ratio - sympy.exp(-x)) == 0

    def test_rate_ratio_identity_float(self):
        for beta_de in np.linspace(-30, 30, 121):
            p_fwd = thermal._glauber_rates(beta_de, 1)[2]
            p_bwd = thermal._glauber_rates(-beta_de, 1)[2]
            assert p_fwd / p_bwd == pytest.approx(np.exp(-beta_de), rel=1e-12)


class TestNfoldStep:
    def test_uniform_selection_at_beta_zero(self):
        n = 12
        sys = thermal.SpinSystem(n, toy_checks(n), beta=0.0)
        rng = np.random.default_rng(41)
        counts = np.zeros(n)
        for _ in range(30_000):
            i, dt = thermal.nfold_step(sys, rng)
            assert dt > 0
            counts[i] += 1
        chi2 = float(((counts - 2500.0) ** 2 / 2500.0).sum())
        assert stats.chi2.sf(chi2, n - 1) > 1e-3

    def test_class_selection_frequencies(self):
        sys = thermal.SpinSystem(12, toy_checks(), beta=1.0)
        rng = np.random.default_rng(42)
        deg = sys._deg
        n_classes = 2 * deg + 1
        expected = np.zeros(n_classes)
        variance = np.zeros(n_classes)
        observed = np.zeros(n_classes)
        sum_dt = 0.0
        sum_inverse_rate = 0.0
        for _ in range(50_000):
            weights = sys.rates * sys._counts
            total = float(weights.sum())
            p = weights / total
            expected += p
            variance += p * (1 - p)
            i, dt = thermal.nfold_step(sys, rng)
            # the flip negates delta-E, so the pre-flip class is mirrored
            observed[deg - int(sys._delta_e[i])] += 1
            sum_dt += dt
            sum_inverse_rate += 1.0 / total
        for j in range(n_classes):
            if expected[j] >= 25:
                z = abs(observed[j] - expected[j]) / np.sqrt(variance[j])
                assert z < 4.0
        assert sum_dt / sum_inverse_rate == pytest.approx(1.0, abs=0.02)

    def test_frozen_system_raises(self):
        sys = thermal.SpinSystem(2, [(0, 1)], beta=800.0)
        with pytest.raises(thermal.FrozenSystemError):
            thermal.nfold_step(sys, np.random.default_rng(0))


class TestKernelMirror:
    def test_kernel_equals_python_steps(self):
        """The compiled path and nfold_step agree bit for bit."""
        sys_a = thermal.SpinSystem.from_code(FIG1_L, beta=2.0)
        sys_b = thermal.SpinSystem.from_code(FIG1_L, beta=2.0)
        rng_a = np.random.default_rng(7)
        rng_b = np.random.default_rng(7)
        passes = 3
        for _ in range(passes):
            buf = rng_a.random(thermal._BUFFER)
            status, _ = thermal._advance(
                *sys_a._kernel_args(), buf, 0, np.inf, np.inf
            )
            assert status == thermal._REFILL
            sys_a.audit()
        for _ in range(passes * thermal._BUFFER // 3):
            thermal.nfold_step(sys_b, rng_b)
        assert sys_a.flips == sys_b.flips
        assert sys_a.t == sys_b.t
        assert np.array_equal(sys_a.sigma, sys_b.sigma)
        assert np.array_equal(sys_a._delta_e, sys_b._delta_e)
        assert np.array_equal(sys_a._counts, sys_b._counts)
        sys_b.audit()

    def test_incremental_cache_over_a_million_flips(self):
        sys = thermal.SpinSystem.from_code(FIG1_L, beta=1.0)
        rng = np.random.default_rng(13)
        thermal._run_sampling(sys, rng, 1_000_000, 0.0, None)
        assert sys.flips == 1_000_000
        sys.audit()


class TestRunTrial:
    def test_reproducible(self):
        dec = cluster_decoder(FIG1_L)
        config = thermal.TrialConfig(beta=3.0, seed=(123, 0), t_max=1e4)
        first = thermal.run_trial(FIG1_L, config, dec)
        second = thermal.run_trial(FIG1_L, config, dec)
        assert first == second
        assert not first.censored
        assert 0 < first.t_fail <= 1e4
        assert first.flips > 0 and first.decodes > 0

    def test_censored_at_huge_beta(self):
        dec = cluster_decoder(FIG1_L)
        result = thermal.run_trial(
            FIG1_L, thermal.TrialConfig(beta=50.0, seed=(9, 9), t_max=1e3), dec
        )
        assert result.censored
        assert result.t_fail == 1e3

    def test_growth_spaces_out_decodes(self):
        dec = cluster_decoder(FIG1_L)
        results = {}
        for growth in (0.1, 0.5):
            config = thermal.TrialConfig(
                beta=6.0, seed=(55, 1), t_max=300.0, growth=growth
            )
            results[growth] = thermal.run_trial(FIG1_L, config, dec)
        # both censored: the flip trajectory is shared, only the decode
        # schedule differs
        assert results[0.1].censored and results[0.5].censored
        assert results[0.1].flips == results[0.5].flips
        assert results[0.5].decodes < results[0.1].decodes

    def test_hot_trial_fails_fast(self):
        dec = cluster_decoder(FIG1_L)
        result = thermal.run_trial(
            FIG1_L, thermal.TrialConfig(beta=1.5, seed=(2, 2), t_max=1e5), dec
        )
        assert not result.censored
        assert result.t_fail < 1e3


class TestGibbs:
    def test_twelve_spin_histogram(self):
        sys = thermal.SpinSystem(12, toy_checks(), beta=1.0)
        report = thermal.gibbs_check(sys, 2_000_000, np.random.default_rng(2026))
        assert report.pvalue > 0.01
        assert report.samples > 10_000

    def test_beta_zero_is_uniform(self):
        sys = thermal.SpinSystem(12, toy_checks(), beta=0.0)
        report = thermal.gibbs_check(sys, 500_000, np.random.default_rng(5))
        assert report.pvalue > 0.01

    def test_single_check_two_levels(self):
        sys = thermal.SpinSystem(2, [(0, 1)], beta=1.0)
        report = thermal.gibbs_check(sys, 200_000, np.random.default_rng(8))
        assert report.dof == 1
        assert report.pvalue > 0.01

    def test_size_cap(self):
        sys = thermal.SpinSystem(21, [(i, i + 1) for i in range(20)], beta=1.0)
        with pytest.raises(ValueError):
            thermal.gibbs_check(sys, 100, np.random.default_rng(0))

    def test_exact_levels_sum_to_one(self):
        sys = thermal.SpinSystem(6, [(0, 1, 2), (2, 3), (3, 4, 5)], beta=1.3)
        probs = thermal._exact_level_probs(sys)
        assert probs.sum() == pytest.approx(1.0)
        assert probs.shape == (4,)
