"""Release gate: one test per guarantee the package makes.

Each test here states a user-visible promise (construction invariants,
decoder exactness, sampler correctness, reproducibility) and checks it
end to end, so `pytest tests/test_acceptance.py -v` reads as a checklist.
The finer-grained unit tests live in the per-module files; this module
deliberately re-derives its expectations independently where it can
(incidence counting for commutation, brute-force matching, union-find
barriers, exact Gibbs enumeration) instead of trusting library output.
"""

import time
from itertools import combinations

import numpy as np
import pytest
import sympy

import oracles
from layercode import csscode, f2core, thermal
from layercode.bench import (
    ExperimentSpec,
    build_ensemble,
    fit_report,
    memory_experiment,
    threshold_experiment,
)
from layercode.clusterdec import build_hypergraph, decode as cluster_decode
from layercode.concatdec import MatchingProblem, decode as concat_decode, mwpm_layer
from layercode.csscode import CssCode, steane
from layercode.layerbuild import VARIANTS, build, logical_basis


def code_of(hx, hz):
    return CssCode(f2core.BitMatrix.from_dense(hx), f2core.BitMatrix.from_dense(hz))


FIG1 = code_of([[1, 1, 1, 1]], [[1, 1, 1, 1]])

ALL_SIDES = ("c1_lo", "c2_lo", "c1_hi", "c2_hi")


def error_of(n, indices):
    return f2core.BitVector.from_indices(n, sorted(indices))


def hop(a, b):
    return (abs(a[0] - b[0]) + abs(a[1] - b[1])) // 2


def side_hop(bounds, e, side):
    ax = 0 if side[1] == "1" else 1
    lo, hi = bounds[ax]
    return (e[ax] - lo + 1) // 2 if side.endswith("lo") else (hi - e[ax] + 1) // 2


def family_counts(code, error, sigma):
    info = code.checks_x_info if error == "Z" else code.checks_z_info
    out = {"Q": 0, "X": 0, "Z": 0}
    for c in sigma.nonzero():
        out[info[c][0].kind] += 1
    return out


def layer_parity_even(code, error, sigma, kind):
    info = code.checks_x_info if error == "Z" else code.checks_z_info
    per_layer = {}
    for c in sigma.nonzero():
        layer = info[c][0]
        if layer.kind == kind:
            per_layer[layer] = per_layer.get(layer, 0) + 1
    return all(v % 2 == 0 for v in per_layer.values())


def toy_checks(n=12):
    ring = [(i, (i + 1) % n) for i in range(n)]
    return ring + [(0, 4, 8), (1, 5, 9), (2, 6, 10), (3, 7, 11)]


def test_construction_suite():
    """200 random inputs (n in [5,15], balanced rates, both variants,
    K in {1,2}): the two check families commute, every check touches at
    most 6 qubits, and the logical count is preserved.  Under 2 minutes."""
    rng = np.random.default_rng(7)
    start = time.monotonic()
    for i in range(200):
        n = int(rng.integers(5, 16))
        m = int(rng.integers(1, (n - 1) // 2 + 1))
        code = csscode.sample_css(n, m / n, m / n, rng)
        L = build(code, K=1 + (i // 2) % 2, variant=VARIANTS[i % 2])

        # commutation re-derived from the raw check lists: count shared
        # qubits per (X check, Z check) pair, all counts must be even
        x_of = [[] for _ in range(L.n_qubits)]
        z_of = [[] for _ in range(L.n_qubits)]
        for ci, members in enumerate(L.checks_x):
            for q in members:
                x_of[q].append(ci)
        for ci, members in enumerate(L.checks_z):
            for q in members:
                z_of[q].append(ci)
        nz = len(L.checks_z)
        keys = [
            a * nz + b for q in range(L.n_qubits) for a in x_of[q] for b in z_of[q]
        ]
        _, counts = np.unique(np.asarray(keys, dtype=np.int64), return_counts=True)
        assert not np.any(counts % 2), f"input {i}: check families anticommute"

        weight = max(
            max(len(t) for t in L.checks_x), max(len(t) for t in L.checks_z)
        )
        assert weight <= 6, f"input {i}: check weight {weight}"
        assert L.k == code.k, f"input {i}: k {L.k} != input k {code.k}"
    assert time.monotonic() - start < 120.0


def test_cluster_decoder_exhaustive():
    """All single- and two-qubit X errors on the 4-qubit-input layer code:
    the correction always reproduces the syndrome, the residual is either
    a stabilizer or a detected logical, and every single-qubit error is
    corrected outright.  Under 10 minutes."""
    L = build(FIG1, 1)
    G = build_hypergraph(L)
    zs = logical_basis(L)[0]
    start = time.monotonic()

    def classify(err):
        syn = L.syndrome_of_x(err)
        corr = cluster_decode(G, syn)
        assert L.syndrome_of_x(corr) == syn, "correction changes the syndrome"
        res = err ^ corr
        if f2core.in_rowspace(L.matrix_x, res):
            return "corrected"
        assert any(g.dot(res) for g in zs), "residual neither stabilizer nor logical"
        return "logical"

    for q in range(L.n_qubits):
        assert classify(error_of(L.n_qubits, [q])) == "corrected"
    outcomes = [
        classify(error_of(L.n_qubits, [a, b]))
        for a, b in combinations(range(L.n_qubits), 2)
    ]
    # two-qubit errors may legitimately end in a logical, but only rarely
    assert outcomes.count("logical") < len(outcomes) // 10
    assert time.monotonic() - start < 600.0


def test_concatenated_decoder_exhaustive():
    """All single-qubit Z errors on the Steane-input layer code are fully
    corrected by the staged decoder, and each stage leaves the excitations
    it is responsible for cleared.  Under 10 minutes."""
    L = build(steane(), 1)
    start = time.monotonic()
    for q in range(L.n_qubits):
        err = error_of(L.n_qubits, [q])
        syn = L.syndrome_of_z(err)
        audit = []
        corr = concat_decode(L, syn, error="Z", audit=audit)
        assert L.syndrome_of_z(corr) == syn
        assert f2core.in_rowspace(L.matrix_z, err ^ corr), f"qubit {q} not corrected"
        stages = dict(audit)
        assert family_counts(L, "Z", stages["first-matching"])["Z"] == 0
        after2 = family_counts(L, "Z", stages["second-matching"])
        assert after2["Z"] == 0 and after2["Q"] == 0
        assert layer_parity_even(L, "Z", stages["strings"], "X")
        assert stages["final"].is_zero()
    assert time.monotonic() - start < 600.0


def test_matching_oracle_equivalence():
    """1000 random layer matching problems with up to 10 excitations:
    the matcher's total weight equals brute-force enumeration, exactly."""
    rng = np.random.default_rng(23)
    sides_of = {
        "all-rough-boundaries": ALL_SIDES,
        "top-bottom-only": ("c1_lo", "c1_hi"),
        "none": (),
    }
    for _ in range(1000):
        h = int(rng.integers(3, 11)) * 2
        w = int(rng.integers(3, 11)) * 2
        policy = list(sides_of)[int(rng.integers(3))]
        m = int(rng.integers(0, 11))
        if policy == "none" and m % 2:
            m -= 1
        cells = [(a, b) for a in range(1, h, 2) for b in range(1, w, 2)]
        picks = rng.choice(len(cells), size=min(m, len(cells)), replace=False)
        coords = tuple(sorted(cells[i] for i in picks))
        bounds = ((0, h), (0, w))
        got = mwpm_layer(MatchingProblem(coords, bounds, policy, sides_of[policy]))
        boundary_cost = None
        if sides_of[policy]:
            boundary_cost = lambda e: min(
                side_hop(bounds, e, s) for s in sides_of[policy]
            )
        assert got.weight == oracles.matching_cost_bruteforce(
            coords, hop, boundary_cost
        )


def test_threshold_crossing(tmp_path):
    """Cluster-decoder failure-rate curves for n=5 and n=7 ensembles under
    i.i.d. bit flips, 2000 trials per point: the curves cross between
    p = 0.012 and p = 0.026."""
    spec = ExperimentSpec(
        kind="threshold",
        n_grid=(5, 7),
        p_grid=(0.005, 0.01, 0.014, 0.018, 0.022, 0.026, 0.032, 0.04),
        trials=2000,
        seed=2024,
    )
    rows = threshold_experiment(spec, tmp_path / "threshold.csv")
    rate = {(n, p): r for n, p, _, _, r, _ in rows}
    ps = spec.p_grid
    diffs = [rate[(7, p)] - rate[(5, p)] for p in ps]

    crossing = None
    for (p0, d0), (p1, d1) in zip(zip(ps, diffs), zip(ps[1:], diffs[1:])):
        if d0 <= 0 < d1:
            crossing = p0 + (p1 - p0) * (-d0) / (d1 - d0)
            break
    curve = ", ".join(f"{p}:{d:+.4f}" for p, d in zip(ps, diffs))
    assert crossing is not None, f"curves never cross; rate7-rate5 by p: {curve}"
    assert 0.012 <= crossing <= 0.026, (
        f"curves cross at p = {crossing:.4f}, outside [0.012, 0.026]; "
        f"rate7-rate5 by p: {curve}"
    )


def test_thermal_sampler():
    """(a) the flip rates satisfy detailed balance exactly; (b) a 12-spin
    system at beta=1 sampled over 1e7 steps matches the exact Gibbs
    distribution (chi-squared p > 0.01); (c) the incremental energy
    bookkeeping survives a 1e6-flip audit against full recomputation."""
    x = sympy.symbols("x", real=True)
    rate = 1 / (1 + sympy.exp(x))
    assert sympy.simplify(rate / rate.subs(x, -x) - sympy.exp(-x)) == 0
    for beta in (0.5, 1.0, 2.5):
        rates = thermal._glauber_rates(beta, 6)
        for j in range(-6, 7):
            ratio = rates[j + 6] / rates[6 - j]
            assert ratio == pytest.approx(np.exp(-beta * j), rel=1e-12)

    sys = thermal.SpinSystem(12, toy_checks(), beta=1.0)
    report = thermal.gibbs_check(sys, 10**7, np.random.default_rng(2026))
    assert report.pvalue > 0.01, f"Gibbs chi2 p = {report.pvalue:.4f}"
    assert report.samples > 10_000

    sys = thermal.SpinSystem(12, toy_checks(), beta=1.0)
    thermal._run_sampling(sys, np.random.default_rng(13), 1_000_000, 0.0, None)
    assert sys.flips == 10**6
    sys.audit()


def test_memory_time_scaling(tmp_path):
    """Mean failure time grows with beta at every n (gap > 2x combined
    SEM), and fit_report recovers the three scaling laws to 6 significant
    digits from noiseless synthetic data plus a positive rising-branch
    slope on the measured small-grid data."""
    spec = ExperimentSpec(
        kind="memory",
        n_grid=(5, 7, 9),
        beta_grid=(4.0, 5.0, 6.0),
        trials=40,
        seed=2024,
    )
    out = tmp_path / "memory.csv"
    rows = memory_experiment(spec, out)
    stat = {(n, b): (mean, sem) for n, b, mean, sem, _, _ in rows}
    for n in spec.n_grid:
        for b0, b1 in zip(spec.beta_grid, spec.beta_grid[1:]):
            m0, s0 = stat[(n, b0)]
            m1, s1 = stat[(n, b1)]
            gap = 2.0 * float(np.hypot(s0, s1))
            assert m1 - m0 > gap, (
                f"n={n}: mean t_fail {m1:.0f} at beta={b1} not above "
                f"{m0:.0f} at beta={b0} by more than {gap:.0f}"
            )

    def synthetic(betas, ns, mean_of):
        return [
            {"n": n, "beta": b, "mean_tfail": mean_of(n, b)}
            for b in betas
            for n in ns
        ]

    rep = fit_report(
        synthetic(
            [8.0, 9.0, 10.0, 11.0],
            [5, 7, 9, 11, 13],
            lambda n, b: float(np.exp((1.732 * b - 13.235) * np.log(n))),
        )
    )
    assert rep.slope_coef[0] == pytest.approx(1.732, abs=1e-6)
    assert rep.slope_coef[1] == pytest.approx(-13.235, abs=1e-6)

    peak = {5: 0.5, 7: 1.0, 9: 0.25}
    rep = fit_report(
        synthetic(
            [3.0, 4.0, 5.0, 6.0, 7.0],
            [5, 7, 9],
            lambda n, b: float(np.exp(0.695 * b * b - 7.11 * b + 26.1)) * peak[n],
        )
    )
    assert np.allclose(rep.tstar_coef, (0.695, -7.11, 26.1), atol=1e-6)

    rows_ns = []
    for b in [3.0, 4.0, 5.0, 6.0]:
        nstar = float(np.exp(0.448 * b - 0.562))
        rows_ns += synthetic(
            [b], [nstar / 2, nstar, nstar * 2],
            lambda n, b: 100.0 if n == nstar else 30.0,
        )
    rep = fit_report(rows_ns)
    assert rep.nstar_coef[0] == pytest.approx(0.448, abs=1e-6)
    assert rep.nstar_coef[1] == pytest.approx(-0.562, abs=1e-6)

    # the measured grid must show at least one beta with a genuine rising
    # branch; at seed 2024 that is beta=5 (n* = 7, interior)
    measured = fit_report(str(out))
    by_beta = {f.beta: f for f in measured.per_beta}
    assert by_beta[5.0].slope > 0.0


def test_energy_barrier_oracle():
    """Exhaustive path-search barrier equals an independent union-find
    oracle on every code with n <= 8 we throw at it; the barrier is
    positive exactly when the distance exceeds 1, and in particular on
    every distance-ranked ensemble code."""
    rng = np.random.default_rng(31)
    codes = [FIG1, steane()]
    while len(codes) < 42:
        n = int(rng.integers(3, 9))
        m = max((n - 1) // 2, 1)
        c = csscode.sample_css(
            n, int(rng.integers(1, m + 1)) / n, int(rng.integers(1, m + 1)) / n, rng
        )
        if c.k >= 1:
            codes.append(c)
    for c in codes:
        dists = csscode.min_distance(c)
        for side, d in zip(("Z", "X"), (dists[1], dists[0])):
            got = csscode.energy_barrier_bruteforce(c, side)
            ref = oracles.barrier_by_union_find(
                c.hx.to_dense().tolist(), c.hz.to_dense().tolist(), side
            )
            assert got == ref, f"barrier {got} != oracle {ref} for {c!r} side {side}"
            assert (got >= 1) == (d >= 2)

    for code in build_ensemble(7, 200, 5, np.random.default_rng(2)):
        assert csscode.energy_barrier_bruteforce(code, "Z") >= 1
        assert csscode.energy_barrier_bruteforce(code, "X") >= 1


def test_determinism_across_workers(tmp_path):
    """Re-running an experiment with the same spec and seed produces byte
    identical output files for 1 and 8 workers."""
    for workers, tag in ((1, "a"), (8, "b")):
        spec = ExperimentSpec(
            kind="memory",
            n_grid=(5,),
            beta_grid=(3.0,),
            trials=8,
            candidates=100,
            keep=4,
            seed=5,
            workers=workers,
            t_max=1e4,
        )
        memory_experiment(spec, tmp_path / f"{tag}.csv")
        tspec = ExperimentSpec(
            kind="threshold",
            n_grid=(5,),
            p_grid=(0.02,),
            trials=40,
            candidates=100,
            keep=4,
            seed=5,
            workers=workers,
        )
        threshold_experiment(tspec, tmp_path / f"t{tag}.csv")
    for a, b in (
        ("a.csv", "b.csv"),
        ("a.trials.csv", "b.trials.csv"),
        ("a.manifest.json", "b.manifest.json"),
        ("ta.csv", "tb.csv"),
        ("ta.manifest.json", "tb.manifest.json"),
    ):
        assert (tmp_path / a).read_bytes() == (tmp_path / b).read_bytes(), a
