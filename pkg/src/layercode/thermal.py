"""Kinetic Monte Carlo thermal memory simulation.

X errors accumulate as spin flips weighed against the Z checks: the
Hamiltonian assigns energy -1/2 per satisfied check, and a spin flips
with the Glauber probability 1/(1 + exp(beta * dE)).  The rejection-free
n-fold-way formulation groups spins into classes by their (integer)
energy change, picks a class proportionally to rate * size, flips a
uniform member and advances the clock by an Exp(1) waiting time divided
by the total rate.  Every step therefore lands a flip, which is what
makes low temperatures affordable.

A trial runs the dynamics from the all-up state, invoking a syndrome
decoder on a geometric schedule (every time the clock grows by a fixed
fraction).  The trial fails at the first decode whose residual error
anticommutes with a logical Z representative; trials that reach the
time cutoff without failing are reported as censored rather than
discarded.

All randomness is consumed from one ``numpy.random.Generator`` stream,
three uniform draws per flip, so a trial is reproducible from its seed
alone and independent of how trials are scheduled across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import stats

from . import f2core
from .layerbuild import LayerCode, logical_basis

# Draws per refill; one flip consumes three, so audits run every 10^4 flips.
_BUFFER = 30_000

_REFILL = 0
_DECODE = 1
_CENSORED = 2
_FROZEN = 3
_DONE = 4


class FrozenSystemError(RuntimeError):
    """Every populated rate class underflowed to zero."""


class SpinSystem:
    """State of the spin model: configuration, rate classes and clock.

    ``sigma`` holds the +-1 spins, one per qubit.  The per-spin energy
    change ``dE_i = sum over checks containing i of the check product``
    is cached and kept incrementally; spins live in class ``dE + deg``
    where ``deg`` is the largest check count of any spin, so all class
    indices are non-negative.
    """

    def __init__(self, n: int, checks: Sequence[tuple[int, ...]], beta: float):
        self.n = n
        self.beta = float(beta)
        self.checks = [tuple(c) for c in checks]
        self.sigma = np.ones(n, dtype=np.int8)

        spins_per_check = [np.array(c, dtype=np.int64) for c in self.checks]
        checks_per_spin: list[list[int]] = [[] for _ in range(n)]
        for cid, members in enumerate(self.checks):
            for q in members:
                if not 0 <= q < n:
                    raise ValueError(f"check {cid} references spin {q}")
                checks_per_spin[q].append(cid)
        self._spin_ptr, self._spin_idx = _csr(spins_per_check, len(self.checks))
        self._check_ptr, self._check_idx = _csr(
            [np.array(c, dtype=np.int64) for c in checks_per_spin], n
        )
        self._check_rows = np.repeat(
            np.arange(len(self.checks)), np.diff(self._spin_ptr)
        )
        self._spin_rows = np.repeat(np.arange(n), np.diff(self._check_ptr))

        self._deg = int(max((len(c) for c in checks_per_spin), default=0))
        self._check_prod = np.ones(len(self.checks), dtype=np.int8)
        self._delta_e = np.diff(self._check_ptr).astype(np.int64)
        self.rates = _glauber_rates(self.beta, self._deg)

        n_classes = 2 * self._deg + 1
        self._class_of = self._delta_e + self._deg
        self._class_pos = np.zeros(n, dtype=np.int64)
        self._members = np.zeros((n_classes, max(n, 1)), dtype=np.int64)
        self._counts = np.zeros(n_classes, dtype=np.int64)
        for i in range(n):
            j = self._class_of[i]
            self._class_pos[i] = self._counts[j]
            self._members[j, self._counts[j]] = i
            self._counts[j] += 1

        self._clock = np.zeros(2, dtype=np.float64)
        self._flip_count = np.zeros(1, dtype=np.int64)

    @classmethod
    def from_code(cls, code: LayerCode, beta: float) -> "SpinSystem":
        return cls(code.n_qubits, code.checks_z, beta)

    @property
    def t(self) -> float:
        return float(self._clock[0])

    @property
    def flips(self) -> int:
        return int(self._flip_count[0])

    def energy(self) -> float:
        return -0.5 * float(self._check_prod.sum(dtype=np.int64))

    def error_vector(self) -> f2core.BitVector:
        return f2core.BitVector.from_bits(((1 - self.sigma) // 2).tolist())

    def audit(self) -> None:
        """Recompute everything from sigma and compare exactly."""
        neg = (self.sigma < 0).astype(np.float64)
        flips_per_check = np.bincount(
            self._check_rows, weights=neg[self._spin_idx], minlength=len(self.checks)
        ).astype(np.int64)
        prod = (1 - 2 * (flips_per_check & 1)).astype(np.int8)
        if not np.array_equal(prod, self._check_prod):
            raise RuntimeError("check product cache drifted")
        de = np.bincount(
            self._spin_rows,
            weights=prod[self._check_idx].astype(np.float64),
            minlength=self.n,
        ).astype(np.int64)
        if not np.array_equal(de, self._delta_e):
            raise RuntimeError("delta-E cache drifted")
        if not np.array_equal(self._class_of, de + self._deg):
            raise RuntimeError("class assignment drifted")
        if int(self._counts.sum()) != self.n:
            raise RuntimeError("class counts do not partition the spins")
        if np.any(self._class_pos >= self._counts[self._class_of]) or not np.array_equal(
            self._members[self._class_of, self._class_pos], np.arange(self.n)
        ):
            raise RuntimeError("class membership table drifted")

    def _kernel_args(self):
        return (
            self.sigma,
            self._check_prod,
            self._delta_e,
            self._class_of,
            self._class_pos,
            self._members,
            self._counts,
            self.rates,
            self._check_ptr,
            self._check_idx,
            self._spin_ptr,
            self._spin_idx,
            self._clock,
            self._flip_count,
        )


def _csr(rows: list[np.ndarray], count: int) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(count + 1, dtype=np.int64)
    for i, row in enumerate(rows):
        ptr[i + 1] = ptr[i] + len(row)
    idx = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    return ptr, idx.astype(np.int64)


def _glauber_rates(beta: float, deg: int) -> np.ndarray:
    """1/(1 + exp(beta * dE)) for dE in [-deg, deg], overflow-safe."""
    de = beta * np.arange(-deg, deg + 1, dtype=np.float64)
    rates = np.empty_like(de)
    pos = de > 0
    rates[pos] = np.exp(-de[pos]) / (1.0 + np.exp(-de[pos]))
    rates[~pos] = 1.0 / (1.0 + np.exp(de[~pos]))
    return rates


def delta_e(sys: SpinSystem, i: int) -> int:
    """Energy change of flipping spin ``i`` in the current configuration."""
    return int(sys._delta_e[i])


def _select(sys: SpinSystem, u_class: float, u_member: float) -> tuple[int, float]:
    """Pick (spin, total rate) exactly as the compiled kernel does.

    The summation order matches ``_advance`` term for term so the two
    implementations agree bit for bit on the same draws.
    """
    counts, rates = sys._counts, sys.rates
    total = 0.0
    for j in range(len(counts)):
        total += rates[j] * counts[j]
    if total <= 0.0:
        raise FrozenSystemError("every rate class underflowed to zero")
    r = u_class * total
    acc = 0.0
    ell = -1
    for j in range(len(counts)):
        if counts[j] == 0:
            continue
        acc += rates[j] * counts[j]
        ell = j
        if r < acc:
            break
    k = min(int(u_member * counts[ell]), int(counts[ell]) - 1)
    return int(sys._members[ell, k]), total


def _apply_flip(sys: SpinSystem, i: int) -> None:
    for a in range(sys._check_ptr[i], sys._check_ptr[i + 1]):
        s = sys._check_idx[a]
        v = -sys._check_prod[s]
        sys._check_prod[s] = v
        dv = 2 * int(v)
        for b in range(sys._spin_ptr[s], sys._spin_ptr[s + 1]):
            q = sys._spin_idx[b]
            old = sys._class_of[q]
            new = old + dv
            p = sys._class_pos[q]
            last = sys._counts[old] - 1
            moved = sys._members[old, last]
            sys._members[old, p] = moved
            sys._class_pos[moved] = p
            sys._counts[old] = last
            sys._members[new, sys._counts[new]] = q
            sys._class_pos[q] = sys._counts[new]
            sys._counts[new] += 1
            sys._class_of[q] = new
            sys._delta_e[q] += dv
    sys.sigma[i] = -sys.sigma[i]


def nfold_step(sys: SpinSystem, rng: np.random.Generator) -> tuple[int, float]:
    """One rejection-free step; returns the flipped spin and the time advance."""
    u = rng.random(3)
    i, total = _select(sys, u[0], u[1])
    w = 1.0 - u[2]
    if w >= 1.0:
        w = 0.9999999999999999
    dt = -math.log(w) / total
    _apply_flip(sys, i)
    sys._clock[0] += dt
    sys._flip_count[0] += 1
    return i, dt


@njit(cache=True)
def _advance(
    sigma,
    check_prod,
    delta_e_arr,
    class_of,
    class_pos,
    members,
    counts,
    rates,
    check_ptr,
    check_idx,
    spin_ptr,
    spin_idx,
    clock,
    flip_count,
    buf,
    pos,
    t_target,
    t_max,
):
    n_classes = rates.shape[0]
    while True:
        if pos + 3 > buf.shape[0]:
            return _REFILL, pos
        total = 0.0
        for j in range(n_classes):
            total += rates[j] * counts[j]
        if total <= 0.0:
            return _FROZEN, pos
        r = buf[pos] * total
        acc = 0.0
        ell = -1
        for j in range(n_classes):
            if counts[j] == 0:
                continue
            acc += rates[j] * counts[j]
            ell = j
            if r < acc:
                break
        k = np.int64(buf[pos + 1] * counts[ell])
        if k >= counts[ell]:
            k = counts[ell] - 1
        i = members[ell, k]
        w = 1.0 - buf[pos + 2]
        if w >= 1.0:
            w = 0.9999999999999999
        dt = -np.log(w) / total
        pos += 3
        for a in range(check_ptr[i], check_ptr[i + 1]):
            s = check_idx[a]
            v = -check_prod[s]
            check_prod[s] = v
            dv = 2 * np.int64(v)
            for b in range(spin_ptr[s], spin_ptr[s + 1]):
                q = spin_idx[b]
                old = class_of[q]
                new = old + dv
                p = class_pos[q]
                last = counts[old] - 1
                moved = members[old, last]
                members[old, p] = moved
                class_pos[moved] = p
                counts[old] = last
                members[new, counts[new]] = q
                class_pos[q] = counts[new]
                counts[new] += 1
                class_of[q] = new
                delta_e_arr[q] += dv
        sigma[i] = -sigma[i]
        clock[0] += dt
        flip_count[0] += 1
        if clock[0] >= t_max:
            return _CENSORED, pos
        if clock[0] >= t_target:
            return _DECODE, pos


@njit(cache=True)
def _advance_sampling(
    sigma,
    check_prod,
    delta_e_arr,
    class_of,
    class_pos,
    members,
    counts,
    rates,
    check_ptr,
    check_idx,
    spin_ptr,
    spin_idx,
    clock,
    flip_count,
    buf,
    pos,
    steps,
    tau,
    level_counts,
):
    """Like _advance but records the energy level on a fixed time grid.

    ``clock[1]`` carries the next grid time; a non-positive ``tau``
    disables recording (warm-up).  Runs ``steps`` flips or until the
    draw buffer runs dry, whichever comes first; returns the remaining
    step count so the caller can resume.
    """
    n_classes = rates.shape[0]
    n_checks = check_prod.shape[0]
    sum_prod = np.int64(0)
    for s in range(n_checks):
        sum_prod += check_prod[s]
    while steps > 0:
        if pos + 3 > buf.shape[0]:
            return _REFILL, pos, steps
        total = 0.0
        for j in range(n_classes):
            total += rates[j] * counts[j]
        if total <= 0.0:
            return _FROZEN, pos, steps
        r = buf[pos] * total
        acc = 0.0
        ell = -1
        for j in range(n_classes):
            if counts[j] == 0:
                continue
            acc += rates[j] * counts[j]
            ell = j
            if r < acc:
                break
        k = np.int64(buf[pos + 1] * counts[ell])
        if k >= counts[ell]:
            k = counts[ell] - 1
        i = members[ell, k]
        w = 1.0 - buf[pos + 2]
        if w >= 1.0:
            w = 0.9999999999999999
        dt = -np.log(w) / total
        pos += 3
        if tau > 0.0:
            t_next = clock[0] + dt
            level = (sum_prod + n_checks) // 2
            while clock[1] <= t_next:
                level_counts[level] += 1
                clock[1] += tau
        for a in range(check_ptr[i], check_ptr[i + 1]):
            s = check_idx[a]
            v = -check_prod[s]
            check_prod[s] = v
            sum_prod += 2 * np.int64(v)
            dv = 2 * np.int64(v)
            for b in range(spin_ptr[s], spin_ptr[s + 1]):
                q = spin_idx[b]
                old = class_of[q]
                new = old + dv
                p = class_pos[q]
                last = counts[old] - 1
                moved = members[old, last]
                members[old, p] = moved
                class_pos[moved] = p
                counts[old] = last
                members[new, counts[new]] = q
                class_pos[q] = counts[new]
                counts[new] += 1
                class_of[q] = new
                delta_e_arr[q] += dv
        sigma[i] = -sigma[i]
        clock[0] += dt
        flip_count[0] += 1
        steps -= 1
    return _DONE, pos, 0


@dataclass(frozen=True)
class TrialConfig:
    beta: float
    seed: object
    t_max: float
    growth: float = 0.1
    decoder: str = "cluster"


@dataclass(frozen=True)
class TrialResult:
    t_fail: float
    censored: bool
    flips: int
    decodes: int


def run_trial(
    code: LayerCode,
    config: TrialConfig,
    decoder: Callable[[f2core.BitVector], f2core.BitVector],
) -> TrialResult:
    """Simulate one memory trial; ``decoder`` maps a Z-check syndrome to
    an X correction.

    The first decode happens at the first flip; each subsequent one when
    the clock has grown by ``config.growth`` relative to the previous
    decode.  Failure is the first decode whose residual anticommutes
    with some logical Z representative.  Reaching ``t_max`` censors the
    trial at exactly ``t_max`` without a final decode, so uncensored
    failure times are always below the cutoff.
    """
    sys = SpinSystem.from_code(code, config.beta)
    rng = np.random.default_rng(config.seed)
    logical_zs = logical_basis(code)[0]
    buf = rng.random(_BUFFER)
    pos = 0
    t_target = 0.0
    decodes = 0
    while True:
        status, pos = _advance(
            *sys._kernel_args(), buf, pos, t_target, config.t_max
        )
        if status == _REFILL:
            sys.audit()
            buf = rng.random(_BUFFER)
            pos = 0
            continue
        if status == _FROZEN:
            raise FrozenSystemError(
                f"every rate class underflowed at beta={config.beta}"
            )
        if status == _CENSORED:
            sys.audit()
            return TrialResult(config.t_max, True, sys.flips, decodes)
        err = sys.error_vector()
        corr = decoder(code.syndrome_of_x(err))
        decodes += 1
        if any(g.dot(err ^ corr) for g in logical_zs):
            sys.audit()
            return TrialResult(sys.t, False, sys.flips, decodes)
        t_target = (1.0 + config.growth) * sys.t


@dataclass(frozen=True)
class GibbsReport:
    chi2: float
    dof: int
    pvalue: float
    samples: int


def gibbs_check(
    sys: SpinSystem,
    steps: int,
    rng: np.random.Generator,
    flips_per_sample: int | None = None,
) -> GibbsReport:
    """Chi-squared comparison of visited energy levels against Gibbs.

    Runs the dynamics for ``steps`` flips, sampling the energy on a
    regular time grid (the grid spacing covers about ``flips_per_sample``
    flips, default eight per spin, so consecutive samples are roughly
    independent).  Expected level probabilities come from exact
    enumeration, which is why the system is capped at 20 spins.
    """
    if sys.n > 20:
        raise ValueError("exact enumeration is limited to 20 spins")
    if flips_per_sample is None:
        flips_per_sample = 8 * sys.n

    warmup = max(min(steps // 20, 50_000), 1)
    t0 = sys.t
    _run_sampling(sys, rng, warmup, 0.0, None)
    tau = flips_per_sample * (sys.t - t0) / warmup

    levels = np.zeros(len(sys.checks) + 1, dtype=np.int64)
    sys._clock[1] = sys.t + tau
    _run_sampling(sys, rng, steps, tau, levels)

    probs = _exact_level_probs(sys)
    return _chi2_report(levels, probs)


def _run_sampling(sys, rng, steps, tau, levels) -> None:
    if levels is None:
        levels = np.zeros(len(sys.checks) + 1, dtype=np.int64)
    buf = rng.random(_BUFFER)
    pos = 0
    remaining = steps
    while True:
        status, pos, remaining = _advance_sampling(
            *sys._kernel_args(), buf, pos, remaining, tau, levels
        )
        if status == _DONE:
            return
        if status == _FROZEN:
            raise FrozenSystemError("all rate classes are empty or underflowed")
        sys.audit()
        buf = rng.random(_BUFFER)
        pos = 0


def _exact_level_probs(sys: SpinSystem) -> np.ndarray:
    """Gibbs probability of each value of (sum of check products)."""
    n, m = sys.n, len(sys.checks)
    states = (np.arange(1 << n, dtype=np.int64)[:, None] >> np.arange(n)) & 1
    sigma = (1 - 2 * states).astype(np.int8)
    sum_prod = np.zeros(1 << n, dtype=np.int64)
    for members in sys.checks:
        prod = np.ones(1 << n, dtype=np.int8)
        for q in members:
            prod *= sigma[:, q]
        sum_prod += prod
    # energy = -sum_prod / 2; shift by the minimum for a stable exponent
    weight = np.exp(0.5 * sys.beta * (sum_prod - sum_prod.max()))
    probs = np.zeros(m + 1, dtype=np.float64)
    np.add.at(probs, (sum_prod + m) // 2, weight)
    return probs / probs.sum()


def _chi2_report(counts: np.ndarray, probs: np.ndarray) -> GibbsReport:
    """Pearson chi-squared after merging adjacent bins below 5 expected."""
    total = int(counts.sum())
    expected = probs * total
    bins: list[tuple[float, float]] = []
    acc_o, acc_e = 0.0, 0.0
    for o, e in zip(counts, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            bins.append((acc_o, acc_e))
            acc_o, acc_e = 0.0, 0.0
    if acc_e > 0.0:
        if bins:
            o, e = bins.pop()
            bins.append((o + acc_o, e + acc_e))
        else:
            bins.append((acc_o, acc_e))
    chi2 = sum((o - e) ** 2 / e for o, e in bins if e > 0)
    dof = max(len(bins) - 1, 1)
    return GibbsReport(chi2, dof, float(stats.chi2.sf(chi2, dof)), total)
