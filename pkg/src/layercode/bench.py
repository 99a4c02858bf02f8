"""Experiment harness: code ensembles, threshold and memory sweeps, fits.

Every experiment is deterministic given its spec.  Per-trial generators
are seeded from (master seed, tag, point index, trial index), so the
result of a trial does not depend on which worker runs it or how the
work is chunked; outputs are written in grid order and are byte
identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np

from . import clusterdec, concatdec, csscode, f2core, thermal
from .layerbuild import LayerCode, build, logical_basis

log = logging.getLogger(__name__)

DECODERS = ("cluster", "concat", "concat-modified")

# seed stream tags, to keep ensemble sampling and the two trial kinds
# from ever colliding on the same entropy tuple
_TAG_ENSEMBLE = 11
_TAG_THRESHOLD = 7
_TAG_MEMORY = 13


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    n_grid: tuple[int, ...]
    p_grid: tuple[float, ...] = ()
    beta_grid: tuple[float, ...] = ()
    trials: int = 40
    candidates: int = 2000
    keep: int = 20
    seed: int = 0
    workers: int = 1
    decoder: str = "cluster"
    K: int = 1
    variant: str = "original-termination"
    t_max: float = 1e7
    growth: float = 0.1

    def __post_init__(self):
        if self.kind not in ("threshold", "memory"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.n_grid:
            raise ValueError("empty n grid")
        if self.kind == "threshold" and not self.p_grid:
            raise ValueError("threshold experiment needs a p grid")
        if self.kind == "memory" and not self.beta_grid:
            raise ValueError("memory experiment needs a beta grid")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")


def build_ensemble(
    n: int, R: int, r: int, rng: np.random.Generator
) -> list[csscode.CssCode]:
    """Keep the r highest-distance one-logical balanced codes out of R draws.

    Balanced means d_X = d_Z.  Ties are broken by sample order, so the
    returned list is deterministic for a given generator state.  A short
    ensemble (fewer than r survivors) is returned as-is with a warning.
    """
    if n % 2 == 0:
        raise ValueError("ensemble sampling is defined for odd n")
    rho = (n - 1) / (2 * n)
    kept: list[tuple[int, int, csscode.CssCode]] = []
    for i in range(R):
        code = csscode.sample_css(n, rho, rho, rng)
        if code.k != 1:
            continue
        dists = csscode.min_distance(code)
        if dists is None or dists[0] != dists[1]:
            continue
        kept.append((dists[0], i, code))
    kept.sort(key=lambda item: (-item[0], item[1]))
    if len(kept) < r:
        log.warning("ensemble for n=%d has %d of %d codes", n, len(kept), r)
    return [code for _, _, code in kept[:r]]


def code_hash(code: csscode.CssCode) -> str:
    blob = code.hx.to_dense().tobytes() + b"/" + code.hz.to_dense().tobytes()
    return hashlib.sha1(blob).hexdigest()[:12]


def _dense_key(code: csscode.CssCode) -> tuple:
    return (
        tuple(map(tuple, code.hx.to_dense().tolist())),
        tuple(map(tuple, code.hz.to_dense().tolist())),
    )


@lru_cache(maxsize=128)
def _runtime(key: tuple, K: int, variant: str, decoder: str):
    """Layer code, X-error decoder and logical-Z basis, built per worker."""
    hx_rows, hz_rows = key
    code = csscode.CssCode(
        f2core.BitMatrix.from_dense(list(hx_rows)),
        f2core.BitMatrix.from_dense(list(hz_rows)),
    )
    layer = build(code, K, variant)
    if decoder == "cluster":
        graph = clusterdec.build_hypergraph(layer)
        fn = lambda s: clusterdec.decode(graph, s)
    elif decoder == "concat":
        fn = lambda s: concatdec.decode(layer, s, error="X")
    else:
        fn = lambda s: concatdec.decode_modified(layer, s, error="X")
    return layer, fn, logical_basis(layer)[0]


def _threshold_chunk(args) -> tuple[int, int]:
    key, K, variant, decoder, p, point_idx, trial_ids, master = args
    layer, decode_fn, logical_zs = _runtime(key, K, variant, decoder)
    failures = 0
    for t in trial_ids:
        rng = np.random.default_rng((master, _TAG_THRESHOLD, point_idx, t))
        err = f2core.BitVector.from_bits(
            (rng.random(layer.n_qubits) < p).astype(np.uint8)
        )
        residual = err ^ decode_fn(layer.syndrome_of_x(err))
        if any(g.dot(residual) for g in logical_zs):
            failures += 1
    return point_idx, failures


def _memory_chunk(args) -> list[tuple]:
    key, K, variant, decoder, beta, point_idx, trial_ids, master, t_max, growth = args
    layer, decode_fn, _ = _runtime(key, K, variant, decoder)
    rows = []
    for t in trial_ids:
        seed = (master, _TAG_MEMORY, point_idx, t)
        config = thermal.TrialConfig(
            beta=beta, seed=seed, t_max=t_max, growth=growth, decoder=decoder
        )
        result = thermal.run_trial(layer, config, decode_fn)
        rows.append((point_idx, t, seed, result))
    return rows


def _run_chunks(chunks: list, worker, workers: int) -> list:
    if workers <= 1:
        return [worker(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, chunks))


def _ensembles(spec: ExperimentSpec) -> dict[int, list[csscode.CssCode]]:
    out = {}
    for n in spec.n_grid:
        rng = np.random.default_rng((spec.seed, _TAG_ENSEMBLE, n))
        out[n] = build_ensemble(n, spec.candidates, spec.keep, rng)
        if not out[n]:
            raise RuntimeError(f"no usable codes sampled for n={n}")
    return out


def _chunks_for(spec: ExperimentSpec, ensembles) -> tuple[list, list]:
    """One chunk per (grid point, ensemble code); trials split round-robin."""
    points = []
    chunks = []
    values = spec.p_grid if spec.kind == "threshold" else spec.beta_grid
    for n in spec.n_grid:
        codes = ensembles[n]
        for value in values:
            point_idx = len(points)
            points.append((n, value))
            for slot, code in enumerate(codes):
                trial_ids = tuple(range(slot, spec.trials, len(codes)))
                if not trial_ids:
                    continue
                if spec.kind == "threshold":
                    chunks.append(
                        (_dense_key(code), spec.K, spec.variant, spec.decoder,
                         value, point_idx, trial_ids, spec.seed)
                    )
                else:
                    chunks.append(
                        (_dense_key(code), spec.K, spec.variant, spec.decoder,
                         value, point_idx, trial_ids, spec.seed,
                         spec.t_max, spec.growth)
                    )
    return points, chunks


def _write_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(path: Path, spec: ExperimentSpec, ensembles) -> None:
    payload = asdict(spec)
    del payload["workers"]  # execution detail, not part of the experiment
    payload["codes"] = {
        str(n): [code_hash(c) for c in codes] for n, codes in ensembles.items()
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def threshold_experiment(spec: ExperimentSpec, out: Path) -> list[tuple]:
    """Failure rate of i.i.d. bit flips per (n, p); writes CSV + manifest."""
    out = Path(out)
    ensembles = _ensembles(spec)
    points, chunks = _chunks_for(spec, ensembles)
    results = _run_chunks(chunks, _threshold_chunk, spec.workers)
    failures = [0] * len(points)
    for point_idx, fails in results:
        failures[point_idx] += fails
    rows = []
    for (n, p), fails in zip(points, failures):
        rate = fails / spec.trials
        stderr = float(np.sqrt(rate * (1.0 - rate) / spec.trials))
        rows.append((n, p, spec.trials, fails, rate, stderr))
    _write_csv(out, ["n", "p", "trials", "failures", "rate", "stderr"], rows)
    _write_manifest(out.with_suffix(".manifest.json"), spec, ensembles)
    return rows


def memory_experiment(spec: ExperimentSpec, out: Path) -> list[tuple]:
    """Mean memory time per (n, beta); writes aggregate CSV, trial log
    (sibling ``.trials.csv``) and manifest."""
    out = Path(out)
    ensembles = _ensembles(spec)
    points, chunks = _chunks_for(spec, ensembles)
    results = _run_chunks(chunks, _memory_chunk, spec.workers)

    id_of = {}
    for n, codes in ensembles.items():
        for slot, code in enumerate(codes):
            id_of[(n, slot)] = code_hash(code)

    trials: list[tuple] = []
    for rows in results:
        trials.extend(rows)
    trials.sort(key=lambda row: (row[0], row[1]))

    log_rows = []
    per_point: dict[int, list[thermal.TrialResult]] = {}
    for point_idx, t, seed, result in trials:
        n, value = points[point_idx]
        slot = t % len(ensembles[n])
        log_rows.append(
            (id_of[(n, slot)], n, value, "-".join(map(str, seed)),
             result.t_fail, int(result.censored), result.flips, result.decodes)
        )
        per_point.setdefault(point_idx, []).append(result)

    agg_rows = []
    for point_idx, (n, beta) in enumerate(points):
        res = per_point[point_idx]
        times = np.array([r.t_fail for r in res])
        sem = float(times.std(ddof=1) / np.sqrt(len(times))) if len(times) > 1 else 0.0
        agg_rows.append(
            (n, beta, float(times.mean()), sem, len(times),
             sum(r.censored for r in res))
        )

    _write_csv(
        out.with_name(out.stem + ".trials.csv"),
        ["code_id", "n", "beta", "seed", "t_fail", "censored", "flips", "decodes"],
        log_rows,
    )
    _write_csv(
        out, ["n", "beta", "mean_tfail", "sem", "trials", "censored"], agg_rows
    )
    _write_manifest(out.with_suffix(".manifest.json"), spec, ensembles)
    return agg_rows


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class BetaFit:
    beta: float
    slope: float
    slope_stderr: float
    n_star: float
    t_star: float


@dataclass(frozen=True)
class FitReport:
    """Least-squares summary of a memory sweep.

    ``nstar_coef`` is (a, b) of log n* = a*beta + b, ``tstar_coef`` is
    (a, b, c) of log t* = a*beta^2 + b*beta + c, and ``slope_coef`` is
    (a, b) of slope(beta) = a*beta + b; all with per-coefficient
    standard errors (zero when the fit is exact, NaN when there are no
    spare degrees of freedom).
    """

    per_beta: tuple[BetaFit, ...]
    nstar_coef: tuple[float, float]
    nstar_stderr: tuple[float, float]
    tstar_coef: tuple[float, float, float]
    tstar_stderr: tuple[float, float, float]
    slope_coef: tuple[float, float]
    slope_stderr: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _lsq(x, y, deg) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.vander(x, deg + 1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    dof = len(x) - (deg + 1)
    if dof > 0:
        resid = y - design @ coef
        scale = float(resid @ resid) / dof
        cov = scale * np.linalg.inv(design.T @ design)
        stderr = np.sqrt(np.diag(cov))
    else:
        stderr = np.full(deg + 1, np.nan)
    return coef, stderr


def read_memory_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: float(v) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def fit_report(rows: Iterable[dict] | Path | str) -> FitReport:
    """Fits over a memory aggregate table (rows with n, beta, mean_tfail).

    Per beta, n* is the grid argmax of the mean failure time (ties to
    the smaller n) and the slope comes from a linear fit of log mean
    against log n over the rising branch n <= n*.  When the rising
    branch is a single point (the curve peaks at the smallest n, e.g.
    flat or falling data), the slope is fit over the whole grid instead
    so it stays defined; a single-n grid yields NaN slopes.
    """
    if isinstance(rows, (str, Path)):
        rows = read_memory_csv(Path(rows))
    by_beta: dict[float, list[tuple[float, float]]] = {}
    for row in rows:
        by_beta.setdefault(float(row["beta"]), []).append(
            (float(row["n"]), float(row["mean_tfail"]))
        )
    if len(by_beta) < 3:
        raise ValueError("need at least 3 beta values to fit")

    per_beta = []
    for beta in sorted(by_beta):
        curve = sorted(by_beta[beta])
        ns = np.array([n for n, _ in curve])
        means = np.array([m for _, m in curve])
        star = int(np.argmax(means))
        stop = star + 1 if star >= 1 else len(ns)
        if stop >= 2:
            coef, err = _lsq(np.log(ns[:stop]), np.log(means[:stop]), 1)
            slope, slope_err = float(coef[0]), float(err[0])
        else:
            slope, slope_err = float("nan"), float("nan")
        per_beta.append(
            BetaFit(beta, slope, slope_err, float(ns[star]), float(means[star]))
        )

    betas = np.array([f.beta for f in per_beta])
    nstar_coef, nstar_err = _lsq(betas, np.log([f.n_star for f in per_beta]), 1)
    tstar_coef, tstar_err = _lsq(betas, np.log([f.t_star for f in per_beta]), 2)
    sloped = [f for f in per_beta if np.isfinite(f.slope)]
    if len(sloped) < 2:
        raise ValueError("fewer than 2 betas have a measurable rising branch")
    slope_coef, slope_err = _lsq(
        [f.beta for f in sloped], [f.slope for f in sloped], 1
    )
    return FitReport(
        per_beta=tuple(per_beta),
        nstar_coef=tuple(map(float, nstar_coef)),
        nstar_stderr=tuple(map(float, nstar_err)),
        tstar_coef=tuple(map(float, tstar_coef)),
        tstar_stderr=tuple(map(float, tstar_err)),
        slope_coef=tuple(map(float, slope_coef)),
        slope_stderr=tuple(map(float, slope_err)),
    )
