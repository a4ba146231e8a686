"""Two-stage frequency grid search.

The long stage scans every strictly descending tuple drawn from one
even frequency grid over [f_min, f_max].  The short stage re-scans a
dense grid inside a narrow window around each long-stage frequency,
taking all ordered combinations across the per-signal windows.

Work is split into fixed-size tuple chunks that depend only on the
problem dimensions, never on the worker count, and chunk results are
merged with exact comparisons (ties broken by the lexicographically
smallest tuple).  Results are therefore identical whatever the number
of threads.
"""

from __future__ import annotations

import itertools
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnstableSearchError
from .linfit import design_solver, evaluate_z, weighting_mode
from .model import ModelSpec
from .timeseries import SpanStats, TimeSeries, span_stats

__all__ = ["SearchConfig", "Slice", "Periodogram", "long_search", "short_search",
           "periodogram_slice", "scan_rounds"]

# Elements of one (tuples, n, m) work array per chunk; keeps peak memory
# bounded for large series while amortising the per-call overhead.
_CHUNK_TARGET = 4_000_000
_CHUNK_MAX = 4096
_CHUNK_MIN = 16


@dataclass(frozen=True)
class SearchConfig:
    """Frequency range and grid sizes of the two search stages.

    ``half_width_frac`` is the fraction c of the full frequency range
    used as the short-stage window width: each window spans
    f_best +- c (f_max - f_min) / 2, clipped to the search range.
    """

    f_min: float
    f_max: float
    n_long: int = 200
    n_short: int = 200
    half_width_frac: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.f_min < self.f_max):
            raise ConfigError("need 0 < f_min < f_max")
        if self.n_long < 2 or self.n_short < 2:
            raise ConfigError("grids need at least 2 points")
        if self.half_width_frac <= 0.0:
            raise ConfigError("half_width_frac must be > 0")

    @classmethod
    def from_periods(cls, p_min: float, p_max: float, **kw) -> "SearchConfig":
        if not (0.0 < p_min < p_max):
            raise ConfigError("need 0 < p_min < p_max")
        return cls(f_min=1.0 / p_max, f_max=1.0 / p_min, **kw)

    @property
    def window_half_width(self) -> float:
        return 0.5 * self.half_width_frac * (self.f_max - self.f_min)


@dataclass
class Slice:
    """One-dimensional cut z_i(f_i) with the other frequencies frozen."""

    signal: int  # 1-based
    f: np.ndarray
    z: np.ndarray


@dataclass
class Periodogram:
    """Result of one search stage."""

    stage: str
    grids: list[np.ndarray]
    best: np.ndarray
    z_min: float
    slices: list[Slice]
    combinations: int
    degenerate_hit: bool = False


def _chunk_rows(n: int, m: int) -> int:
    rows = _CHUNK_TARGET // max(1, n * m)
    return int(min(_CHUNK_MAX, max(_CHUNK_MIN, rows)))


def _combination_chunks(grid: np.ndarray, k: int, rows: int):
    """Yield (B, k) arrays of descending tuples from one shared grid,
    enumerating index combinations in lexicographic order."""
    combos = itertools.combinations(range(grid.size), k)
    while True:
        block = list(itertools.islice(combos, rows))
        if not block:
            return
        idx = np.asarray(block, dtype=np.intp)
        yield grid[idx[:, ::-1]]


def _product_chunks(grids: list[np.ndarray], rows: int):
    """Yield (B, k) arrays of strictly descending tuples drawn from
    per-signal grids, enumerated in lexicographic index order."""
    k = len(grids)
    if k == 1:
        g = grids[0]
        for start in range(0, g.size, rows):
            yield g[start:start + rows, None]
        return
    tail = grids[1:]
    tail_size = int(np.prod([g.size for g in tail]))
    # Lead-axis blocks keep the unfiltered mesh bounded.
    lead_block = max(1, rows // max(1, tail_size))
    g0 = grids[0]
    pending = []
    pending_rows = 0
    for start in range(0, g0.size, lead_block):
        lead = g0[start:start + lead_block]
        mesh = np.meshgrid(lead, *tail, indexing="ij")
        tuples = np.stack([m.ravel() for m in mesh], axis=1)
        keep = np.all(tuples[:, :-1] > tuples[:, 1:], axis=1)
        tuples = tuples[keep]
        if tuples.size:
            pending.append(tuples)
            pending_rows += tuples.shape[0]
        while pending_rows >= rows:
            buf = np.concatenate(pending, axis=0) if len(pending) > 1 else pending[0]
            yield buf[:rows]
            rest = buf[rows:]
            pending = [rest] if rest.size else []
            pending_rows = rest.shape[0] if rest.size else 0
    if pending_rows:
        yield np.concatenate(pending, axis=0) if len(pending) > 1 else pending[0]


def _lex_best(tuples: np.ndarray, cand: np.ndarray) -> int:
    """Index (within cand) of the lexicographically smallest tuple."""
    sub = tuples[cand]
    order = np.lexsort(sub.T[::-1])
    return int(cand[order[0]])


def _reduce_chunk(ts, spec, stats, weighting, tuples):
    z, degen = evaluate_z(ts, spec, tuples, stats, weighting)
    i = int(np.argmin(z))
    zmin = z[i]
    cand = np.flatnonzero(z == zmin)
    if cand.size > 1:
        i = _lex_best(tuples, cand)
    return float(zmin), tuples[i].copy(), tuples.shape[0], bool(degen.any())


def _better(z_a, t_a, z_b, t_b) -> bool:
    """True when candidate a beats b (lower z, then lexicographic tuple)."""
    if z_a != z_b:
        return z_a < z_b
    for x, y in zip(t_a, t_b):
        if x != y:
            return x < y
    return False


def _scan(ts, spec, stats, weighting, chunks, workers):
    best_z = np.inf
    best_t = None
    total = 0
    degenerate = False

    def merge(res):
        nonlocal best_z, best_t, total, degenerate
        zmin, tup, count, degen = res
        total += count
        degenerate = degenerate or degen
        if best_t is None or _better(zmin, tup, best_z, best_t):
            best_z, best_t = zmin, tup

    if workers <= 1:
        for tuples in chunks:
            merge(_reduce_chunk(ts, spec, stats, weighting, tuples))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            inflight = set()
            for tuples in chunks:
                inflight.add(pool.submit(_reduce_chunk, ts, spec, stats, weighting, tuples))
                if len(inflight) >= 2 * workers:
                    done, inflight = wait(inflight, return_when=FIRST_COMPLETED)
                    for fut in done:
                        merge(fut.result())
            for fut in inflight:
                merge(fut.result())
    return best_z, best_t, total, degenerate


def periodogram_slice(ts, spec, freqs, axis, grid, stats=None, weighting=None):
    """Misfit z along one frequency axis, the others held fixed.

    Returns the z values over ``grid``.  Points where the varied
    frequency duplicates a fixed one are evaluated through the same
    rank-truncated solve as everywhere else.
    """
    if stats is None:
        stats = span_stats(ts)
    freqs = np.asarray(freqs, dtype=float)
    grid = np.asarray(grid, dtype=float)
    rows = _chunk_rows(ts.n, spec.n_linear)
    out = np.empty(grid.size)
    for start in range(0, grid.size, rows):
        block = grid[start:start + rows]
        tuples = np.tile(freqs, (block.size, 1))
        tuples[:, axis] = block
        out[start:start + rows] = evaluate_z(ts, spec, tuples, stats, weighting)[0]
    return out


def _build_slices(ts, spec, stats, weighting, grids, best):
    slices = []
    for i in range(spec.k1):
        z = periodogram_slice(ts, spec, best, i, grids[i], stats, weighting)
        slices.append(Slice(signal=i + 1, f=grids[i], z=z))
    return slices


def _check_size(ts: TimeSeries, spec: ModelSpec):
    if spec.k1 < 1:
        raise ConfigError("grid search needs at least one signal (k1 >= 1)")
    if ts.n <= spec.eta + 1:
        raise ConfigError(
            f"need more than eta+1 = {spec.eta + 1} points, have {ts.n}")


def long_search(ts, spec, cfg: SearchConfig, stats=None, weighting=None, workers=1):
    """Coarse scan over all descending tuples from one even grid.

    Returns
    -------
    Periodogram
        ``best`` holds the winning tuple (descending), ``slices`` one
        cut per signal across the full grid.
    """
    _check_size(ts, spec)
    if stats is None:
        stats = span_stats(ts)
    grid = np.linspace(cfg.f_min, cfg.f_max, cfg.n_long)
    rows = _chunk_rows(ts.n, spec.n_linear)
    chunks = _combination_chunks(grid, spec.k1, rows)
    z_min, best, total, degen = _scan(ts, spec, stats, weighting, chunks, workers)
    grids = [grid] * spec.k1
    slices = _build_slices(ts, spec, stats, weighting, grids, best)
    return Periodogram(
        stage="long", grids=grids, best=best, z_min=z_min,
        slices=slices, combinations=total, degenerate_hit=degen,
    )


def scan_rounds(ts, spec, grids, y_rounds, stats=None, weighting=None, workers=1):
    """Best tuple over the given grids for many data rounds at once.

    This is the bootstrap work horse: each resampled series re-runs the
    short stage over the same candidate tuples, so the design matrices
    and their factorisations are shared across rounds within a chunk.

    Parameters
    ----------
    grids : list of ndarray
        Per-signal candidate frequencies (as produced by the short stage).
    y_rounds : ndarray, shape (R, n)
        One resampled data vector per round.

    Returns
    -------
    z_min : ndarray, shape (R,)
    best : ndarray, shape (R, k1)
    """
    if stats is None:
        stats = span_stats(ts)
    mode = weighting_mode(ts, weighting)
    y_rounds = np.asarray(y_rounds, dtype=float)
    n_rounds = y_rounds.shape[0]
    yw = y_rounds.T.copy()
    if mode == "chi-square":
        yw /= ts.sigma[:, None]
    rows = _chunk_rows(ts.n, spec.n_linear)
    r_block = int(max(1, min(n_rounds, _CHUNK_TARGET // max(1, rows * ts.n))))

    def chunk_task(tuples):
        solver = design_solver(ts, spec, tuples, stats, mode)
        zmin = np.empty(n_rounds)
        pick = np.empty(n_rounds, dtype=np.intp)
        for r0 in range(0, n_rounds, r_block):
            z = solver.misfit(yw[None, :, r0:r0 + r_block], ts.n)
            idx = np.argmin(z, axis=0)
            cols = np.arange(z.shape[1])
            zblk = z[idx, cols]
            ties = (z == zblk[None, :]).sum(axis=0) > 1
            for c in np.flatnonzero(ties):
                idx[c] = _lex_best(tuples, np.flatnonzero(z[:, c] == zblk[c]))
            zmin[r0:r0 + r_block] = zblk
            pick[r0:r0 + r_block] = idx
        return zmin, tuples[pick]

    best_z = np.full(n_rounds, np.inf)
    best_t = None

    def merge(res):
        nonlocal best_t
        zc, tc = res
        if best_t is None:
            best_t = tc.copy()
            best_z[:] = zc
            return
        for r in range(n_rounds):
            if _better(zc[r], tc[r], best_z[r], best_t[r]):
                best_z[r] = zc[r]
                best_t[r] = tc[r]

    chunks = _product_chunks(grids, rows)
    if workers <= 1:
        for tuples in chunks:
            merge(chunk_task(tuples))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            inflight = set()
            for tuples in chunks:
                inflight.add(pool.submit(chunk_task, tuples))
                if len(inflight) >= 2 * workers:
                    done, inflight = wait(inflight, return_when=FIRST_COMPLETED)
                    for fut in done:
                        merge(fut.result())
            for fut in inflight:
                merge(fut.result())
    if best_t is None:
        raise UnstableSearchError("no ordered frequency tuple to scan")
    return best_z, best_t


def short_search(ts, spec, cfg: SearchConfig, centers, stats=None, weighting=None,
                 workers=1):
    """Dense scan in a window around each long-stage frequency.

    ``centers`` is the long-stage best tuple.  Windows are clipped to
    [f_min, f_max]; tuples are all ordered combinations across the
    per-signal windows.

    Raises
    ------
    UnstableSearchError
        If no strictly descending tuple exists across the windows.
    """
    _check_size(ts, spec)
    if stats is None:
        stats = span_stats(ts)
    centers = np.asarray(centers, dtype=float)
    if centers.shape != (spec.k1,):
        raise ConfigError(f"expected {spec.k1} window centers")
    a = cfg.window_half_width
    grids = []
    for mid in centers:
        lo = max(cfg.f_min, mid - a)
        hi = min(cfg.f_max, mid + a)
        grids.append(np.linspace(lo, hi, cfg.n_short))
    rows = _chunk_rows(ts.n, spec.n_linear)
    chunks = _product_chunks(grids, rows)
    z_min, best, total, degen = _scan(ts, spec, stats, weighting, chunks, workers)
    if best is None:
        raise UnstableSearchError(
            "short-stage windows admit no ordered frequency tuple")
    slices = _build_slices(ts, spec, stats, weighting, grids, best)
    return Periodogram(
        stage="short", grids=grids, best=best, z_min=z_min,
        slices=slices, combinations=total, degenerate_hit=degen,
    )
