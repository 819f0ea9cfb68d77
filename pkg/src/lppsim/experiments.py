"""Monte Carlo estimators for the coalescence-tail, reduction-ratio,
family-crossing, transversal-fluctuation, and passage-time-scaling claims.

Every trial draws one environment from its trial seed and derives all of
its indicators from that single environment (no per-event reseeding), so
events measured together are coupled exactly as in the underlying
arguments.  Structural identities that must hold pathwise are re-checked on
every trial and raise InvariantViolation if they ever fail.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Region, geodesic, passage_grid_to_sink, segment_sup_passage
from .errors import DomainError, InsufficientDataError, InvariantViolation
from .geometry import (
    crossing_count,
    first_common_point,
    kbar,
    ktilde,
    ktilde_prime,
    parallel_family,
    two_thirds_floor,
)
from .harness import (
    Checkpoint,
    TrialPlan,
    config_hash,
    run_trials,
    trial_seed,
    wilson_interval,
)
from .weights import LatticePoint, WeightField

DEFAULT_BATCH_SIZE = 64
DEFAULT_Z = 1.96

# Fixed bins for the standardized one-point shift (T - (sqrt m + sqrt n)^2) / n^{1/3};
# first and last slots catch under/overflow.
HIST_LO, HIST_HI, HIST_BINS = -12.0, 6.0, 72


class _BufferCache(threading.local):
    """Per-thread grid buffers so batches do not reallocate per trial."""

    def __init__(self):
        self.buffers = {}

    def get(self, shape):
        arr = self.buffers.get(shape)
        if arr is None:
            arr = np.empty(shape, np.float64)
            self.buffers[shape] = arr
        return arr


_buffers = _BufferCache()


@dataclass(frozen=True)
class BinomialEstimate:
    successes: int
    trials: int
    p_hat: float
    ci_lo: float
    ci_hi: float

    @staticmethod
    def from_counts(successes: int, trials: int, z: float) -> "BinomialEstimate":
        lo, hi = wilson_interval(successes, trials, z)
        return BinomialEstimate(successes, trials, successes / trials, lo, hi)


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    stderr: float
    n_points: int


def fit_power_law(points, weights=None) -> PowerLawFit:
    """Least squares for ln p = intercept + slope * ln R.

    Points with p_hat <= 0 are dropped with a warning; fewer than three
    usable points is an error.  The default is unweighted; `weights` (one
    per input point) switches to weighted least squares.
    """
    points = list(points)
    if weights is not None:
        weights = list(weights)
        if len(weights) != len(points):
            raise DomainError("weights must match points one-to-one")
    kept, kept_w = [], []
    for idx, (r, p) in enumerate(points):
        if p <= 0:
            warnings.warn(f"excluding non-positive rate at R={r} from power-law fit")
            continue
        kept.append((float(r), float(p)))
        kept_w.append(1.0 if weights is None else float(weights[idx]))
    if len(kept) < 3:
        raise InsufficientDataError(
            f"power-law fit needs >= 3 points with p_hat > 0, have {len(kept)}"
        )
    x = np.log([r for r, _ in kept])
    y = np.log([p for _, p in kept])
    w = np.asarray(kept_w)
    wsum = w.sum()
    xbar = float((w * x).sum() / wsum)
    ybar = float((w * y).sum() / wsum)
    sxx = float((w * (x - xbar) ** 2).sum())
    slope = float((w * (x - xbar) * (y - ybar)).sum() / sxx)
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = len(kept) - 2
    s2 = float((w * resid ** 2).sum() / dof) if dof > 0 else 0.0
    stderr = math.sqrt(max(s2, 0.0) / sxx)
    return PowerLawFit(slope, intercept, stderr, len(kept))


@dataclass(frozen=True)
class ExperimentConfig:
    k: int
    n: int
    R_values: tuple[float, ...]
    trials: int
    seed: int
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "R_values", tuple(float(r) for r in self.R_values))
        if self.k < 1 or self.n < 1:
            raise DomainError("k and n must be positive")
        if self.trials < 1:
            raise DomainError("trials must be positive")
        if self.workers < 1:
            raise DomainError("workers must be positive")
        if not self.R_values or any(r <= 0 for r in self.R_values):
            raise DomainError("R values must be positive")
        for r in self.R_values:
            if not self.n > r * self.k:
                raise DomainError(
                    f"requires n > Rk ({self.n} <= {r * self.k:g} at R={r:g})"
                )


@dataclass(frozen=True)
class TailRow:
    R: float
    trials: int
    successes: int
    p_hat: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class TailEstimateTable:
    rows: tuple[TailRow, ...]
    fitted_slope: float | None = None
    slope_stderr: float | None = None
    intercept: float | None = None


def _tail_table(R_values, successes, trials, z) -> TailEstimateTable:
    rows = []
    for r, s in zip(R_values, successes):
        est = BinomialEstimate.from_counts(s, trials, z)
        rows.append(TailRow(r, trials, s, est.p_hat, est.ci_lo, est.ci_hi))
    usable = [(row.R, row.p_hat) for row in rows if row.p_hat > 0]
    if len(usable) >= 3:
        fit = fit_power_law(usable)
        return TailEstimateTable(tuple(rows), fit.slope, fit.stderr, fit.intercept)
    return TailEstimateTable(tuple(rows))


def estimate_coalescence_tail(cfg: ExperimentConfig, *, z: float = DEFAULT_Z,
                              batch_size: int = DEFAULT_BATCH_SIZE,
                              checkpoint_path: str | None = None,
                              progress: bool = False) -> TailEstimateTable:
    """Tail of the coalescence depth of the geodesics from +-kbar to (n, n).

    Per trial, one grid anchored at the sink serves both geodesics; the
    depth of their first common point determines the indicator for every R
    at once.  The proof-level equivalence -- coalescence beyond Rk happens
    iff the two crossings of the line at depth floor(Rk) differ -- is
    asserted on every trial.
    """
    k, n = cfg.k, cfg.n
    kb = kbar(k)
    c = two_thirds_floor(k)
    region = Region(LatticePoint(-c, -c), LatticePoint(n, n))
    sink = LatticePoint(n, n)
    lines = [math.floor(r * k) for r in cfg.R_values]

    def trial(t: int) -> dict:
        fld = WeightField(trial_seed(cfg.seed, t))
        grid = passage_grid_to_sink(fld, sink, region, out=_buffers.get(region.shape))
        gp = geodesic(grid, kb)
        gm = geodesic(grid, LatticePoint(-kb.x, -kb.y))
        depth_c = first_common_point(gp, gm).depth()
        succ = []
        for r, m_line in zip(cfg.R_values, lines):
            s = depth_c > r * k
            differ = gp.xs[m_line] != gm.xs[m_line]
            if s != differ:
                raise InvariantViolation(
                    f"coalescence depth {depth_c} vs crossing at L_{m_line} disagree"
                )
            succ.append(int(s))
        return {"trials": 1, "successes": succ}

    plan = TrialPlan(cfg.seed, cfg.trials, batch_size)
    ck = _make_checkpoint(checkpoint_path, "tail", cfg, batch_size)
    agg = run_trials(plan, trial, cfg.workers, checkpoint=ck, progress=progress)
    return _tail_table(cfg.R_values, agg["successes"], agg["trials"], z)


def estimate_corollary_tail(cfg: ExperimentConfig, *, z: float = DEFAULT_Z,
                            batch_size: int = DEFAULT_BATCH_SIZE,
                            checkpoint_path: str | None = None,
                            progress: bool = False) -> TailEstimateTable:
    """Tail of the first coordinate of the coalescence point of the
    geodesics from 0 and ktilde to (n, n).

    Requires n > 4Rk.  The max identity relating the three pairwise
    coalescence points of 0, ktilde, ktilde' is asserted on every trial.
    """
    k, n = cfg.k, cfg.n
    for r in cfg.R_values:
        if not n > 4 * r * k:
            raise DomainError(f"requires n > 4Rk ({n} <= {4 * r * k:g} at R={r:g})")
    kt, ktp = ktilde(k), ktilde_prime(k)
    region = Region(LatticePoint(0, 0), LatticePoint(n, n))
    sink = LatticePoint(n, n)

    def trial(t: int) -> dict:
        fld = WeightField(trial_seed(cfg.seed, t))
        grid = passage_grid_to_sink(fld, sink, region, out=_buffers.get(region.shape))
        g0 = geodesic(grid, LatticePoint(0, 0))
        g_kt = geodesic(grid, kt)
        g_ktp = geodesic(grid, ktp)
        c_ok = first_common_point(g0, g_kt)
        c_okp = first_common_point(g0, g_ktp)
        c_kk = first_common_point(g_kt, g_ktp)
        if c_kk.depth() != max(c_ok.depth(), c_okp.depth()):
            raise InvariantViolation(
                f"max identity fails: d={c_kk.depth()} vs "
                f"max({c_ok.depth()}, {c_okp.depth()})"
            )
        if c_ok.x > c_ok.depth():
            raise InvariantViolation(f"first coordinate exceeds depth at {c_ok}")
        succ = [int(c_ok.x > r * k) for r in cfg.R_values]
        return {"trials": 1, "successes": succ}

    plan = TrialPlan(cfg.seed, cfg.trials, batch_size)
    ck = _make_checkpoint(checkpoint_path, "corollary-tail", cfg, batch_size)
    agg = run_trials(plan, trial, cfg.workers, checkpoint=ck, progress=progress)
    return _tail_table(cfg.R_values, agg["successes"], agg["trials"], z)


@dataclass(frozen=True)
class ReductionRatioResult:
    e1: BinomialEstimate
    e3: BinomialEstimate
    ratio: float
    ci_lo: float
    ci_hi: float
    trials: int


def reduction_ratio(k: int, n: int, R: float, trials: int, seed: int, *,
                    workers: int = 1, z: float = DEFAULT_Z,
                    batch_size: int = DEFAULT_BATCH_SIZE,
                    checkpoint_path: str | None = None,
                    progress: bool = False) -> ReductionRatioResult:
    """P[E1] / P[E3] where E1 compares the crossings of the two geodesics
    to (n, n) and E3 compares a geodesic to (n, n) with the parallel one to
    (n, n) + 2*kbar, all at the line of depth floor(Rk).

    Both events are measured in the same environment per trial; E1 implies
    E3 pathwise, and that containment is asserted on every trial.
    """
    if not R > 10:
        raise DomainError(f"requires R > 10 (got {R:g})")
    if not n > R * k:
        raise DomainError(f"requires n > Rk ({n} <= {R * k:g})")
    c = two_thirds_floor(k)
    kb = LatticePoint(c, -c)
    mkb = LatticePoint(-c, c)
    sink1 = LatticePoint(n, n)
    sink2 = LatticePoint(n + 2 * c, n - 2 * c)
    region1 = Region(LatticePoint(-c, -c), sink1)
    region2 = Region(kb, sink2)
    m_line = math.floor(R * k)

    def trial(t: int) -> dict:
        fld = WeightField(trial_seed(seed, t))
        grid1 = passage_grid_to_sink(fld, sink1, region1, out=_buffers.get(region1.shape))
        gp = geodesic(grid1, kb)
        gm = geodesic(grid1, mkb)
        e1 = gp.xs[m_line] != gm.xs[m_line]
        depth_c = first_common_point(gp, gm).depth()
        if e1 != (depth_c > R * k):
            raise InvariantViolation(
                f"E1 disagrees with coalescence depth {depth_c} at L_{m_line}"
            )
        grid2 = passage_grid_to_sink(fld, sink2, region2, out=_buffers.get(region2.shape))
        g_par = geodesic(grid2, kb)
        e3 = gm.xs[m_line] != g_par.xs[m_line]
        if e1 and not e3:
            raise InvariantViolation("containment E1 subset of E3 fails")
        return {"trials": 1, "n1": int(e1), "n3": int(e3), "n13": int(e1 and e3)}

    cfg = {"experiment": "reduction-ratio", "k": k, "n": n, "R": R,
           "trials": trials, "seed": seed, "batch_size": batch_size}
    ck = Checkpoint(checkpoint_path, cfg_hash=config_hash(cfg)) if checkpoint_path else None
    plan = TrialPlan(seed, trials, batch_size)
    agg = run_trials(plan, trial, workers, checkpoint=ck, progress=progress)

    n_tr, n1, n3, n13 = agg["trials"], agg["n1"], agg["n3"], agg["n13"]
    if n3 == 0:
        raise InsufficientDataError("E3 never occurred; ratio undefined")
    e1 = BinomialEstimate.from_counts(n1, n_tr, z)
    e3 = BinomialEstimate.from_counts(n3, n_tr, z)
    p1, p3, p13 = n1 / n_tr, n3 / n_tr, n13 / n_tr
    ratio = p1 / p3
    var1 = p1 * (1 - p1) / n_tr
    var3 = p3 * (1 - p3) / n_tr
    cov = (p13 - p1 * p3) / n_tr
    var_ratio = var1 / p3 ** 2 + p1 ** 2 * var3 / p3 ** 4 - 2 * p1 * cov / p3 ** 3
    half = z * math.sqrt(max(var_ratio, 0.0))
    return ReductionRatioResult(e1, e3, ratio, max(0.0, ratio - half), ratio + half, n_tr)


@dataclass(frozen=True)
class FamilyCrossingsResult:
    mean: float
    ci_lo: float
    ci_hi: float
    trials: int
    count_freq: tuple[int, ...]  # index c-1 = number of trials with c crossings


def estimate_family_crossings(a: int, b: int, d_spacing: int, m: int, s: int, r: int,
                              trials: int, seed: int, *,
                              workers: int = 1, z: float = DEFAULT_Z,
                              batch_size: int = DEFAULT_BATCH_SIZE,
                              checkpoint_path: str | None = None,
                              progress: bool = False) -> FamilyCrossingsResult:
    """Mean number of distinct crossings of L_r by the m+1 family geodesics."""
    fam = parallel_family(a, b, d_spacing, m, s)
    shape = Region(fam.starts[0], fam.ends[0]).shape

    def trial(t: int) -> dict:
        fld = WeightField(trial_seed(seed, t))
        cnt = crossing_count(fld, fam, r, out=_buffers.get(shape))
        freq = [0] * (m + 1)
        freq[cnt - 1] = 1
        return {"trials": 1, "count_sum": cnt, "count_sq_sum": cnt * cnt, "freq": freq}

    cfg = {"experiment": "family", "a": a, "b": b, "d_spacing": d_spacing, "m": m,
           "s": s, "r": r, "trials": trials, "seed": seed, "batch_size": batch_size}
    ck = Checkpoint(checkpoint_path, cfg_hash=config_hash(cfg)) if checkpoint_path else None
    plan = TrialPlan(seed, trials, batch_size)
    agg = run_trials(plan, trial, workers, checkpoint=ck, progress=progress)

    n_tr = agg["trials"]
    mean = agg["count_sum"] / n_tr
    var = (agg["count_sq_sum"] - agg["count_sum"] ** 2 / n_tr) / max(n_tr - 1, 1)
    half = z * math.sqrt(max(var, 0.0) / n_tr)
    return FamilyCrossingsResult(mean, mean - half, mean + half, n_tr,
                                 tuple(agg["freq"]))


@dataclass(frozen=True)
class FluctuationRow:
    x: float
    estimate: BinomialEstimate


def fluctuation_profile(m_offset: int, r: int, n: int, x_values, trials: int,
                        seed: int, *, workers: int = 1, z: float = DEFAULT_Z,
                        batch_size: int = DEFAULT_BATCH_SIZE,
                        checkpoint_path: str | None = None,
                        progress: bool = False) -> list[FluctuationRow]:
    """Exceedance frequencies P[|f0| > x * r^{2/3}] for the transversal
    fluctuation f0 of the geodesic from (m, -m) to (n, n) at line depth 2r."""
    if not r < n:
        raise DomainError(f"requires r < n ({r} >= {n})")
    scale = float(r) ** (2.0 / 3.0)
    if not abs(m_offset) < 10 * scale:
        raise DomainError(f"requires |m| < 10 r^(2/3) ({abs(m_offset)} >= {10 * scale:g})")
    x_values = tuple(float(x) for x in x_values)
    start = LatticePoint(m_offset, -m_offset)
    sink = LatticePoint(n, n)
    region = Region(start, sink)

    def trial(t: int) -> dict:
        fld = WeightField(trial_seed(seed, t))
        grid = passage_grid_to_sink(fld, sink, region, out=_buffers.get(region.shape))
        g = geodesic(grid, start)
        f0 = int(g.xs[2 * r - g.start_depth]) - r
        return {"trials": 1,
                "exceed": [int(abs(f0) > x * scale) for x in x_values]}

    cfg = {"experiment": "fluctuation", "m": m_offset, "r": r, "n": n,
           "x_values": list(x_values), "trials": trials, "seed": seed,
           "batch_size": batch_size}
    ck = Checkpoint(checkpoint_path, cfg_hash=config_hash(cfg)) if checkpoint_path else None
    plan = TrialPlan(seed, trials, batch_size)
    agg = run_trials(plan, trial, workers, checkpoint=ck, progress=progress)

    return [FluctuationRow(x, BinomialEstimate.from_counts(cnt, agg["trials"], z))
            for x, cnt in zip(x_values, agg["exceed"])]


@dataclass(frozen=True)
class OnePointStats:
    mean_shift: float
    std: float
    skew_sign: int
    trials: int
    m: int
    n: int
    hist_edges: tuple[float, ...] = field(repr=False, default=())
    hist_counts: tuple[int, ...] = field(repr=False, default=())


def onepoint_stats(m: int, n: int, trials: int, seed: int, *,
                   workers: int = 1, batch_size: int = DEFAULT_BATCH_SIZE,
                   checkpoint_path: str | None = None,
                   progress: bool = False) -> OnePointStats:
    """Sample T_{0,(m,n)} and report its shift against (sqrt m + sqrt n)^2.

    Also accumulates a histogram of the shift standardized by n^{1/3}
    (fixed bins, so the histogram aggregates like any other count).
    """
    if not m >= n >= 1:
        raise DomainError(f"requires m >= n >= 1 (got m={m}, n={n})")
    center = (math.sqrt(m) + math.sqrt(n)) ** 2
    inv_scale = 1.0 / float(n) ** (1.0 / 3.0)
    region = Region(LatticePoint(0, 0), LatticePoint(m, n))
    sink = LatticePoint(m, n)
    bin_w = (HIST_HI - HIST_LO) / HIST_BINS

    def trial(t: int) -> dict:
        fld = WeightField(trial_seed(seed, t))
        grid = passage_grid_to_sink(fld, sink, region, out=_buffers.get(region.shape))
        tval = float(grid.values[0, 0])
        shift = (tval - center) * inv_scale
        idx = 1 + int((shift - HIST_LO) // bin_w)
        idx = min(max(idx, 0), HIST_BINS + 1)
        hist = [0] * (HIST_BINS + 2)
        hist[idx] = 1
        return {"trials": 1, "t_sum": tval, "t_sq_sum": tval * tval, "hist": hist}

    cfg = {"experiment": "onepoint", "m": m, "n": n, "trials": trials,
           "seed": seed, "batch_size": batch_size}
    ck = Checkpoint(checkpoint_path, cfg_hash=config_hash(cfg)) if checkpoint_path else None
    plan = TrialPlan(seed, trials, batch_size)
    agg = run_trials(plan, trial, workers, checkpoint=ck, progress=progress)

    n_tr = agg["trials"]
    mean = agg["t_sum"] / n_tr
    var = (agg["t_sq_sum"] - agg["t_sum"] ** 2 / n_tr) / max(n_tr - 1, 1)
    shift = mean - center
    edges = tuple(HIST_LO + i * bin_w for i in range(HIST_BINS + 1))
    return OnePointStats(shift, math.sqrt(max(var, 0.0)),
                         (shift > 0) - (shift < 0), n_tr, m, n,
                         edges, tuple(agg["hist"]))


@dataclass(frozen=True)
class SegmentSupStats:
    mean_sup_shift: float
    tail_freqs: tuple[FluctuationRow, ...]
    trials: int
    n: int
    segment_halfwidth: int


def segment_sup_stats(n: int, trials: int, seed: int, *,
                      x_values=(0.0, 1.0, 2.0, 3.0),
                      workers: int = 1, z: float = DEFAULT_Z,
                      batch_size: int = DEFAULT_BATCH_SIZE,
                      checkpoint_path: str | None = None,
                      progress: bool = False) -> SegmentSupStats:
    """Statistics of (sup_{u in A, v in B} T_{u,v} - 4n) / n^{1/3} with A
    and B anti-diagonal segments of length ~n^{2/3} centered at 0 and (n, n).

    Per trial the sup is cross-checked against the midpoint passage time
    T_{0,(n,n)} computed by an independent reverse sweep.
    """
    if two_thirds_floor(n) < 2:
        raise DomainError(f"requires floor(n^(2/3)) >= 2 (n={n} too small)")
    h = two_thirds_floor(n) // 2
    A = [LatticePoint(i, -i) for i in range(-h, h + 1)]
    B = [LatticePoint(n + i, n - i) for i in range(-h, h + 1)]
    x_values = tuple(float(x) for x in x_values)
    inv_scale = 1.0 / float(n) ** (1.0 / 3.0)
    mid_region = Region(LatticePoint(0, 0), LatticePoint(n, n))

    def trial(t: int) -> dict:
        fld = WeightField(trial_seed(seed, t))
        sup = segment_sup_passage(fld, A, B)
        grid = passage_grid_to_sink(fld, LatticePoint(n, n), mid_region,
                                    out=_buffers.get(mid_region.shape))
        t00 = float(grid.values[0, 0])
        if sup < t00 - 1e-9 * abs(t00):
            raise InvariantViolation(f"sup {sup} below midpoint passage time {t00}")
        shift = (sup - 4.0 * n) * inv_scale
        return {"trials": 1, "shift_sum": shift,
                "exceed": [int(shift >= x) for x in x_values]}

    cfg = {"experiment": "segment-sup", "n": n, "x_values": list(x_values),
           "trials": trials, "seed": seed, "batch_size": batch_size}
    ck = Checkpoint(checkpoint_path, cfg_hash=config_hash(cfg)) if checkpoint_path else None
    plan = TrialPlan(seed, trials, batch_size)
    agg = run_trials(plan, trial, workers, checkpoint=ck, progress=progress)

    rows = tuple(FluctuationRow(x, BinomialEstimate.from_counts(cnt, agg["trials"], z))
                 for x, cnt in zip(x_values, agg["exceed"]))
    return SegmentSupStats(agg["shift_sum"] / agg["trials"], rows, agg["trials"], n, h)


def _make_checkpoint(path: str | None, name: str, cfg: ExperimentConfig,
                     batch_size: int) -> Checkpoint | None:
    if path is None:
        return None
    blob = {"experiment": name, "k": cfg.k, "n": cfg.n,
            "R_values": list(cfg.R_values), "trials": cfg.trials,
            "seed": cfg.seed, "batch_size": batch_size}
    return Checkpoint(path, cfg_hash=config_hash(blob))
