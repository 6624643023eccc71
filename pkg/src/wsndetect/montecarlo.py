"""Monte Carlo estimation of ARL2FA, SADD and PFI.

Every trial draws its observations from its own ``SFC64`` stream, seeded by
``SeedSequence(seed, spawn_key=(scenario, trial))``. A trial's numbers do not
depend on which worker runs it or on how many procedures share its path, so
estimates are reproducible for a given seed regardless of ``workers``.

Stopping times are 1-based slot indices; a stored value of 0 marks a
censored trial (no alarm by the horizon). Detection delay is counted as the
number of post-change samples consumed, ``tau - T + 1``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from . import _kernels
from .detection import RULES, LlrMap, LocalRule
from .errors import ConfigError, DomainError, EstimationError, UnsupportedModelError
from .geometry import (Deployment, DetectionPartition, ModelKind, influence_cover_set, rho,
                       worst_case_point)

CENTRALIZED = "CENTRALIZED"
PROCEDURES = ("MAX", "HALL", "ALL", CENTRALIZED)
PLACEMENTS = ("reference", "worst_case", "influence_boundary")
Z99 = 2.5758293035489004
DEFAULT_RUNS = 10_000
DEFAULT_HORIZON = 10_000_000
DEFAULT_DELAY_HORIZON = 100_000
_FIRST_BLOCK = 32
_MAX_BLOCK = 65536


def normalize_procedure(name) -> str:
    if isinstance(name, LocalRule):
        return name.value
    key = str(name).strip().upper()
    if key in ("NIKIFOROV", "CENTRAL", "MATRIX_CUSUM"):
        key = CENTRALIZED
    if key not in PROCEDURES:
        raise ConfigError(f"unknown procedure {name!r}; expected one of {', '.join(PROCEDURES)}")
    return key


@dataclass(frozen=True)
class Scenario:
    """When and where the event happens for one batch of trials.

    ``distances`` optionally overrides the geometry with an explicit
    sensor-to-event distance per sensor (``inf`` for sensors the event does
    not reach); it is how the equal-distance placement is expressed.
    """

    change_time: float = math.inf
    event_location: tuple | None = None
    seed: int = 0
    horizon: int = DEFAULT_HORIZON
    distances: tuple | None = None

    def __post_init__(self):
        has_event = self.event_location is not None or self.distances is not None
        if math.isfinite(self.change_time):
            if self.change_time < 1 or self.change_time != int(self.change_time):
                raise ConfigError("change_time must be a positive integer slot")
            if not has_event:
                raise ConfigError("a finite change_time needs an event location")
        elif has_event:
            raise ConfigError("an event location needs a finite change_time")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least one slot")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def means(self, dep: Deployment) -> np.ndarray:
        """Post-change mean of every sensor."""
        if self.distances is not None:
            d = np.asarray(self.distances, dtype=float)
            if d.shape != (dep.n,):
                raise ConfigError(f"distance profile needs {dep.n} entries")
            return dep.h_e * np.asarray(rho(dep.model, d), dtype=float)
        if self.event_location is None:
            return np.zeros(dep.n)
        return dep.h_e * np.asarray(rho(dep.model, dep.distances(self.event_location)), dtype=float)


def trial_generator(seed: int, trial: int, scenario: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed), spawn_key=(scenario, trial))))


def gen_observation(dep: Deployment, scenario: Scenario, k: int, s: int, rng: np.random.Generator) -> float:
    """One observation of sensor ``s`` (1-based) at slot ``k``."""
    if k < 1:
        raise DomainError("slots start at 1")
    if not 1 <= s <= dep.n:
        raise DomainError(f"no sensor {s}")
    x = dep.sigma * rng.standard_normal()
    if k >= scenario.change_time:
        x += scenario.means(dep)[s - 1]
    return float(x)


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    ci_low: float
    ci_high: float
    runs: int
    censored: int = 0
    biased_low: bool = False

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("an estimate needs at least one run")
        if not self.ci_low <= self.point <= self.ci_high:
            raise ValueError("confidence interval must contain the point estimate")

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def mean_estimate(values, censored: int = 0, censor_tolerance: float = 0.01) -> EstimateWithCI:
    """Sample mean with a 99% normal-approximation interval."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EstimationError("no samples")
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return EstimateWithCI(mean, mean - Z99 * se, mean + Z99 * se, int(v.size), int(censored),
                          censored > censor_tolerance * v.size)


def proportion_estimate(successes: int, runs: int) -> EstimateWithCI:
    """Proportion with a 99% Wilson interval."""
    if runs < 1:
        raise EstimationError("no samples")
    ci = binomtest(int(successes), int(runs)).proportion_ci(confidence_level=0.99, method="wilson")
    p = successes / runs
    return EstimateWithCI(p, min(float(ci.low), p), max(float(ci.high), p), int(runs))


# ---------------------------------------------------------------------------
# trial engine


@dataclass(frozen=True)
class _Job:
    masks: np.ndarray
    members: np.ndarray
    means: np.ndarray
    sigma: float
    scale: float
    offset: float
    rule_c: np.ndarray
    rule_active: np.ndarray
    central_c: float
    change_time: int
    horizon: int
    seed: int
    scenario: int


def _run_trials(job: _Job, start: int, stop: int):
    n = job.means.shape[0]
    n_regions = job.masks.shape[0]
    count = stop - start
    taus = np.zeros((count, 4), dtype=np.int64)
    labels = np.zeros((count, 4), dtype=np.int64)
    use_rules = bool(job.rule_active.any())
    use_central = job.central_c > 0
    buf = np.empty((_MAX_BLOCK, n))
    for t in range(count):
        gen = trial_generator(job.seed, start + t, job.scenario)
        stat = np.zeros(n)
        crossed = np.zeros((3, n), dtype=np.bool_)
        excursion = np.zeros((3, n), dtype=np.bool_)
        r_tau = np.zeros(3, dtype=np.int64)
        r_lab = np.zeros(3, dtype=np.int64)
        w = np.zeros((n_regions, n_regions + 1))
        out = np.zeros(2, dtype=np.int64)
        rules_done = not use_rules
        central_done = not use_central
        k = 1
        block = _FIRST_BLOCK
        while k <= job.horizon and not (rules_done and central_done):
            size = min(block, job.horizon - k + 1)
            noise = buf[:size]
            gen.standard_normal(out=noise)
            if not rules_done:
                _kernels.advance_distributed(noise, k, job.change_time, job.means, job.sigma,
                                             job.scale, job.offset, job.rule_c, stat, crossed,
                                             excursion, job.masks, job.rule_active, r_tau, r_lab)
                rules_done = bool(np.all(r_tau[job.rule_active] > 0))
            if not central_done:
                _kernels.advance_centralized(noise, k, job.change_time, job.means, job.sigma,
                                             job.scale, job.offset, job.central_c, job.members,
                                             w, out)
                central_done = out[0] > 0
            k += size
            block = min(2 * block, _MAX_BLOCK)
        taus[t, :3] = r_tau
        labels[t, :3] = r_lab
        taus[t, 3] = out[0]
        labels[t, 3] = out[1]
    return taus, labels


def _run_trials_packed(args):
    return _run_trials(*args)


@dataclass(frozen=True)
class TrialBatch:
    """Per-trial stopping slots and isolated regions, columns in ``PROCEDURES`` order."""

    taus: np.ndarray
    labels: np.ndarray
    thresholds: dict

    def column(self, procedure) -> int:
        return PROCEDURES.index(normalize_procedure(procedure))

    def tau(self, procedure) -> np.ndarray:
        return self.taus[:, self.column(procedure)]

    def isolated(self, procedure) -> np.ndarray:
        return self.labels[:, self.column(procedure)]


def _chunks(runs: int, workers: int) -> list:
    pieces = max(1, min(runs, 4 * workers))
    edges = np.linspace(0, runs, pieces + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def simulate(partition: DetectionPartition, thresholds: dict, scenario: Scenario, runs: int,
             workers: int = 1, scenario_index: int = 0) -> TrialBatch:
    """Run ``runs`` trials of every procedure in ``thresholds`` on shared paths.

    ``thresholds`` maps procedure names to their threshold ``c``. A trial
    ends once every procedure has stopped or the horizon is reached.
    """
    if runs < 1:
        raise ConfigError("runs must be positive")
    if not thresholds:
        raise ConfigError("no procedure requested")
    dep = partition.deployment
    ths = {normalize_procedure(p): float(c) for p, c in thresholds.items()}
    for p, c in ths.items():
        if not c > 0:
            raise ConfigError(f"threshold for {p} must be positive")
    if CENTRALIZED in ths and dep.model.kind is not ModelKind.BOOLEAN:
        raise UnsupportedModelError("the centralized baseline needs the Boolean sensing model")
    llr = LlrMap.gaussian(dep.h_e, dep.sigma, rho(dep.model, partition.ranges.r_d))
    rule_c = np.array([ths.get(r.value, 1.0) for r in RULES])
    rule_active = np.array([r.value in ths for r in RULES])
    members = np.zeros((partition.n_regions, dep.n), dtype=np.bool_)
    for i, s in enumerate(partition.sets):
        members[i, np.array(sorted(s)) - 1] = True
    change = scenario.change_time
    job = _Job(partition.masks(), members, scenario.means(dep), float(dep.sigma), llr.scale,
               llr.offset, rule_c, rule_active, ths.get(CENTRALIZED, 0.0),
               int(change) if math.isfinite(change) else np.iinfo(np.int64).max,
               int(scenario.horizon), int(scenario.seed), int(scenario_index))
    parts = [(job, a, b) for a, b in _chunks(runs, workers)]
    if workers > 1 and len(parts) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trials_packed, parts))
    else:
        results = [_run_trials(*p) for p in parts]
    taus = np.concatenate([r[0] for r in results])
    labels = np.concatenate([r[1] for r in results])
    return TrialBatch(taus, labels, ths)


# ---------------------------------------------------------------------------
# ARL2FA


def _arl_from_taus(taus: np.ndarray, horizon: int) -> EstimateWithCI:
    censored = int(np.count_nonzero(taus == 0))
    if censored == len(taus):
        raise EstimationError(f"all {len(taus)} runs reached the horizon of {horizon} slots "
                              "without an alarm; raise the horizon")
    values = np.where(taus == 0, horizon, taus)
    return mean_estimate(values, censored)


def arl2fa_study(partition: DetectionPartition, thresholds: dict, runs: int = DEFAULT_RUNS,
                 horizon: int = DEFAULT_HORIZON, seed: int = 0, workers: int = 1) -> dict:
    """ARL2FA of several procedures estimated on common null paths."""
    if runs < 100:
        raise ConfigError("ARL2FA estimation needs at least 100 runs")
    scen = Scenario(seed=seed, horizon=horizon)
    batch = simulate(partition, thresholds, scen, runs, workers)
    return {p: _arl_from_taus(batch.tau(p), horizon) for p in batch.thresholds}


def estimate_arl2fa(procedure, partition: DetectionPartition, c: float, runs: int = DEFAULT_RUNS,
                    horizon: int = DEFAULT_HORIZON, seed: int = 0, workers: int = 1) -> EstimateWithCI:
    p = normalize_procedure(procedure)
    return arl2fa_study(partition, {p: c}, runs, horizon, seed, workers)[p]


# ---------------------------------------------------------------------------
# post-change scenarios: SADD and PFI


@dataclass(frozen=True)
class EventSite:
    """An event placement inside one region, with the sensors whose influence range covers it."""

    region_id: int
    placement: str
    cover: frozenset
    location: tuple | None = None
    distances: tuple | None = None

    def scenario(self, seed: int, horizon: int) -> Scenario:
        return Scenario(1, self.location, seed, horizon, self.distances)


def event_sites(partition: DetectionPartition, placement: str = "reference") -> list:
    """One event site per region under the given placement policy.

    ``reference`` uses the region's reference point, ``worst_case`` the
    sampled point farthest from the region's own sensors, and
    ``influence_boundary`` puts every sensor of the region at exactly the
    influence range from the event while the rest see nothing.
    """
    if placement not in PLACEMENTS:
        raise ConfigError(f"unknown placement {placement!r}; expected one of {', '.join(PLACEMENTS)}")
    dep, ranges = partition.deployment, partition.ranges
    sites = []
    for region in partition.regions:
        if placement == "influence_boundary":
            d = np.full(dep.n, np.inf)
            d[np.array(sorted(region.sensors)) - 1] = ranges.r_i
            sites.append(EventSite(region.region_id, placement, region.sensors, None, tuple(d)))
            continue
        if placement == "reference":
            loc = tuple(region.reference)
        else:
            loc = worst_case_point(partition, region.region_id)
        sites.append(EventSite(region.region_id, placement, influence_cover_set(dep, ranges, loc), loc))
    return sites


@dataclass(frozen=True)
class SiteResult:
    site: EventSite
    delay: EstimateWithCI
    pfi: EstimateWithCI


@dataclass(frozen=True)
class PostChangeResult:
    """Worst-case delay and false-isolation rate of one procedure over a set of sites."""

    procedure: str
    threshold: float
    sadd: EstimateWithCI
    sadd_region: int
    pfi: EstimateWithCI
    pfi_region: int
    sites: list = field(default_factory=list)


def post_change_study(partition: DetectionPartition, thresholds: dict, sites: Sequence[EventSite],
                      runs: int = DEFAULT_RUNS, seed: int = 0, horizon: int = DEFAULT_DELAY_HORIZON,
                      workers: int = 1) -> dict:
    """Event at slot 1 at each site; shared paths across procedures."""
    if not sites:
        raise ConfigError("no event sites")
    thresholds = {normalize_procedure(p): float(c) for p, c in thresholds.items()}
    per_proc = {p: [] for p in thresholds}
    sets = partition.sets
    for j, site in enumerate(sites):
        batch = simulate(partition, thresholds, site.scenario(seed, horizon), runs, workers,
                         scenario_index=j + 1)
        for p in per_proc:
            taus = batch.tau(p)
            censored = int(np.count_nonzero(taus == 0))
            delays = np.where(taus == 0, horizon, taus)
            delay = mean_estimate(delays, censored)
            labels = batch.isolated(p)
            wrong = np.array([not sets[lab - 1] <= site.cover for lab in range(1, len(sets) + 1)])
            fired = labels > 0
            false_iso = int(np.count_nonzero(wrong[labels[fired] - 1]))
            per_proc[p].append(SiteResult(site, delay, proportion_estimate(false_iso, len(labels))))
    out = {}
    for p, results in per_proc.items():
        worst_delay = max(results, key=lambda r: r.delay.point)
        worst_pfi = max(results, key=lambda r: r.pfi.point)
        out[p] = PostChangeResult(p, thresholds[p], worst_delay.delay, worst_delay.site.region_id,
                                  worst_pfi.pfi, worst_pfi.site.region_id, results)
    return out


def estimate_sadd(procedure, partition: DetectionPartition, c: float, runs: int = DEFAULT_RUNS,
                  seed: int = 0, placement: str = "reference", horizon: int = DEFAULT_DELAY_HORIZON,
                  workers: int = 1) -> EstimateWithCI:
    """Largest mean delay over one event site per region (event at slot 1)."""
    if runs < 100:
        raise ConfigError("SADD estimation needs at least 100 runs")
    p = normalize_procedure(procedure)
    res = post_change_study(partition, {p: c}, event_sites(partition, placement), runs, seed,
                            horizon, workers)
    return res[p].sadd


def estimate_pfi(procedure, partition: DetectionPartition, c: float, runs: int = DEFAULT_RUNS,
                 seed: int = 0, placements: Iterable[str] = ("reference", "worst_case"),
                 horizon: int = DEFAULT_DELAY_HORIZON, workers: int = 1) -> EstimateWithCI:
    """Largest false-isolation frequency over the event sites of the given placements."""
    if runs < 1000:
        raise ConfigError("PFI estimation needs at least 1000 runs")
    p = normalize_procedure(procedure)
    sites = [s for pl in placements for s in event_sites(partition, pl)]
    return post_change_study(partition, {p: c}, sites, runs, seed, horizon, workers)[p].pfi


# ---------------------------------------------------------------------------
# threshold calibration


@dataclass(frozen=True)
class Calibration:
    c: float
    estimate: EstimateWithCI
    evaluations: int


def calibrate_threshold(procedure, partition: DetectionPartition, target_gamma: float,
                        tolerance: float = 0.05, seed: int = 0, lo: float = 0.1, hi: float = 50.0,
                        max_runs: int | None = None, workers: int = 1,
                        max_iter: int = 40) -> Calibration:
    """Threshold whose ARL2FA is within ``tolerance`` (relative) of ``target_gamma``.

    The bracket is widened upward from ``lo`` by doubling (capped at ``hi``)
    and then narrowed by bisection on a log-linear interpolation of the
    estimates. Rough probes use a few hundred runs; candidates near the
    target are re-estimated with enough runs that the relative standard
    error is about a third of the tolerance.
    """
    if not target_gamma > 1:
        raise DomainError("target ARL2FA must exceed 1")
    if not 0 < tolerance < 1:
        raise ConfigError("tolerance must lie in (0, 1)")
    p = normalize_procedure(procedure)
    full = max(200, int(math.ceil((3.0 / tolerance) ** 2)))
    if max_runs is not None:
        full = max(100, min(full, int(max_runs)))
    rough = min(full, 200)
    horizon = int(max(1000, 50 * target_gamma))
    evals = 0

    def arl(c, runs):
        nonlocal evals
        evals += 1
        batch = simulate(partition, {p: c}, Scenario(seed=seed + evals, horizon=horizon), runs, workers)
        taus = batch.tau(p)
        if np.count_nonzero(taus == 0) > runs // 2:
            # most runs outlive the horizon: far above target
            return None
        return _arl_from_taus(taus, horizon)

    def log_ratio(est):
        return math.inf if est is None else math.log(est.point / target_gamma)

    lo_est = arl(lo, rough)
    if log_ratio(lo_est) >= 0:
        raise EstimationError(f"bracket failure: ARL2FA at c={lo} is already "
                              f"{lo_est.point:.4g} >= target {target_gamma:g}")
    a, fa = lo, log_ratio(lo_est)
    b = min(hi, max(2 * lo, math.log(target_gamma)))
    while True:
        fb = log_ratio(arl(b, rough))
        if fb >= 0:
            break
        if b >= hi:
            raise EstimationError(f"bracket failure: ARL2FA at c={lo} is {lo_est.point:.4g} and at "
                                  f"c={hi} is {math.exp(fb) * target_gamma:.4g}, "
                                  f"both below target {target_gamma:g}")
        a, fa = b, fb
        b = min(hi, 2 * b)
    best = None
    for _ in range(max_iter):
        width = b - a
        if math.isfinite(fb):
            c = a + width * (-fa) / (fb - fa)
            c = min(max(c, a + 0.1 * width), b - 0.1 * width)
        else:
            c = 0.5 * (a + b)
        est = arl(c, rough)
        f = log_ratio(est)
        if est is not None and abs(f) < 3 * tolerance:
            est = arl(c, full)
            f = log_ratio(est)
            if best is None or abs(f) < abs(log_ratio(best[1])):
                best = (c, est)
            if abs(est.point - target_gamma) <= tolerance * target_gamma:
                return Calibration(c, est, evals)
        if f < 0:
            a, fa = c, f
        else:
            b, fb = c, f
        if b - a < 1e-4:
            break
    if best is None:
        raise EstimationError(f"calibration did not converge; last bracket [{a:.4g}, {b:.4g}]")
    return Calibration(best[0], best[1], evals)


# ---------------------------------------------------------------------------
# single-sensor checks


def cusum_first_crossing(mean: float, c: float, runs: int, horizon: int, seed: int = 0,
                         scale: float = 1.0, offset: float = 0.5, sigma: float = 1.0) -> np.ndarray:
    """First slot each of ``runs`` independent CUSUMs reaches ``c``; 0 when censored.

    Observations are ``mean + sigma * N(0, 1)`` from slot 1 on.
    """
    gen = np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed))))
    stat = np.zeros(runs)
    hit = np.zeros(runs, dtype=np.int64)
    alive = np.arange(runs)
    k = 0
    block = 256
    while alive.size and k < horizon:
        size = min(block, horizon - k)
        z = scale * (mean + sigma * gen.standard_normal((size, alive.size)) - offset)
        s = stat[alive]
        first = np.zeros(alive.size, dtype=np.int64)
        for j in range(size):
            s = np.maximum(0.0, s + z[j])
            newly = (first == 0) & (s >= c)
            first[newly] = k + j + 1
        stat[alive] = s
        done = first > 0
        hit[alive[done]] = first[done]
        alive = alive[~done]
        k += size
    return hit


def cusum_tail_probabilities(mean: float, cs, ts, runs: int, seed: int = 0, scale: float = 1.0,
                             offset: float = 0.5, sigma: float = 1.0) -> dict:
    """Estimates of ``P{C_t >= c}`` for every ``(c, t)`` pair, from one set of paths."""
    cs = [float(c) for c in cs]
    ts = sorted({int(t) for t in ts})
    if not ts or ts[0] < 1:
        raise DomainError("times must be positive slots")
    gen = np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed))))
    stat = np.zeros(runs)
    out = {}
    for k in range(1, ts[-1] + 1):
        stat = np.maximum(0.0, stat + scale * (mean + sigma * gen.standard_normal(runs) - offset))
        if k in ts:
            for c in cs:
                out[(c, k)] = proportion_estimate(int(np.count_nonzero(stat >= c)), runs)
    return out


def cusum_tail_probability(mean: float, c: float, t: int, runs: int, seed: int = 0,
                           scale: float = 1.0, offset: float = 0.5, sigma: float = 1.0) -> EstimateWithCI:
    """Estimate of ``P{C_t >= c}`` for a CUSUM started at zero."""
    return cusum_tail_probabilities(mean, [c], [t], runs, seed, scale, offset, sigma)[(float(c), int(t))]


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class TableRow:
    procedure: str
    c: float
    target: float


@dataclass
class TableResult:
    row: TableRow
    runs: int
    arl2fa: EstimateWithCI | None = None
    post: PostChangeResult | None = None
    pfi: EstimateWithCI | None = None


TABLE_COLUMNS = ["rule", "runs", "c", "target", "ci_low", "ci_high", "sadd", "sadd_ci_low",
                 "sadd_ci_high", "arl2fa", "censored", "sadd_region", "pfi", "pfi_ci_low",
                 "pfi_ci_high", "warnings"]
CURVE_COLUMNS = ["rule", "log10_arl2fa", "sadd"]


def _groups(rows: Sequence[TableRow]) -> list:
    """Split rows into groups with at most one row per procedure, keeping target groups together."""
    groups = []
    for row in sorted(rows, key=lambda r: (r.target, PROCEDURES.index(r.procedure))):
        for g in groups:
            if g[0].target == row.target and all(x.procedure != row.procedure for x in g):
                g.append(row)
                break
        else:
            groups.append([row])
    return groups


def run_table(partition: DetectionPartition, rows: Sequence[TableRow], runs: int = DEFAULT_RUNS,
              seed: int = 0, horizon: int = DEFAULT_HORIZON,
              delay_horizon: int = DEFAULT_DELAY_HORIZON, placement: str = "reference",
              pfi_placements: Sequence[str] = ("reference", "worst_case"), metrics=("arl2fa", "sadd", "pfi"),
              workers: int = 1, share_paths: bool = True) -> list:
    """Estimate the requested metrics for every row.

    With ``share_paths`` the rows of one target share simulated paths
    (each row is still a valid estimate on its own). PFI is the largest of
    the post-change false-isolation rate at the delay sites and the
    ``pfi_placements`` sites.
    """
    rows = [TableRow(normalize_procedure(r.procedure), float(r.c), float(r.target)) for r in rows]
    results = {r: TableResult(r, runs) for r in rows}
    groups = _groups(rows) if share_paths else [[r] for r in rows]
    for gi, group in enumerate(groups):
        ths = {r.procedure: r.c for r in group}
        gseed = seed + 1000 * gi if not share_paths else seed + gi
        if "arl2fa" in metrics:
            arl = arl2fa_study(partition, ths, runs, horizon, gseed, workers)
            for r in group:
                results[r].arl2fa = arl[r.procedure]
        if "sadd" in metrics or "pfi" in metrics:
            post = post_change_study(partition, ths, event_sites(partition, placement), runs,
                                     gseed, delay_horizon, workers)
            extra = {}
            if "pfi" in metrics:
                sites = [s for pl in pfi_placements if pl != placement for s in event_sites(partition, pl)]
                if sites:
                    extra = post_change_study(partition, ths, sites, runs, gseed + 500, delay_horizon, workers)
            for r in group:
                results[r].post = post[r.procedure]
                pfi = post[r.procedure].pfi
                if r.procedure in extra and extra[r.procedure].pfi.point > pfi.point:
                    pfi = extra[r.procedure].pfi
                results[r].pfi = pfi
    return [results[r] for r in rows]


def table_rows(results: Iterable[TableResult]) -> list:
    out = []
    for res in results:
        warn = []
        row = {"rule": res.row.procedure, "runs": res.runs, "c": res.row.c, "target": res.row.target}
        if res.arl2fa is not None:
            row.update(arl2fa=res.arl2fa.point, ci_low=res.arl2fa.ci_low, ci_high=res.arl2fa.ci_high,
                       censored=res.arl2fa.censored)
            if res.arl2fa.biased_low:
                warn.append("arl2fa_biased_low")
        if res.post is not None:
            row.update(sadd=res.post.sadd.point, sadd_ci_low=res.post.sadd.ci_low,
                       sadd_ci_high=res.post.sadd.ci_high, sadd_region=res.post.sadd_region)
            if res.post.sadd.censored:
                warn.append("sadd_censored")
        if res.pfi is not None:
            row.update(pfi=res.pfi.point, pfi_ci_low=res.pfi.ci_low, pfi_ci_high=res.pfi.ci_high)
        row["warnings"] = ";".join(warn)
        out.append(row)
    return out


def curve_rows(results: Iterable[TableResult]) -> list:
    out = []
    for res in results:
        if res.arl2fa is None or res.post is None:
            continue
        out.append({"rule": res.row.procedure, "log10_arl2fa": math.log10(res.arl2fa.point),
                    "sadd": res.post.sadd.point})
    return out


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns))
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v
