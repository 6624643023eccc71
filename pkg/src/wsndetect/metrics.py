"""Closed-form constants and asymptotic bounds for ARL2FA, PFI and SADD."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from .detection import LocalRule
from .errors import BoundNotApplicable, ConfigError, DomainError
from .geometry import Deployment, DetectionPartition, ModelKind, RangeParams, rho

DEFAULT_DELTA = 0.01


def kl_gaussian(mu: float, sigma: float) -> float:
    """KL(N(mu, sigma^2) || N(0, sigma^2))."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return mu * mu / (2.0 * sigma * sigma)


def kl_unit(partition_or_dep, ranges: RangeParams | None = None) -> float:
    """Per-sensor KL(f1(.; r_d), f0) for a partition (or a deployment plus ranges)."""
    if isinstance(partition_or_dep, DetectionPartition):
        dep, ranges = partition_or_dep.deployment, partition_or_dep.ranges
    else:
        dep = partition_or_dep
    return kl_gaussian(dep.h_e * rho(dep.model, ranges.r_d), dep.sigma)


def kl_between_hypotheses(partition: DetectionPartition, i: int, j: int, kl_unit: float) -> float:
    """KL(g_i, g_j) for the Boolean model: symmetric-difference size times the unit KL."""
    a = partition.region(i).sensors
    b = partition.region(j).sensors
    return len(a ^ b) * kl_unit


def minimal_set_constant(partition) -> tuple:
    """``(m, family)``: inclusion-minimal regions and the smallest count of sensors
    private to one of them within that family."""
    sets = _sets(partition)
    family = [i for i, a in enumerate(sets, start=1)
              if not any(b < a for b in sets)]
    best = None
    for i in family:
        others = set()
        for j in family:
            if j != i:
                others |= sets[j - 1]
        size = len(sets[i - 1] - others)
        best = size if best is None else min(best, size)
    return best, frozenset(family)


def _sets(partition) -> list:
    if isinstance(partition, DetectionPartition):
        return partition.sets
    return [frozenset(g) for g in partition]


@dataclass(frozen=True)
class Violation:
    """One (true region, influence cover, wrongly isolated region) triple."""

    region: int
    cover: frozenset
    isolated: int
    missing: int


def violating_pairs(partition: DetectionPartition) -> list:
    """Every (i, cover, j) with region j's set not inside the event's influence cover.

    Boolean: the cover of any event in region i is region i's set. Path-loss:
    covers are evaluated at the region's grid samples, and each distinct
    cover is kept once.
    """
    sets = partition.sets
    dep, ranges = partition.deployment, partition.ranges
    out = []
    for region in partition.regions:
        if dep.model.kind is ModelKind.BOOLEAN:
            covers = {region.sensors}
        else:
            pts = region.points
            d = np.hypot(pts[:, None, 0] - dep.sensors[None, :, 0],
                         pts[:, None, 1] - dep.sensors[None, :, 1])
            inside = d <= ranges.r_i
            codes = {tuple(row) for row in inside}
            covers = {frozenset(int(s) + 1 for s in np.nonzero(row)[0]) for row in codes}
        for cover in sorted(covers, key=sorted):
            for j, nj in enumerate(sets, start=1):
                if not nj <= cover:
                    out.append(Violation(region.region_id, cover, j, len(nj - cover)))
    return out


def pfi_constants(partition: DetectionPartition) -> tuple:
    """``(m, m_bar)``: min and max of ``|N_j minus N(l_e)|`` over false-isolation pairs.

    Returns ``(None, None)`` when no false isolation is possible.
    """
    pairs = violating_pairs(partition)
    if not pairs:
        return None, None
    sizes = [p.missing for p in pairs]
    return min(sizes), max(sizes)


@dataclass(frozen=True)
class BoundConstants:
    m_arl: int
    minimal_family: frozenset
    m_pfi: int | None
    m_bar_pfi: int | None
    xi: float
    omega0_lower: float
    n: int
    n_min: int
    kl_unit: float
    delta: float
    a: dict
    b: dict
    B: dict
    boolean: bool

    def a_for(self, rule) -> float:
        return self.a[_rule_key(rule)]

    def b_for(self, rule) -> float:
        return self.b[_rule_key(rule)]


def _rule_key(rule) -> str:
    return LocalRule(rule).value


def bound_constants(partition: DetectionPartition, delta: float = DEFAULT_DELTA) -> BoundConstants:
    if not delta > 0:
        raise ConfigError("delta must be positive")
    dep = partition.deployment
    boolean = dep.model.kind is ModelKind.BOOLEAN
    xi = 2.0 if boolean else 1.0
    omega = 1.0 if boolean else partition.ranges.omega0_lower
    n = dep.n
    alpha = kl_unit(partition)
    m_arl, family = minimal_set_constant(partition)
    pairs = violating_pairs(partition)
    m_pfi, m_bar = pfi_constants(partition)
    n_min = min(len(s) for s in partition.sets)

    a = {"MAX": 1.0 - delta, "HALL": 1.0 - delta, "ALL": m_arl - delta}
    if m_pfi is None:
        b = {k: math.inf for k in ("MAX", "HALL", "ALL")}
        B = {k: math.inf for k in ("MAX", "HALL", "ALL")}
    else:
        lead = m_pfi * xi * omega / 2.0
        b = {"MAX": lead - (1.0 + m_bar) / n, "HALL": lead - (1.0 + m_bar) / n, "ALL": lead - 1.0 / n}
        sizes = {p.region: len(partition.region(p.region).sensors) for p in pairs}
        a_max = min(alpha ** (1 + p.missing) for p in pairs)
        a_hall = min((alpha * sizes[p.region]) ** (1 + p.missing) for p in pairs)
        if boolean:
            B = {"ALL": n_min * alpha, "MAX": a_max, "HALL": a_hall}
        else:
            q = math.exp(-alpha * omega * omega / 4.0)
            geo = q / (1.0 - q)
            K = max(geo ** p.missing for p in pairs)
            B = {"ALL": alpha * n_min / K, "MAX": a_max / K, "HALL": a_hall / K}
    return BoundConstants(m_arl, family, m_pfi, m_bar, xi, omega, n, n_min, alpha, delta, a, b, B, boolean)


@dataclass(frozen=True)
class Bound:
    value: float
    exponent: float
    vacuous: bool
    applicable: bool = True


def arl2fa_lower_bound(rule, c: float, constants: BoundConstants) -> Bound:
    """``exp(a_rule c)``, the ARL2FA lower bound with its (1 + o(1)) factor dropped."""
    if c < 0:
        raise DomainError("threshold must be non-negative")
    a = constants.a_for(rule)
    return Bound(math.exp(a * c), a, a <= 0)


def pfi_upper_bound(rule, c: float, constants: BoundConstants) -> Bound:
    """``exp(-b_rule c) / B_rule``; flagged vacuous when ``b_rule <= 0``."""
    if c < 0:
        raise DomainError("threshold must be non-negative")
    if constants.m_pfi is None:
        return Bound(0.0, math.inf, False, applicable=False)
    b = constants.b_for(rule)
    B = constants.B[_rule_key(rule)]
    return Bound(math.exp(-b * c) / B, b, b <= 0)


def sadd_upper_bound(c: float, kl_unit: float) -> float:
    if not kl_unit > 0:
        raise DomainError("KL divergence must be positive")
    return c / kl_unit


def threshold_for_targets(gamma: float, alpha: float, constants: BoundConstants, rule) -> float:
    """``max(ln gamma / a, -ln alpha / b)`` for the given rule."""
    if not gamma > 1:
        raise DomainError("gamma must exceed 1")
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    a = constants.a_for(rule)
    b = constants.b_for(rule)
    if a <= 0:
        raise BoundNotApplicable(f"a_{_rule_key(rule)} = {a:.4g} <= 0; calibrate the threshold by simulation")
    if b <= 0:
        raise BoundNotApplicable(f"b_{_rule_key(rule)} = {b:.4g} <= 0; calibrate the threshold by simulation")
    return max(math.log(gamma) / a, -math.log(alpha) / b)


def sadd_target_bound(gamma: float, alpha: float, constants: BoundConstants, rule) -> float:
    """First-order SADD bound at the threshold chosen for (gamma, alpha)."""
    return threshold_for_targets(gamma, alpha, constants, rule) / constants.kl_unit


def centralized_sadd_bound(gamma: float, alpha: float, partition: DetectionPartition) -> float:
    """Asymptotic SADD of the optimal centralized procedure (Boolean model)."""
    unit = kl_unit(partition)
    sets = partition.sets
    a_star = min(len(s) for s in sets)
    diffs = [len(si ^ sj) for si in sets for sj in sets if not sj <= si]
    terms = [math.log(gamma) / a_star]
    if diffs:
        terms.append(-math.log(alpha) / min(diffs))
    return max(terms) / unit


def mean_drift(dep: Deployment, ranges: RangeParams, d: float) -> float:
    """Mean of the CUSUM increment at a sensor a distance ``d`` from the event."""
    rd = rho(dep.model, ranges.r_d)
    mu = dep.h_e * rd
    return mu * mu / (2.0 * dep.sigma**2) * (2.0 * rho(dep.model, d) / rd - 1.0)


def escape_time_lower_bound(c: float, d: float, dep: Deployment, ranges: RangeParams) -> float:
    """``exp(omega0 c)`` with ``omega0 = 1 - 2 rho(d) / rho(r_d)``; needs a negative drift."""
    rd = rho(dep.model, ranges.r_d)
    ratio = rho(dep.model, d) / rd
    if not 2.0 * ratio < 1.0:
        raise DomainError("the escape-time bound needs 2 rho(d) < rho(r_d)")
    return math.exp((1.0 - 2.0 * ratio) * c)


def tail_bound(c: float, omega0_lower: float, kl_unit: float) -> float:
    """Bound on P{C_t >= c} for a sensor outside the influence range of the event."""
    q = math.exp(-kl_unit * omega0_lower**2 / 4.0)
    return math.exp(-omega0_lower * c / 2.0) * q / (1.0 - q)


BOUND_COLUMNS = ["rule", "c", "a", "b", "arl2fa_bound", "pfi_bound", "sadd_bound", "vacuous_flags"]


def bound_rows(constants: BoundConstants, rules: Iterable, thresholds: Iterable) -> list:
    rows = []
    for rule in rules:
        for c in thresholds:
            arl = arl2fa_lower_bound(rule, c, constants)
            pfi = pfi_upper_bound(rule, c, constants)
            flags = []
            if arl.vacuous:
                flags.append("arl2fa")
            if pfi.vacuous:
                flags.append("pfi")
            if not pfi.applicable:
                flags.append("pfi_not_applicable")
            rows.append({
                "rule": _rule_key(rule), "c": c, "a": arl.exponent, "b": pfi.exponent,
                "arl2fa_bound": arl.value, "pfi_bound": pfi.value,
                "sadd_bound": sadd_upper_bound(c, constants.kl_unit),
                "vacuous_flags": ";".join(flags),
            })
    return rows


def write_bounds_csv(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BOUND_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row)
