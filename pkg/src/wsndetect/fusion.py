"""Set-level stopping times, global stopping/isolation, and the centralized matrix CUSUM.

The functions here step detectors one slot at a time in plain Python. They
define the procedures; the Monte Carlo code runs the compiled equivalents in
``_kernels`` and is checked against these on shared paths.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .detection import RULES, CusumState, LocalRule, cusum_step, local_decision
from .errors import ConfigError, UnsupportedModelError
from .geometry import DetectionPartition, ModelKind, influence_cover_set


@dataclass
class ProcedureOutcome:
    tau: int | None
    isolated_region: int | None
    per_set_tau: dict = field(default_factory=dict)
    horizon: int = 0
    procedure: str = ""

    @property
    def censored(self) -> bool:
        return self.tau is None


def _region_sets(partition) -> list:
    if isinstance(partition, DetectionPartition):
        sets = partition.sets
    else:
        sets = [frozenset(int(s) for s in grp) for grp in partition]
    if not sets:
        raise ConfigError("the partition has no regions")
    return sets


def _check(c: float, horizon: int) -> None:
    if not c > 0:
        raise ConfigError("threshold c must be positive")
    if horizon < 1:
        raise ConfigError("horizon must be at least one slot")


def _first_qualifying(sets, decisions) -> list:
    return [i for i, grp in enumerate(sets, start=1) if all(decisions[s - 1] for s in grp)]


def run_distributed(rule: LocalRule, partition, increments: Iterable, c: float,
                    horizon: int) -> ProcedureOutcome:
    """Run one of MAX/HALL/ALL on a stream of per-slot LLR increment vectors.

    Stops at the first slot where every sensor of some region has local
    decision 1; ties between regions go to the lowest region id.
    """
    rule = LocalRule(rule)
    return run_all_rules(partition, increments, c, horizon, rules=(rule,))[rule]


def run_all_rules(partition, increments: Iterable, c: float, horizon: int,
                  rules: Sequence[LocalRule] = RULES) -> dict:
    """All requested rules on one shared increment path."""
    _check(c, horizon)
    sets = _region_sets(partition)
    rules = [LocalRule(r) for r in rules]
    outcomes = {r: ProcedureOutcome(None, None, {}, horizon, r.value) for r in rules}
    states = None
    for k, z in enumerate(increments, start=1):
        if k > horizon:
            break
        z = np.asarray(z, dtype=float)
        if states is None:
            states = [CusumState(threshold=c) for _ in range(len(z))]
        states = [cusum_step(st, float(v)) for st, v in zip(states, z)]
        pending = False
        for r in rules:
            out = outcomes[r]
            if out.tau is not None:
                continue
            hits = _first_qualifying(sets, [local_decision(st, r) for st in states])
            if hits:
                out.tau = k
                out.isolated_region = hits[0]
                out.per_set_tau = {i: k for i in hits}
            else:
                pending = True
        if not pending:
            break
    return outcomes


def per_set_stopping_times(rule: LocalRule, partition, increments: Iterable, c: float,
                           horizon: int) -> dict:
    """First slot at which each region's sensor set alarms (None if never by the horizon)."""
    _check(c, horizon)
    rule = LocalRule(rule)
    sets = _region_sets(partition)
    taus = {i: None for i in range(1, len(sets) + 1)}
    states = None
    for k, z in enumerate(increments, start=1):
        if k > horizon:
            break
        if states is None:
            states = [CusumState(threshold=c) for _ in range(len(z))]
        states = [cusum_step(st, float(v)) for st, v in zip(states, z)]
        d = [local_decision(st, rule) for st in states]
        for i in _first_qualifying(sets, d):
            if taus[i] is None:
                taus[i] = k
        if all(v is not None for v in taus.values()):
            break
    return taus


def run_centralized_matrix_cusum(partition, increments: Iterable, c: float,
                                 horizon: int) -> ProcedureOutcome:
    """Recursive matrix CUSUM over the N region hypotheses plus no-change.

    ``W[i][j] <- max(0, W[i][j] + ln g_i/g_j)`` where, for the Boolean model,
    ``ln g_i/g_j`` is the LLR sum over region i's sensors minus that over
    region j's (empty for the no-change hypothesis j = 0). Region i alarms
    once its whole row is at or above ``c``.
    """
    _check(c, horizon)
    if isinstance(partition, DetectionPartition) and \
            partition.deployment.model.kind is not ModelKind.BOOLEAN:
        raise UnsupportedModelError("the centralized baseline needs the Boolean sensing model")
    sets = _region_sets(partition)
    n_reg = len(sets)
    w = np.zeros((n_reg, n_reg + 1))
    idx = [np.array(sorted(grp)) - 1 for grp in sets]
    for k, z in enumerate(increments, start=1):
        if k > horizon:
            break
        z = np.asarray(z, dtype=float)
        sums = np.concatenate([[0.0], [z[ix].sum() for ix in idx]])
        hit = None
        for i in range(n_reg):
            row = np.maximum(0.0, w[i] + sums[i + 1] - sums)
            row[i + 1] = 0.0
            w[i] = row
            others = np.delete(row, i + 1)
            if hit is None and others.min() >= c:
                hit = i + 1
        if hit is not None:
            return ProcedureOutcome(k, hit, {hit: k}, horizon, "CENTRALIZED")
    return ProcedureOutcome(None, None, {}, horizon, "CENTRALIZED")


def is_false_isolation(partition: DetectionPartition, event_location, isolated: int) -> bool:
    """True when the isolated region's sensor set is not inside the event's influence cover."""
    cover = influence_cover_set(partition.deployment, partition.ranges, event_location)
    return not partition.region(isolated).sensors <= cover


OUTCOME_COLUMNS = ["trial_id", "rule", "c", "tau", "censored_flag", "isolated_region",
                   "false_isolation_flag"]


def write_outcomes_csv(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=OUTCOME_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in OUTCOME_COLUMNS})
