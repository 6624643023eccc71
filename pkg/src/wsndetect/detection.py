"""Per-sensor CUSUM and the MAX / HALL / ALL local decision rules."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import DomainError


class LocalRule(str, Enum):
    MAX = "MAX"
    HALL = "HALL"
    ALL = "ALL"

    @property
    def index(self) -> int:
        # column order shared with the simulation kernels
        return _RULE_INDEX[self]


_RULE_INDEX = {LocalRule.MAX: 0, LocalRule.HALL: 1, LocalRule.ALL: 2}
RULES = (LocalRule.MAX, LocalRule.HALL, LocalRule.ALL)


@dataclass(frozen=True)
class LlrMap:
    """Affine Gaussian log-likelihood ratio ``scale * (x - offset)``.

    Built for the mean-shift pair N(0, sigma^2) vs N(mu, sigma^2) with
    ``mu = h_e * rho(r_d)``.
    """

    scale: float
    offset: float

    @classmethod
    def gaussian(cls, h_e: float, sigma: float, rho_rd: float) -> "LlrMap":
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        mu = h_e * rho_rd
        return cls(mu / sigma**2, mu / 2.0)

    def __call__(self, x):
        if np.ndim(x):
            return self.scale * (np.asarray(x, dtype=float) - self.offset)
        return self.scale * (float(x) - self.offset)


def llr(x, h_e: float, sigma: float, rho_rd: float):
    """``ln f1(x; r_d) / f0(x)`` for f0 = N(0, sigma^2), f1 = N(h_e rho(r_d), sigma^2)."""
    return LlrMap.gaussian(h_e, sigma, rho_rd)(x)


@dataclass(frozen=True)
class CusumState:
    c_stat: float = 0.0
    crossed_once: bool = False
    in_excursion: bool = False
    threshold: float = 1.0

    def __post_init__(self):
        if self.c_stat < 0:
            raise DomainError("CUSUM statistic cannot be negative")
        if not self.threshold > 0:
            raise DomainError("threshold must be positive")
        if self.in_excursion and not self.crossed_once:
            raise DomainError("an excursion implies an earlier crossing")


def cusum_step(state: CusumState, z: float) -> CusumState:
    c = max(0.0, state.c_stat + z)
    above = c >= state.threshold
    if above:
        exc = True
    elif c == 0.0:
        exc = False
    else:
        exc = state.in_excursion
    return replace(state, c_stat=c, crossed_once=state.crossed_once or above, in_excursion=exc)


def local_decision(state: CusumState, rule: LocalRule) -> int:
    rule = LocalRule(rule)
    if rule is LocalRule.MAX:
        return int(state.crossed_once)
    if rule is LocalRule.HALL:
        return int(state.in_excursion)
    return int(state.c_stat >= state.threshold)


def cusum_path(z, threshold: float) -> list:
    """States after each increment of ``z``, starting from the zero state."""
    state = CusumState(threshold=threshold)
    out = []
    for v in z:
        state = cusum_step(state, float(v))
        out.append(state)
    return out
