"""Forest parameters for the three construction modes.

All rounding decisions are made with exact integer comparisons where the
quantity is algebraic, and with 60-digit mpmath evaluation where it is
transcendental (``ln``, ``e``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import mpmath

from .certified import AlgebraicPoint
from .errors import ConfigError

MODES = ("rand-improved", "det", "flat-baseline")
DEFAULT_DELTA = 8

def _mpceil(x) -> int:
    with mpmath.workdps(60):
        return int(mpmath.ceil(x))


@dataclass(frozen=True)
class RpcParams:
    """Parameters of a replacement path covering.

    ``p_num / p_den`` is ``p ** h``: the probability that an edge of ``E`` is
    still removed at a depth-``h`` leaf. Flat-baseline families are recorded
    with ``h = alpha = 1`` and ``K`` subgraphs.
    """

    mode: str
    f: int
    L: int
    h: int
    alpha: int
    K: int
    n_ref: int
    delta: float | None = None
    c: float | None = None
    p_num: int = 1
    p_den: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if min(self.f, self.L, self.h, self.alpha) < 1 or self.K < 0:
            raise ConfigError("need f, L, h, alpha >= 1 and K >= 0")

    @property
    def p_descr(self) -> str:
        if self.mode == "flat-baseline":
            return f"1/{self.L} removal per subgraph"
        return f"({self.p_num}/{self.p_den})^(1/{self.h})"

    @cached_property
    def point(self) -> AlgebraicPoint:
        return AlgebraicPoint(self.p_num, self.p_den, self.h)

    @property
    def p(self) -> float:
        return float(self.point)

    @property
    def leaves_per_tree(self) -> int:
        return self.alpha ** self.h

    @property
    def covering_value(self) -> int:
        return self.K * self.leaves_per_tree if self.mode != "flat-baseline" else self.K

    def threshold(self, d: int) -> int:
        """Largest ``c`` with ``c <= p**d * L``, decided exactly.

        ``c <= p**d L`` iff ``c**h * den**d <= num**d * L**h``.
        """
        return _threshold(self.p_num, self.p_den, self.h, self.L, d)

    def is_well(self, c: int, d: int) -> bool:
        return c ** self.h * self.p_den ** d <= self.p_num ** d * self.L ** self.h

    def with_K(self, K: int) -> "RpcParams":
        return replace(self, K=K)


_thresholds: dict = {}


def _threshold(num, den, h, L, d):
    key = (num, den, h, L, d)
    t = _thresholds.get(key)
    if t is None:
        rhs = num ** d * L ** h
        lhs_scale = den ** d
        t = 0
        while (t + 1) ** h * lhs_scale <= rhs:
            t += 1
        _thresholds[key] = t
    return t


def det_height(f: int, L: int) -> int:
    """``ceil(sqrt(f * log2 L))``: least ``h`` with ``2**(h*h) >= L**f``."""
    h = 1
    while 2 ** (h * h) < L ** f:
        h += 1
    return h


def ceil_root_power(base_num: int, base_den: int, f: int, h: int) -> int:
    """``ceil((base_num/base_den) ** (f/h))``, exactly."""
    target_num, target_den = base_num ** f, base_den ** f
    a = max(1, int(math.floor((base_num / base_den) ** (f / h))) - 1)
    while a ** h * target_den < target_num:
        a += 1
    while a > 1 and (a - 1) ** h * target_den >= target_num:
        a -= 1
    return a


def rand_height(f: int, L: int) -> int:
    """``ceil(sqrt(f * ln(L/f)))``."""
    with mpmath.workdps(60):
        val = mpmath.sqrt(f * mpmath.log(mpmath.mpf(L) / f))
    return max(1, _mpceil(val))


def rand_tree_count(f: int, h: int, n: int, delta) -> int:
    """``ceil(delta * e**f * (e/(e-1))**h * f * ln n)``."""
    with mpmath.workdps(60):
        e = mpmath.e
        val = mpmath.mpf(delta) * e ** f * (e / (e - 1)) ** h * f * mpmath.log(n)
    return max(1, _mpceil(val))


def det_tree_bound(h: int, num_pairs: int) -> int:
    """``ceil(2 * (11/2)**h * ln |C|)``, at least 1 for a nonempty collection."""
    if num_pairs <= 0:
        return 0
    with mpmath.workdps(60):
        val = 2 * (mpmath.mpf(11) / 2) ** h * mpmath.log(num_pairs)
    return max(1, _mpceil(val))


def flat_count(f: int, L: int, n: int, c) -> int:
    """``ceil(c * f * L**f * ln n)``."""
    with mpmath.workdps(60):
        val = mpmath.mpf(c) * f * mpmath.mpf(L) ** f * mpmath.log(n)
    return max(1, _mpceil(val))


def derive_params(f: int, L: int, n: int, mode: str, delta=DEFAULT_DELTA, c=1.0) -> RpcParams:
    """Parameters for ``mode``; det-mode ``K`` is provisional until pairs are known."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    if f < 1:
        raise ConfigError("sensitivity f must be >= 1")
    if n < 2:
        raise ConfigError("vertex count n must be >= 2")
    if mode == "flat-baseline":
        if L < 1:
            raise ConfigError("hop cutoff L must be >= 1")
        if c <= 0:
            raise ConfigError("multiplier c must be positive")
        return RpcParams(mode, f, L, 1, 1, flat_count(f, L, n, c), n, c=c, p_num=1, p_den=L)
    if L < 2:
        raise ConfigError("hop cutoff L must be >= 2")
    if mode == "det":
        h = det_height(f, L)
        alpha = ceil_root_power(2 * L, 1, f, h)
        # K is finalized from |C| by the derandomizer.
        return RpcParams(mode, f, L, h, alpha, 1, n, p_num=1, p_den=2 * L)
    if 2 * f * f > L:
        raise ConfigError(f"rand-improved requires 2f^2 <= L (got f={f}, L={L})")
    h = rand_height(f, L)
    alpha = ceil_root_power(L, f, f, h)
    K = rand_tree_count(f, h, n, delta)
    return RpcParams(mode, f, L, h, alpha, K, n, delta=delta, p_num=f, p_den=L)
