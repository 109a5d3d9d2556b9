"""Popularity profiles and the demand / side-information probability model.

Message indices in this module are 1-based positions in the *sorted*
profile (position 1 is the most popular message).  ``PopularityProfile``
keeps the permutation back to caller-supplied ids.

All probabilities are exact ``fractions.Fraction`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ConfigurationError, EnumerationLimitError
from .field import is_prime, next_prime

DEFAULT_ENUMERATION_LIMIT = 10**7
QUANTIZATION_DENOMINATOR = 2**32

# Above this many distinct subset sums the dense table gives way to a dict.
_DENSE_SUM_LIMIT = 2_000_000


@dataclass(frozen=True)
class PopularityProfile:
    """Sorted popularity weights.

    ``lambdas[p]`` is the weight at sorted position ``p + 1``;
    ``original_index[p]`` is the caller's 1-based id for that message.
    """

    lambdas: tuple[Fraction, ...]
    original_index: tuple[int, ...]

    def __post_init__(self):
        K = len(self.lambdas)
        if K == 0:
            raise ValueError("profile must contain at least one message")
        if any(lam <= 0 for lam in self.lambdas):
            raise ValueError("popularities must be strictly positive")
        if any(a < b for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise ValueError("lambdas must be sorted non-increasing")
        if sorted(self.original_index) != list(range(1, K + 1)):
            raise ValueError("original_index must be a permutation of 1..K")

    @classmethod
    def from_values(cls, values: Iterable[Union[int, str, Fraction, float]]) -> PopularityProfile:
        """Build from caller-ordered weights (message id i = position i).

        Sorting is stable, so equal weights keep caller order.
        """
        lams = [Fraction(v) for v in values]
        order = sorted(range(len(lams)), key=lambda i: -lams[i])
        return cls(tuple(lams[i] for i in order), tuple(i + 1 for i in order))

    @classmethod
    def uniform(cls, K: int) -> PopularityProfile:
        return cls((Fraction(1),) * K, tuple(range(1, K + 1)))

    @property
    def K(self) -> int:
        return len(self.lambdas)

    def __getitem__(self, i: int) -> Fraction:
        """Weight at 1-based sorted position ``i``."""
        if not 1 <= i <= self.K:
            raise IndexError(f"message index {i} outside [1, {self.K}]")
        return self.lambdas[i - 1]

    def is_uniform(self) -> bool:
        return self.lambdas[0] == self.lambdas[-1]

    def sorted_position(self, caller_id: int) -> int:
        return self.original_index.index(caller_id) + 1


@dataclass(frozen=True)
class ProblemParams:
    K: int
    M: int
    q: int | None = None
    n: int = 1

    def __post_init__(self):
        if self.K < 2:
            raise ConfigurationError("need at least two messages")
        if not 1 <= self.M <= self.K - 1:
            raise ConfigurationError(f"M must lie in [1, K-1], got M={self.M}, K={self.K}")
        if self.n < 1:
            raise ConfigurationError("message length n must be >= 1")
        if self.q is None:
            object.__setattr__(self, "q", next_prime(self.K))
        if not is_prime(self.q):
            raise ConfigurationError(f"q={self.q} is not prime")
        if self.q < self.K:
            raise ConfigurationError(f"q={self.q} is smaller than K={self.K}")

    @property
    def N(self) -> int:
        """Number of parts in a Partition-and-Code query (when defined)."""
        return self.K // (self.M + 1)

    def rcs_supported(self) -> bool:
        size = self.M + 1
        return self.K % size == 0 and size * size < self.K

    def require_rcs(self) -> None:
        size = self.M + 1
        if self.K % size:
            raise ConfigurationError(f"M+1={size} does not divide K={self.K}")
        if size * size >= self.K:
            raise ConfigurationError(f"(M+1)^2={size * size} must be strictly less than K={self.K}")


@dataclass(frozen=True)
class DemandRealization:
    W: int
    S: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "S", frozenset(self.S))
        if self.W in self.S:
            raise ValueError("demand index cannot be part of the side information")


def _check_indices(K: int, indices: Iterable[int]) -> None:
    for i in indices:
        if not 1 <= i <= K:
            raise IndexError(f"message index {i} outside [1, {K}]")


# --------------------------------------------------------------------------
# Exact demand model


def _scaled_weights(lambdas: Sequence[Fraction]) -> tuple[int, ...]:
    scale = math.lcm(*(lam.denominator for lam in lambdas))
    ints = [int(lam * scale) for lam in lambdas]
    g = math.gcd(*ints)
    return tuple(v // g for v in ints)


def _subset_sum_counts(weights: Sequence[int], M: int) -> dict[int, int]:
    """Multiplicity of each value of sum(T) over all M-subsets T of ``weights``."""
    top = sum(sorted(weights, reverse=True)[:M])
    if top <= _DENSE_SUM_LIMIT:
        layers = [np.zeros(top + 1, dtype=np.int64) for _ in range(M + 1)]
        layers[0][0] = 1
        for k, w in enumerate(weights):
            for m in range(min(k + 1, M), 0, -1):
                if w:
                    layers[m][w:] += layers[m - 1][: top + 1 - w]
                else:
                    layers[m] += layers[m - 1]
        (nz,) = np.nonzero(layers[M])
        return {int(s): int(layers[M][s]) for s in nz}
    layers: list[dict[int, int]] = [{0: 1}] + [{} for _ in range(M)]
    for k, w in enumerate(weights):
        for m in range(min(k + 1, M), 0, -1):
            dst = layers[m]
            for s, c in layers[m - 1].items():
                dst[s + w] = dst.get(s + w, 0) + c
    return layers[M]


class DemandModel:
    """Exact joint law of (W, S) for one profile and side-information size M.

    The marginal of W needs a sum over all M-subsets of the other messages.
    Those subsets only enter through their weight sum, so they are aggregated
    by sum first; the result is exact and identical to direct enumeration.
    """

    def __init__(self, profile: PopularityProfile, M: int, limit: int = DEFAULT_ENUMERATION_LIMIT):
        if not 1 <= M <= profile.K - 1:
            raise ConfigurationError(f"M must lie in [1, K-1], got M={M}, K={profile.K}")
        self.profile = profile
        self.K = profile.K
        self.M = M
        self.limit = limit
        self.n_subsets = math.comb(self.K, M)
        self._w = _scaled_weights(profile.lambdas)
        self._total = sum(self._w)
        self._inv_sums: dict[int, Fraction] = {}

    def lambda_bar(self, T: Iterable[int]) -> Fraction:
        T = set(T)
        _check_indices(self.K, T)
        return sum((lam for i, lam in enumerate(self.profile.lambdas, 1) if i not in T), Fraction(0))

    def _scaled_bar(self, S: Iterable[int]) -> int:
        return self._total - sum(self._w[i - 1] for i in S)

    def inverse_sum(self, w: int) -> Fraction:
        """sum over M-subsets T of [K]\\{w} of 1 / lambda_bar(T), in scaled units."""
        if w not in self._inv_sums:
            _check_indices(self.K, (w,))
            if math.comb(self.K - 1, self.M) > self.limit:
                raise EnumerationLimitError(
                    f"C({self.K - 1},{self.M}) subsets exceed enumeration limit {self.limit}"
                )
            others = self._w[: w - 1] + self._w[w:]
            counts = _subset_sum_counts(others, self.M)
            total = self._total
            self._inv_sums[w] = sum(
                (Fraction(c, total - s) for s, c in counts.items()), Fraction(0)
            )
        return self._inv_sums[w]

    def pmf_W(self, w: int) -> Fraction:
        return self._w[w - 1] * self.inverse_sum(w) / self.n_subsets

    def pmf_W_given_S(self, w: int, S: Iterable[int]) -> Fraction:
        S = frozenset(S)
        _check_indices(self.K, S | {w})
        if w in S or len(S) != self.M:
            return Fraction(0)
        return Fraction(self._w[w - 1], self._scaled_bar(S))

    def joint(self, w: int, S: Iterable[int]) -> Fraction:
        return self.pmf_W_given_S(w, S) / self.n_subsets

    def joint_over_marginal(self, w: int, S: Iterable[int]) -> Fraction:
        """p(W=w, S) / p(W=w) = 1 / (lambda_bar(S) * inverse_sum(w))."""
        S = frozenset(S)
        if w in S:
            return Fraction(0)
        return 1 / (self._scaled_bar(S) * self.inverse_sum(w))


@lru_cache(maxsize=256)
def demand_model(profile: PopularityProfile, M: int, limit: int = DEFAULT_ENUMERATION_LIMIT) -> DemandModel:
    return DemandModel(profile, M, limit)


def lambda_bar(profile: PopularityProfile, T: Iterable[int]) -> Fraction:
    """Total popularity of the messages outside ``T``."""
    T = set(T)
    _check_indices(profile.K, T)
    return sum((lam for i, lam in enumerate(profile.lambdas, 1) if i not in T), Fraction(0))


def pmf_S(params: ProblemParams) -> Fraction:
    return Fraction(1, math.comb(params.K, params.M))


def pmf_W_given_S(profile: PopularityProfile, W: int, S: Iterable[int]) -> Fraction:
    S = frozenset(S)
    _check_indices(profile.K, S | {W})
    if W in S:
        return Fraction(0)
    return profile[W] / lambda_bar(profile, S)


def joint_pmf(profile: PopularityProfile, W: int, S: Iterable[int]) -> Fraction:
    S = frozenset(S)
    if W in S:
        return Fraction(0)
    return Fraction(1, math.comb(profile.K, len(S))) * pmf_W_given_S(profile, W, S)


def pmf_W(profile: PopularityProfile, W: int, M: int, limit: int = DEFAULT_ENUMERATION_LIMIT) -> Fraction:
    return demand_model(profile, M, limit).pmf_W(W)


# --------------------------------------------------------------------------
# Profile sources


@dataclass(frozen=True)
class Zipf:
    N: int = 100
    s: float = 1.0
    label = "zipf"


@dataclass(frozen=True)
class Gamma:
    shape: float = 0.62
    scale: float = 31.22
    label = "gamma"


@dataclass(frozen=True)
class Weibull:
    shape: float = 0.79
    scale: float = 16.80
    label = "weibull"


@dataclass(frozen=True)
class Uniform:
    label = "uniform"


@dataclass(frozen=True)
class Explicit:
    values: tuple[Fraction, ...] = field(default_factory=tuple)
    label = "explicit"


Distribution = Union[Zipf, Gamma, Weibull, Uniform, Explicit]


def zipf_cdf(N: int, s: float) -> np.ndarray:
    weights = np.arange(1, N + 1, dtype=float) ** (-s)
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def _quantize(x: float) -> Fraction:
    return Fraction(int(round(x * QUANTIZATION_DENOMINATOR)), QUANTIZATION_DENOMINATOR)


def sample_profile(dist: Distribution, K: int, seed=None) -> PopularityProfile:
    """Draw K i.i.d. popularities from ``dist`` and sort them.

    ``seed`` is anything accepted by ``numpy.random.default_rng``.
    Continuous draws are rounded to multiples of 2**-32; a draw that rounds
    to zero is redrawn.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    rng = np.random.default_rng(seed)
    if isinstance(dist, Uniform):
        return PopularityProfile.uniform(K)
    if isinstance(dist, Explicit):
        if len(dist.values) != K:
            raise ValueError(f"explicit profile has {len(dist.values)} values, expected {K}")
        return PopularityProfile.from_values(dist.values)
    if isinstance(dist, Zipf):
        if dist.N < 1 or dist.s <= 0:
            raise ValueError("Zipf needs N >= 1 and s > 0")
        cdf = zipf_cdf(dist.N, dist.s)
        idx = np.searchsorted(cdf, rng.random(K), side="right")
        values = [Fraction(int(min(i, dist.N - 1)) + 1) for i in idx]
        return PopularityProfile.from_values(values)
    if isinstance(dist, (Gamma, Weibull)):
        if dist.shape <= 0 or dist.scale <= 0:
            raise ValueError(f"{dist.label} needs positive shape and scale")

        def draw(size):
            if isinstance(dist, Gamma):
                return rng.gamma(dist.shape, dist.scale, size)
            return dist.scale * rng.weibull(dist.shape, size)

        values = [_quantize(x) for x in draw(K)]
        while any(v == 0 for v in values):
            values = [v if v else _quantize(draw(1)[0]) for v in values]
        return PopularityProfile.from_values(values)
    raise TypeError(f"unknown distribution {dist!r}")


def load_profile(path: str | Path) -> PopularityProfile:
    """Read one popularity per line (``p/q`` or decimal); line i is message id i.

    Blank lines and ``#`` comments are skipped.
    """
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                values.append(Fraction(text))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse {text!r}") from exc
    return PopularityProfile.from_values(values)
