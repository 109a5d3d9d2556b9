"""Partition-and-Code, MDS, and Randomized Code Selection retrieval.

Message indices are 1-based sorted-profile positions, matching ``pmf``.
Randomness comes from ``random.Random``; every builder accepts either a
seed or an existing generator.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence, Union

from .errors import ConfigurationError, ConsistencyError
from .field import MessageVector, PrimeField, SingularMatrixError, is_prime, mat_vec_apply, solve_square_system, vandermonde
from .pmf import DEFAULT_ENUMERATION_LIMIT, PopularityProfile, ProblemParams, demand_model


class Scheme(enum.Enum):
    PARTITION = "partition-and-code"
    MDS = "mds"


def _rng(rng) -> random.Random:
    return rng if isinstance(rng, random.Random) else random.Random(rng)


# --------------------------------------------------------------------------
# Queries, answers, data


@dataclass(frozen=True, eq=False)
class PartitionQuery:
    """A partition of [K] into equal parts, in the order they are sent.

    Two queries compare equal when they describe the same set partition;
    ``canonical()`` gives the representative with ascending parts ordered by
    their smallest element.
    """

    parts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        parts = tuple(tuple(sorted(p)) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise ValueError("partition query needs at least one part")
        size = len(parts[0])
        if size < 2 or any(len(p) != size for p in parts):
            raise ValueError("parts must all have the same size >= 2")
        flat = sorted(i for p in parts for i in p)
        if flat != list(range(1, len(flat) + 1)):
            raise ValueError("parts must be disjoint and cover 1..K")

    @property
    def K(self) -> int:
        return len(self.parts) * len(self.parts[0])

    @property
    def M(self) -> int:
        return len(self.parts[0]) - 1

    @property
    def N(self) -> int:
        return len(self.parts)

    def canonical(self) -> PartitionQuery:
        return PartitionQuery(tuple(sorted(self.parts)))

    def key(self) -> tuple[tuple[int, ...], ...]:
        return tuple(sorted(self.parts))

    def part_index(self, i: int) -> int:
        """0-based position of the part holding message ``i``."""
        for j, part in enumerate(self.parts):
            if i in part:
                return j
        raise KeyError(i)

    def __eq__(self, other):
        if not isinstance(other, PartitionQuery):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class MdsQuery:
    """K distinct evaluation points; row j (0-based) of the query is omegas**j.

    The number of rows is K - M.
    """

    omegas: tuple[int, ...]
    M: int
    q: int

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(self.omegas))
        if not is_prime(self.q):
            raise ValueError(f"q={self.q} is not prime")
        if any(not 0 <= w < self.q for w in self.omegas):
            raise ValueError(f"evaluation points must be residues mod {self.q}")
        if len(set(self.omegas)) != len(self.omegas):
            raise ValueError("evaluation points must be distinct in GF(q)")
        if not 0 <= self.M < len(self.omegas):
            raise ValueError("need 0 <= M < K")

    @property
    def K(self) -> int:
        return len(self.omegas)

    @property
    def rows(self) -> int:
        return self.K - self.M

    def matrix(self) -> list[list[int]]:
        return vandermonde(self.omegas, self.rows, PrimeField(self.q))


Query = Union[PartitionQuery, MdsQuery]


@dataclass(frozen=True)
class Answer:
    combos: tuple[MessageVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "combos", tuple(tuple(c) for c in self.combos))


@dataclass(frozen=True)
class Dataset:
    field: PrimeField
    messages: tuple[MessageVector, ...]

    def __post_init__(self):
        msgs = tuple(tuple(m) for m in self.messages)
        object.__setattr__(self, "messages", msgs)
        if not msgs:
            raise ValueError("dataset must hold at least one message")
        n = len(msgs[0])
        if n < 1 or any(len(m) != n for m in msgs):
            raise ValueError("all messages must have the same positive length")
        q = self.field.q
        if any(not 0 <= v < q for m in msgs for v in m):
            raise ValueError(f"message entries must be residues mod {q}")

    @property
    def K(self) -> int:
        return len(self.messages)

    @property
    def n(self) -> int:
        return len(self.messages[0])

    def __getitem__(self, i: int) -> MessageVector:
        """Message at 1-based index ``i``."""
        if not 1 <= i <= self.K:
            raise IndexError(f"message index {i} outside [1, {self.K}]")
        return self.messages[i - 1]

    def side_info(self, S) -> dict[int, MessageVector]:
        return {i: self[i] for i in S}

    @classmethod
    def random(cls, params: ProblemParams, rng=None) -> Dataset:
        r = _rng(rng)
        q = params.q
        return cls(
            PrimeField(q),
            tuple(tuple(r.randrange(q) for _ in range(params.n)) for _ in range(params.K)),
        )


def _check_demand(params: ProblemParams, W: int, S) -> frozenset[int]:
    S = frozenset(S)
    if len(S) != params.M:
        raise ValueError(f"side information must have M={params.M} indices, got {len(S)}")
    if W in S:
        raise ValueError("demand index cannot be part of the side information")
    for i in S | {W}:
        if not 1 <= i <= params.K:
            raise IndexError(f"message index {i} outside [1, {params.K}]")
    return S


# --------------------------------------------------------------------------
# Scheme I: Partition-and-Code


def leftover_arrangements(K: int, M: int) -> int:
    """Number of ways to split K-(M+1) labelled indices into N-1 unordered parts of size M+1."""
    size = M + 1
    N = K // size
    return math.factorial(K - size) // (math.factorial(size) ** (N - 1) * math.factorial(N - 1))


def pc_build_query(params: ProblemParams, W: int, S, rng=None) -> tuple[PartitionQuery, int]:
    """Build a Partition-and-Code query; returns (query, j_star).

    ``j_star`` is the 0-based slot, uniform over the N slots, that holds
    W together with S.  The other indices are shuffled and cut into
    consecutive blocks, which makes every set partition of them equally likely.
    """
    params.require_rcs()
    S = _check_demand(params, W, S)
    r = _rng(rng)
    size = params.M + 1
    N = params.N
    j_star = r.randrange(N)
    rest = [i for i in range(1, params.K + 1) if i != W and i not in S]
    r.shuffle(rest)
    blocks = [rest[b : b + size] for b in range(0, len(rest), size)]
    blocks.insert(j_star, sorted(S | {W}))
    return PartitionQuery(tuple(tuple(b) for b in blocks)), j_star


def pc_answer(query: PartitionQuery, data: Dataset) -> Answer:
    if query.K != data.K:
        raise ValueError(f"query covers {query.K} messages, dataset holds {data.K}")
    q = data.field.q
    n = data.n
    combos = []
    for part in query.parts:
        acc = [0] * n
        for i in part:
            for t, v in enumerate(data[i]):
                acc[t] += v
        combos.append(tuple(v % q for v in acc))
    return Answer(tuple(combos))


def pc_decode(
    answer: Answer,
    j_star: int,
    S,
    side_info: Mapping[int, MessageVector],
    field: PrimeField,
) -> MessageVector:
    missing = set(S) - set(side_info)
    if missing:
        raise KeyError(f"side information missing for indices {sorted(missing)}")
    out = answer.combos[j_star]
    for i in S:
        out = field.vec_sub(out, side_info[i])
    return out


# --------------------------------------------------------------------------
# Scheme II: MDS code


def mds_build_query(params: ProblemParams, omegas: Sequence[int] | None = None) -> MdsQuery:
    """Vandermonde query; the default evaluation points are 0, 1, ..., K-1.

    Takes no demand or side information: the query is the same for all of them.
    """
    if params.q < params.K:
        raise ConfigurationError(f"q={params.q} < K={params.K}: cannot choose K distinct points")
    if omegas is None:
        omegas = range(params.K)
    return MdsQuery(tuple(omegas), params.M, params.q)


def mds_answer(query: MdsQuery, data: Dataset) -> Answer:
    if query.K != data.K:
        raise ValueError(f"query covers {query.K} messages, dataset holds {data.K}")
    if query.q != data.field.q:
        raise ValueError(f"query is over GF({query.q}), dataset over GF({data.field.q})")
    return Answer(tuple(mat_vec_apply(query.matrix(), data.messages, data.field)))


def mds_decode(
    answer: Answer,
    query: MdsQuery,
    W: int,
    S,
    side_info: Mapping[int, MessageVector],
) -> MessageVector:
    """Strip the side information and solve for every unknown message; return X_W."""
    S = frozenset(S)
    missing = S - set(side_info)
    if missing:
        raise KeyError(f"side information missing for indices {sorted(missing)}")
    if len(S) != query.M:
        raise ValueError(f"expected {query.M} side-information indices, got {len(S)}")
    f = PrimeField(query.q)
    rows = query.matrix()
    if len(answer.combos) != len(rows):
        raise ValueError(f"answer has {len(answer.combos)} combos, query asks for {len(rows)}")
    rhs = []
    for row, combo in zip(rows, answer.combos):
        acc = combo
        for i in S:
            acc = f.vec_sub(acc, f.vec_scale(row[i - 1], side_info[i]))
        rhs.append(acc)
    unknowns = [i for i in range(1, query.K + 1) if i not in S]
    A = [[row[i - 1] for i in unknowns] for row in rows]
    try:
        solution = solve_square_system(A, rhs, f)
    except SingularMatrixError as exc:
        raise ConsistencyError("MDS system is singular; evaluation points are not distinct") from exc
    return solution[unknowns.index(W)]


# --------------------------------------------------------------------------
# Randomized Code Selection


def _prefix(M: int) -> frozenset[int]:
    return frozenset(range(2, M + 2))


def rcs_gamma_base(
    profile: PopularityProfile, params: ProblemParams, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> Fraction:
    """Selection probability for W={1}, S=[2:M+1]; every other one scales from it."""
    params.require_rcs()
    K, M = params.K, params.M
    dm = demand_model(profile, M, limit)
    ref = dm.joint_over_marginal(1, _prefix(M))
    tail = frozenset(range(K - M, K + 1))
    best = Fraction(1)
    for i in tail:
        best = min(best, dm.joint_over_marginal(i, tail - {i}) / ref)
    return best


def rcs_gamma(
    profile: PopularityProfile,
    params: ProblemParams,
    W: int,
    S,
    base: Fraction | None = None,
    limit: int = DEFAULT_ENUMERATION_LIMIT,
) -> Fraction:
    """Probability of choosing Partition-and-Code for demand W and side information S."""
    S = _check_demand(params, W, S)
    if base is None:
        base = rcs_gamma_base(profile, params, limit)
    dm = demand_model(profile, params.M, limit)
    gamma = base * dm.joint_over_marginal(1, _prefix(params.M)) / dm.joint_over_marginal(W, S)
    if not 0 <= gamma <= 1:
        raise ConsistencyError(f"selection probability {gamma} for W={W}, S={sorted(S)} outside [0, 1]")
    return gamma


@dataclass
class RcsPolicy:
    """Selection probabilities for one profile; entries are computed on first use."""

    profile: PopularityProfile
    params: ProblemParams
    base_gamma: Fraction
    limit: int = DEFAULT_ENUMERATION_LIMIT
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, profile: PopularityProfile, params: ProblemParams, limit: int = DEFAULT_ENUMERATION_LIMIT):
        if profile.K != params.K:
            raise ConfigurationError(f"profile has {profile.K} messages, params say K={params.K}")
        return cls(profile, params, rcs_gamma_base(profile, params, limit), limit)

    def gamma(self, W: int, S) -> Fraction:
        key = (W, frozenset(S))
        if key not in self._cache:
            self._cache[key] = rcs_gamma(self.profile, self.params, W, key[1], self.base_gamma, self.limit)
        return self._cache[key]

    def __getitem__(self, key) -> Fraction:
        W, S = key
        return self.gamma(W, S)

    def pairs(self) -> Iterator[tuple[int, frozenset[int]]]:
        from itertools import combinations

        K, M = self.params.K, self.params.M
        for W in range(1, K + 1):
            others = [i for i in range(1, K + 1) if i != W]
            for S in combinations(others, M):
                yield W, frozenset(S)

    def table(self) -> dict[tuple[int, frozenset[int]], Fraction]:
        return {(W, S): self.gamma(W, S) for W, S in self.pairs()}


def bernoulli(p: Fraction, rng: random.Random) -> bool:
    """Exact Bernoulli draw for a rational probability."""
    p = Fraction(p)
    return rng.randrange(p.denominator) < p.numerator


@dataclass(frozen=True)
class RoundResult:
    query: Query
    answer: Answer
    decoded: MessageVector
    scheme_used: Scheme
    download_units: int
    j_star: int | None = None


def choose_query(
    policy: RcsPolicy, W: int, S, rng=None
) -> tuple[Query, Scheme, int | None]:
    """Client-side half of a round: pick the scheme and build its query."""
    r = _rng(rng)
    params = policy.params
    if bernoulli(policy.gamma(W, S), r):
        query, j_star = pc_build_query(params, W, S, r)
        return query, Scheme.PARTITION, j_star
    return mds_build_query(params), Scheme.MDS, None


def decode_answer(
    query: Query,
    answer: Answer,
    W: int,
    S,
    side_info: Mapping[int, MessageVector],
    field: PrimeField,
    j_star: int | None = None,
) -> MessageVector:
    """Client-side decode for either scheme.

    For a partition query without ``j_star`` the part holding W is looked up.
    """
    if isinstance(query, PartitionQuery):
        if len(answer.combos) != query.N:
            raise ValueError(f"answer has {len(answer.combos)} combos, query has {query.N} parts")
        if j_star is None:
            j_star = query.part_index(W)
        return pc_decode(answer, j_star, S, side_info, field)
    return mds_decode(answer, query, W, S, side_info)


def rcs_round(
    profile: PopularityProfile,
    params: ProblemParams,
    W: int,
    S,
    data: Dataset,
    rng=None,
    policy: RcsPolicy | None = None,
) -> RoundResult:
    """One full retrieval: select a scheme, query, answer, decode.

    ``download_units`` counts downloaded coded vectors (N or K-M).
    """
    if data.K != params.K or data.field.q != params.q:
        raise ConfigurationError("dataset does not match the problem parameters")
    if policy is None:
        policy = RcsPolicy.build(profile, params)
    S = frozenset(S)
    query, scheme, j_star = choose_query(policy, W, S, rng)
    if scheme is Scheme.PARTITION:
        answer = pc_answer(query, data)
    else:
        answer = mds_answer(query, data)
    decoded = decode_answer(query, answer, W, S, data.side_info(S), data.field, j_star)
    return RoundResult(query, answer, decoded, scheme, len(answer.combos), j_star)
