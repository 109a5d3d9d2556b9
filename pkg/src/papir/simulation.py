"""Monte-Carlo sweeps of the achievable-rate ratio over random popularity profiles.

Each profile's rate is exact; only the average across profiles is floating point.
"""

from __future__ import annotations

import configparser
import csv
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import rate_lower_bound, rate_upper_bound
from .errors import ConfigurationError
from .pmf import Distribution, Gamma, PopularityProfile, ProblemParams, Uniform, Weibull, Zipf, sample_profile

CSV_HEADER = ("K", "M", "distribution", "mean_rcs_ratio", "std_err", "mds_ratio")

DEFAULT_SWEEP = {
    1: tuple(range(6, 61, 2)),
    2: tuple(range(12, 61, 3)),
    3: tuple(range(20, 61, 4)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A sweep over (K, M).

    ``K_values`` applies to every M unless ``K_by_M`` gives that M its own grid.
    """

    distribution: Distribution
    K_values: tuple[int, ...]
    M_values: tuple[int, ...]
    profiles_per_point: int = 1000
    seed: int = 0
    K_by_M: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "K_values", tuple(sorted(set(self.K_values))))
        object.__setattr__(self, "M_values", tuple(sorted(set(self.M_values))))
        object.__setattr__(
            self, "K_by_M", tuple(sorted((M, tuple(sorted(set(Ks)))) for M, Ks in dict(self.K_by_M).items()))
        )
        if self.profiles_per_point < 1:
            raise ConfigurationError("profiles_per_point must be >= 1")
        for K, M in self.points():
            ProblemParams(K, M).require_rcs()

    def grid(self, M: int) -> tuple[int, ...]:
        return dict(self.K_by_M).get(M, self.K_values)

    def points(self) -> list[tuple[int, int]]:
        return [(K, M) for M in self.M_values for K in self.grid(M)]


@dataclass(frozen=True)
class ExperimentRow:
    K: int
    M: int
    distribution: str
    mean_rcs_ratio: float
    std_err: float
    mds_ratio: float


def mds_ratio(K: int, M: int) -> Fraction:
    """R_MDS / R_UB = K / ((K - M)(M + 1))."""
    return Fraction(K, (K - M) * (M + 1))


def profile_seed(master: int, K: int, M: int, j: int) -> np.random.SeedSequence:
    # Keyed by (K, M, j) so any row can be recomputed on its own.
    return np.random.SeedSequence(master, spawn_key=(K, M, j))


def rcs_ratio(profile: PopularityProfile, params: ProblemParams) -> Fraction:
    return rate_lower_bound(profile, params) / rate_upper_bound(params)


def run_point(dist: Distribution, K: int, M: int, n_profiles: int, seed: int = 0) -> ExperimentRow:
    params = ProblemParams(K, M)
    params.require_rcs()
    ratios = []
    for j in range(n_profiles):
        profile = sample_profile(dist, K, profile_seed(seed, K, M, j))
        ratios.append(float(rcs_ratio(profile, params)))
    mean = math.fsum(ratios) / len(ratios)
    se = statistics.stdev(ratios) / math.sqrt(len(ratios)) if len(ratios) > 1 else 0.0
    return ExperimentRow(K, M, dist.label, mean, se, float(mds_ratio(K, M)))


def run_experiment(config: ExperimentConfig, progress=None) -> list[ExperimentRow]:
    rows = []
    for K, M in config.points():
        row = run_point(config.distribution, K, M, config.profiles_per_point, config.seed)
        if progress is not None:
            progress(row)
        rows.append(row)
    return sort_rows(rows)


def sort_rows(rows: Iterable[ExperimentRow]) -> list[ExperimentRow]:
    return sorted(rows, key=lambda r: (r.distribution, r.M, r.K))


def emit_csv(rows: Sequence[ExperimentRow], path: str | Path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in sort_rows(rows):
                writer.writerow(
                    [r.K, r.M, r.distribution, f"{r.mean_rcs_ratio:.12g}", f"{r.std_err:.12g}", f"{r.mds_ratio:.12g}"]
                )
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV: {exc.strerror}", str(path)) from exc


def read_csv(path: str | Path) -> list[ExperimentRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            ExperimentRow(
                int(d["K"]), int(d["M"]), d["distribution"],
                float(d["mean_rcs_ratio"]), float(d["std_err"]), float(d["mds_ratio"]),
            )
            for d in reader
        ]


# --------------------------------------------------------------------------
# Config files


def _int_list(text: str) -> tuple[int, ...]:
    """``6, 8, 10`` or inclusive ranges ``6:60:2`` (step defaults to 1)."""
    out = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        if ":" in tok:
            start, stop, *step = (int(x) for x in tok.split(":"))
            out.extend(range(start, stop + 1, step[0] if step else 1))
        else:
            out.append(int(tok))
    return tuple(out)


def _distribution(section) -> Distribution:
    kind = section.get("distribution", "zipf").strip().lower()
    if kind == "zipf":
        return Zipf(section.getint("N", 100), section.getfloat("s", 1.0))
    if kind == "gamma":
        return Gamma(section.getfloat("shape", 0.62), section.getfloat("scale", 31.22))
    if kind == "weibull":
        return Weibull(section.getfloat("shape", 0.79), section.getfloat("scale", 16.80))
    if kind == "uniform":
        return Uniform()
    raise ConfigurationError(f"unknown distribution {kind!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines.

    Keys: distribution (zipf|gamma|weibull|uniform), N, s, shape, scale,
    K, M, profiles_per_point, seed.  ``K.<M>`` sets the grid for one M;
    an M with neither falls back to DEFAULT_SWEEP.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    cp.read_string("[experiment]\n" + text)
    sec = cp["experiment"]
    if "M" not in sec:
        raise ConfigurationError("config needs M")
    M_values = _int_list(sec["M"])
    per_M = {int(k[2:]): _int_list(v) for k, v in sec.items() if k.startswith("K.")}
    K_values = _int_list(sec["K"]) if "K" in sec else ()
    for M in M_values:
        if M not in per_M and not K_values:
            if M not in DEFAULT_SWEEP:
                raise ConfigurationError(f"no K grid for M={M}")
            per_M[M] = DEFAULT_SWEEP[M]
    return ExperimentConfig(
        distribution=_distribution(sec),
        K_values=K_values,
        M_values=M_values,
        profiles_per_point=sec.getint("profiles_per_point", 1000),
        seed=sec.getint("seed", 0),
        K_by_M=tuple(per_M.items()),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
