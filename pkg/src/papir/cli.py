"""Command-line interface.

Exit codes: 0 success, 1 the command ran but its check or retrieval failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import analysis, netproto, simulation
from .errors import ConfigurationError, EnumerationLimitError
from .field import next_prime
from .pmf import (
    Gamma,
    PopularityProfile,
    ProblemParams,
    Uniform,
    Weibull,
    Zipf,
    load_profile,
    pmf_W,
    sample_profile,
)
from .schemes import Dataset, PartitionQuery, RcsPolicy, rcs_round

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
FORMATS = ("human", "kv", "csv")


def fmt(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator} ({float(x):.12f})"


def ratio(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _emit(pairs: list[tuple[str, object]], fmt_name: str, out=None) -> None:
    out = out or sys.stdout
    if fmt_name == "kv":
        for key, value in pairs:
            if isinstance(value, Fraction):
                print(f"{key}={ratio(value)}", file=out)
                print(f"{key}.decimal={float(value):.12f}", file=out)
            else:
                print(f"{key}={value}", file=out)
    elif fmt_name == "csv":
        print(",".join(k for k, _ in pairs), file=out)
        print(",".join(ratio(v) if isinstance(v, Fraction) else str(v) for _, v in pairs), file=out)
    else:
        width = max(len(k) for k, _ in pairs)
        for key, value in pairs:
            shown = fmt(value) if isinstance(value, Fraction) else value
            print(f"{key:<{width}}  {shown}", file=out)


# --------------------------------------------------------------------------
# Profile selection


def _add_profile_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--profile", type=Path, help="file with one popularity per line")
    src.add_argument("--lambdas", help="comma-separated popularities, e.g. 2,1,1,1,1,1")
    src.add_argument("--uniform", action="store_true", help="equal popularities (default)")
    src.add_argument("--dist", choices=["zipf", "gamma", "weibull"], help="sample the profile")
    p.add_argument("--seed", type=int, default=0, help="seed for --dist sampling")


def _add_params_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-K", type=int, help="number of messages (inferred from an explicit profile)")
    p.add_argument("-M", type=int, required=True, help="side-information size")
    p.add_argument("-q", type=int, help="field modulus (default: smallest prime >= K)")


def _profile(args) -> PopularityProfile:
    if args.profile is not None:
        profile = load_profile(args.profile)
    elif args.lambdas:
        profile = PopularityProfile.from_values(Fraction(v) for v in args.lambdas.split(","))
    elif args.dist:
        if args.K is None:
            raise ConfigurationError("-K is required with --dist")
        dist = {"zipf": Zipf(), "gamma": Gamma(), "weibull": Weibull()}[args.dist]
        profile = sample_profile(dist, args.K, args.seed)
    else:
        if args.K is None:
            raise ConfigurationError("-K is required for a uniform profile")
        profile = sample_profile(Uniform(), args.K)
    if args.K is not None and args.K != profile.K:
        raise ConfigurationError(f"profile has {profile.K} messages but -K {args.K} was given")
    return profile


def _params(args, profile: PopularityProfile, n: int = 1) -> ProblemParams:
    return ProblemParams(profile.K, args.M, args.q, n)


# --------------------------------------------------------------------------
# Commands


def cmd_rates(args) -> int:
    profile = _profile(args)
    params = _params(args, profile)
    rep = analysis.rate_report(profile, params)
    _emit(
        [
            ("K", params.K),
            ("M", params.M),
            ("r_ub", rep.r_ub),
            ("r_lb", rep.r_lb),
            ("r_mds", rep.r_mds),
            ("expected_download_units", rep.expected_download_units),
        ],
        args.format,
    )
    return EXIT_OK


def _query_text(query) -> str:
    if isinstance(query, PartitionQuery):
        return "{" + ",".join("{" + ",".join(map(str, p)) + "}" for p in query.canonical().parts) + "}"
    return f"mds(omegas={list(query.omegas)})"


def cmd_verify_privacy(args) -> int:
    profile = _profile(args)
    params = _params(args, profile)
    verdict = analysis.privacy_oracle(profile, params, args.policy, keep_distribution=False)
    pairs = [
        ("policy", args.policy),
        ("passed", str(verdict.passed).lower()),
        ("violations", len(verdict.violations)),
    ]
    _emit(pairs, args.format)
    shown = verdict.violations[: args.max_violations]
    for v in shown:
        if args.format == "kv":
            print(f"violation={_query_text(v.query)};W={v.W};posterior={ratio(v.posterior)};prior={ratio(v.prior)}")
        else:
            print(f"  violation: query {_query_text(v.query)}  W={v.W}  posterior {fmt(v.posterior)}  prior {fmt(v.prior)}")
    if len(verdict.violations) > len(shown):
        print(f"  ... {len(verdict.violations) - len(shown)} more", file=sys.stderr)
    return EXIT_OK if verdict.passed else EXIT_FAILED


def cmd_gamma_table(args) -> int:
    profile = _profile(args)
    params = _params(args, profile)
    policy = RcsPolicy.build(profile, params)
    ids = profile.original_index
    if args.format == "csv":
        print("W,S,W_id,S_ids,gamma")
    else:
        print(f"base_gamma={ratio(policy.base_gamma)}" if args.format == "kv" else f"base gamma  {fmt(policy.base_gamma)}")
    for W, S in policy.pairs():
        g = policy.gamma(W, S)
        s_sorted = sorted(S)
        s_ids = sorted(ids[i - 1] for i in S)
        if args.format == "csv":
            print(f"{W},{' '.join(map(str, s_sorted))},{ids[W - 1]},{' '.join(map(str, s_ids))},{ratio(g)}")
        elif args.format == "kv":
            print(f"gamma[{W};{','.join(map(str, s_sorted))}]={ratio(g)}")
        else:
            print(f"W={W:<3} S={{{','.join(map(str, s_sorted))}}}  {fmt(g)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = simulation.load_config(args.config)
    if args.profiles is not None:
        config = dataclasses.replace(config, profiles_per_point=args.profiles)

    def progress(row):
        if args.verbose:
            print(f"K={row.K} M={row.M} mean={row.mean_rcs_ratio:.6f} se={row.std_err:.2e}", file=sys.stderr)

    rows = simulation.run_experiment(config, progress)
    simulation.emit_csv(rows, args.out)
    print(args.out)
    return EXIT_OK


def cmd_make_dataset(args) -> int:
    q = args.q if args.q is not None else next_prime(args.K)
    params = ProblemParams(args.K, 1, q, args.n)
    data = Dataset.random(params, args.seed)
    netproto.save_dataset(data, args.out)
    print(args.out)
    return EXIT_OK


def _endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host, int(port)


def cmd_serve(args) -> int:
    data = netproto.load_dataset(args.dataset)
    host, port = args.endpoint
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    netproto.serve(netproto.ServerState(data), host, port)
    return EXIT_OK


def load_side_info(path: Path) -> dict[int, tuple[int, ...]]:
    """Lines of ``id: v1 v2 ... vn``."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, rest = text.partition(":")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'id: values'")
        out[int(key)] = tuple(int(v) for v in rest.replace(",", " ").split())
    return out


def cmd_fetch(args) -> int:
    profile = _profile(args)
    side_info = load_side_info(args.side_info)
    S = frozenset(int(s) for s in args.S.split(","))
    if set(side_info) != S:
        raise ConfigurationError(f"side-information file covers {sorted(side_info)}, -S says {sorted(S)}")
    lengths = {len(v) for v in side_info.values()}
    if len(lengths) != 1:
        raise ConfigurationError("side-information vectors have different lengths")
    params = _params(args, profile, n=lengths.pop())
    try:
        result = netproto.fetch_round(params, args.W, S, side_info, profile, args.endpoint, args.round_seed)
    except (netproto.NetworkError, netproto.ProtocolError, netproto.DecodeError) as exc:
        print(f"fetch failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    _emit(
        [
            ("scheme", result.scheme.value),
            ("combos", params.N if result.scheme.name == "PARTITION" else params.K - params.M),
            ("message", " ".join(map(str, result.decoded))),
        ],
        args.format,
    )
    return EXIT_OK


def cmd_demo(args) -> int:
    """The six-message example: one popular message, one side-information message."""
    profile = PopularityProfile.from_values([2, 1, 1, 1, 1, 1])
    params = ProblemParams(6, 1, 7, 4)
    policy = RcsPolicy.build(profile, params)
    rep = analysis.rate_report(profile, params)
    verdict_pc = analysis.privacy_oracle(profile, params, "pc")
    verdict_rcs = analysis.privacy_oracle(profile, params, "rcs")
    q = PartitionQuery(((1, 2), (3, 5), (4, 6)))
    pairs = [
        ("profile", "2,1,1,1,1,1"),
        ("gamma[W=1;S=2]", policy.gamma(1, {2})),
        ("gamma[W=2;S=1]", policy.gamma(2, {1})),
        ("gamma[W=3;S=5]", policy.gamma(3, {5})),
        ("rate_rcs", rep.r_lb),
        ("rate_mds", rep.r_mds),
        ("rate_upper_bound", rep.r_ub),
        ("expected_download_units", rep.expected_download_units),
        ("pc_only_private", str(verdict_pc.passed).lower()),
        ("pc_only_posterior[W=2]", verdict_pc.posterior(q, 2)),
        ("prior[W=2]", pmf_W(profile, 2, params.M)),
        ("rcs_private", str(verdict_rcs.passed).lower()),
        ("rcs_P(Q={{1,2},{3,5},{4,6}})", verdict_rcs.probability_of(q)),
        ("rcs_posterior[W=1]", verdict_rcs.posterior(q, 1)),
        ("rcs_posterior[W=2]", verdict_rcs.posterior(q, 2)),
    ]
    data = Dataset.random(params, args.seed)
    rounds = [rcs_round(profile, params, 1, {2}, data, args.seed * 100003 + i, policy) for i in range(args.rounds)]
    ok = all(r.decoded == data[1] for r in rounds)
    mean = Fraction(sum(r.download_units for r in rounds), len(rounds))
    pairs += [
        ("rounds", len(rounds)),
        ("rounds_decoded_correctly", str(ok).lower()),
        ("mean_download_units", f"{float(mean):.4f}"),
    ]
    _emit(pairs, args.format)
    return EXIT_OK if ok and verdict_rcs.passed and not verdict_pc.passed else EXIT_FAILED


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="papir", description="Popularity-aware PIR with side information")
    parser.add_argument("--format", choices=FORMATS, default="human")
    # Also accepted after the subcommand; SUPPRESS keeps the top-level value otherwise.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add("rates", help="capacity bounds and achievable rate")
    _add_profile_args(p)
    _add_params_args(p)
    p.set_defaults(func=cmd_rates)

    p = add("verify-privacy", help="exact privacy audit by enumeration")
    _add_profile_args(p)
    _add_params_args(p)
    p.add_argument("--policy", choices=[x.value for x in analysis.Policy], default="rcs")
    p.add_argument("--max-violations", type=int, default=20)
    p.set_defaults(func=cmd_verify_privacy)

    p = add("gamma-table", help="list every selection probability")
    _add_profile_args(p)
    _add_params_args(p)
    p.set_defaults(func=cmd_gamma_table)

    p = add("simulate", help="run a rate sweep from a config file")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=Path("sweep.csv"))
    p.add_argument("--profiles", type=int, help="override profiles_per_point")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = add("make-dataset", help="write a random dataset file")
    p.add_argument("-K", type=int, required=True)
    p.add_argument("-n", type=int, default=1)
    p.add_argument("-q", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_make_dataset)

    p = add("serve", help="answer queries over TCP")
    p.add_argument("dataset", type=Path)
    p.add_argument("--endpoint", type=_endpoint, default=("127.0.0.1", 7878))
    p.set_defaults(func=cmd_serve)

    p = add("fetch", help="privately retrieve one message from a server")
    p.add_argument("--endpoint", type=_endpoint, required=True)
    p.add_argument("-W", type=int, required=True, help="demanded message id")
    p.add_argument("-S", required=True, help="comma-separated side-information ids")
    p.add_argument("--side-info", type=Path, required=True, help="lines of 'id: v1 v2 ...'")
    p.add_argument("--round-seed", type=int, help="seed for scheme choice and partition (default: fresh)")
    _add_profile_args(p)
    _add_params_args(p)
    p.set_defaults(func=cmd_fetch)

    p = add("demo", help="walk through the six-message example")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--rounds", type=int, default=2600)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, EnumerationLimitError, ValueError, IndexError, KeyError, OSError) as exc:
        print(f"papir {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
