"""Command-line front end.

Four subcommands, all emitting CSV on stdout with '.' decimals and LF line
endings:

- ``simulate``: seeded Monte Carlo trials of one algorithm on one instance.
- ``complexity``: the three-term budget of a variance profile.
- ``lowerbound``: dual lower-bound evaluation for a chosen assignment.
- ``sweep``: budget comparison across the structured variance family.

Exit codes: 0 success, 2 usage or validation error, 3 enumeration budget
exceeded, 4 internal assertion failure.  Every command is deterministic given
its flags, including ``--seed`` and regardless of ``--threads``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from math import fsum

from .core import (
    EnumerationBudgetError,
    ProblemSpec,
    complexity_terms,
    complexity_terms_rle,
    entropy,
    entropy_rle,
    group_arms,
    partition_groups_rle,
    reduced_profile_rle,
)
from .harness import CSV_HEADER, run_trials, summary_csv_fields
from .instances import (
    BanditInstance,
    hard_instance_pivot,
    hard_instance_top,
    illustrative_family,
    instance_from_json,
    log_uniform_sigma2,
    materialize_profile,
    profile_from_json,
    random_instance,
)
from .lowerbound import (
    b_delta,
    bound_report,
    eta_from_json,
    eta_product,
    eta_uniform,
    eta_uniform_top,
)

__all__ = ["main"]

_BUILTIN_HELP = """\
builtin instance grammar (simulate): builtin:NAME[,key=value...]
  hardM    three-level instance, unique answer = the m raised arms
           keys: n, m, eps_prime (default 1.05*epsilon), sigma_lo (0.25),
           sigma_hi (4.0), sigma_seed (1234)
  hardF    three-level instance, unique answer = m-1 raised arms + pivot
           keys: as hardM
  random   uniform means, log-uniform variances
           keys: n, seed (0), mean_lo (0.0), mean_hi (1.0),
           sigma_lo (0.01), sigma_hi (100.0)

builtin profile grammar (complexity/lowerbound): builtin:NAME[,key=value...]
  homogeneous   keys: n, value (1.0)
  powers2       keys: n  (variances 1, 2, 4, ...)
  loguniform    keys: n, lo (0.01), hi (100.0), seed (0)
  illustrative  keys: k  (run-length encoded; huge arm counts)

config file: JSON object whose keys mirror the long flag names exactly
(e.g. {"epsilon": 0.2, "k-range": "2..8"}); explicit flags override it.
"""


def _parse_kv(text: str):
    if "=" not in text:
        raise ValueError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        return key, int(raw)
    except ValueError:
        pass
    try:
        return key, float(raw)
    except ValueError:
        return key, raw


def _parse_builtin(text: str, allowed: dict[str, set[str]]):
    body = text[len("builtin:") :]
    parts = body.split(",")
    name = parts[0]
    if name not in allowed:
        raise ValueError(
            f"unknown builtin {name!r}; choose from {sorted(allowed)}"
        )
    params = {}
    for part in parts[1:]:
        key, value = _parse_kv(part)
        if key not in allowed[name]:
            raise ValueError(f"builtin {name!r} does not take key {key!r}")
        params[key] = value
    return name, params


_INSTANCE_BUILTINS = {
    "hardM": {"n", "m", "eps_prime", "sigma_lo", "sigma_hi", "sigma_seed"},
    "hardF": {"n", "m", "eps_prime", "sigma_lo", "sigma_hi", "sigma_seed"},
    "random": {"n", "seed", "mean_lo", "mean_hi", "sigma_lo", "sigma_hi"},
}

_PROFILE_BUILTINS = {
    "homogeneous": {"n", "value"},
    "powers2": {"n"},
    "loguniform": {"n", "lo", "hi", "seed"},
    "illustrative": {"k"},
}


def _builtin_instance(text: str, epsilon: float):
    """Returns (instance, m_pinned_or_None)."""
    name, p = _parse_builtin(text, _INSTANCE_BUILTINS)
    if name in ("hardM", "hardF"):
        if "n" not in p or "m" not in p:
            raise ValueError(f"builtin {name!r} needs n and m")
        n, m = int(p["n"]), int(p["m"])
        margin = float(p.get("eps_prime", 1.05 * epsilon))
        sigma2 = log_uniform_sigma2(
            int(p.get("sigma_seed", 1234)),
            n,
            float(p.get("sigma_lo", 0.25)),
            float(p.get("sigma_hi", 4.0)),
        )
        if name == "hardM":
            inst = hard_instance_top(
                n, m, tuple(range(m)), m, margin, sigma2, epsilon=epsilon
            )
        else:
            inst = hard_instance_pivot(
                n, m, tuple(range(m - 1)), m - 1, margin, sigma2, epsilon=epsilon
            )
        return inst, m
    if "n" not in p:
        raise ValueError("builtin 'random' needs n")
    inst = random_instance(
        int(p.get("seed", 0)),
        int(p["n"]),
        float(p.get("mean_lo", 0.0)),
        float(p.get("mean_hi", 1.0)),
        ("log_uniform", float(p.get("sigma_lo", 0.01)), float(p.get("sigma_hi", 100.0))),
    )
    return inst, None


def _builtin_profile(text: str):
    """Returns ("dense", values) or ("rle", pairs)."""
    name, p = _parse_builtin(text, _PROFILE_BUILTINS)
    if name == "homogeneous":
        if "n" not in p:
            raise ValueError("builtin 'homogeneous' needs n")
        return "dense", tuple([float(p.get("value", 1.0))] * int(p["n"]))
    if name == "powers2":
        if "n" not in p:
            raise ValueError("builtin 'powers2' needs n")
        return "dense", tuple(float(2**i) for i in range(int(p["n"])))
    if name == "loguniform":
        if "n" not in p:
            raise ValueError("builtin 'loguniform' needs n")
        return "dense", log_uniform_sigma2(
            int(p.get("seed", 0)),
            int(p["n"]),
            float(p.get("lo", 0.01)),
            float(p.get("hi", 100.0)),
        )
    if "k" not in p:
        raise ValueError("builtin 'illustrative' needs k")
    profile, _ = illustrative_family(int(p["k"]))
    return "rle", profile


def _resolve_profile(text: str):
    if text.startswith("builtin:"):
        return _builtin_profile(text)
    with open(text, "r", encoding="utf-8") as fh:
        return profile_from_json(fh.read())


def _load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return doc


# option name -> coercion, per subcommand; config keys mirror flag names
_OPTION_TYPES = {
    "simulate": {
        "algo": str,
        "instance": str,
        "epsilon": float,
        "delta": float,
        "m": int,
        "trials": int,
        "seed": int,
        "threads": int,
    },
    "complexity": {
        "sigma2": str,
        "epsilon": float,
        "delta": float,
        "m": int,
        "gr-mode": str,
    },
    "lowerbound": {
        "sigma2": str,
        "epsilon": float,
        "delta": float,
        "m": int,
        "eta": str,
    },
    "sweep": {
        "family": str,
        "k-range": str,
        "epsilon": float,
        "delta": float,
        "mode": str,
    },
}


def _apply_config(args: argparse.Namespace, command: str) -> None:
    if getattr(args, "config", None) is None:
        return
    cfg = _load_config(args.config)
    types = _OPTION_TYPES[command]
    for key, value in cfg.items():
        if key not in types:
            raise ValueError(f"unknown config key {key!r} for command {command!r}")
        attr = key.replace("-", "_")
        if getattr(args, attr) is None:
            setattr(args, attr, types[key](value))


def _require(args: argparse.Namespace, names: list[str]) -> None:
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise ValueError(f"missing required option --{name}")


def _writer():
    return csv.writer(sys.stdout, lineterminator="\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _cmd_simulate(args: argparse.Namespace) -> int:
    _apply_config(args, "simulate")
    _require(args, ["algo", "instance", "epsilon", "delta", "trials"])
    if args.seed is None:
        args.seed = 0
    if args.threads is None:
        args.threads = os.cpu_count() or 1
    if args.trials < 1:
        raise ValueError("trials must be >= 1")
    if args.threads < 1:
        raise ValueError("threads must be >= 1")
    if args.algo not in ("wnelim", "medelim", "vmedelim", "adapted"):
        raise ValueError(f"unknown value for --algo: {args.algo!r}")

    if args.instance.startswith("builtin:"):
        instance, pinned_m = _builtin_instance(args.instance, args.epsilon)
        instance_id = args.instance
    else:
        with open(args.instance, "r", encoding="utf-8") as fh:
            instance = instance_from_json(fh.read())
        pinned_m = None
        instance_id = os.path.basename(args.instance)

    if args.m is None:
        if pinned_m is None:
            raise ValueError("missing required option --m")
        m = pinned_m
    else:
        if pinned_m is not None and args.m != pinned_m:
            raise ValueError(
                f"--m {args.m} conflicts with the builtin instance's m={pinned_m}"
            )
        m = args.m

    summary = run_trials(
        args.algo,
        instance,
        args.epsilon,
        args.delta,
        m,
        args.trials,
        args.seed,
        threads=args.threads,
    )
    w = _writer()
    w.writerow(CSV_HEADER.split(","))
    w.writerow(
        summary_csv_fields(
            summary, args.algo, instance_id, instance.n, m, args.epsilon, args.delta
        )
    )
    return 0


_COMPLEXITY_HEADER = [
    "term_I",
    "term_II",
    "term_III",
    "total",
    "k_groups",
    "g_more_size",
    "g_less_size",
    "ent_g_reduced",
]


def _cmd_complexity(args: argparse.Namespace) -> int:
    _apply_config(args, "complexity")
    _require(args, ["sigma2", "epsilon", "delta", "m"])
    gr_mode = args.gr_mode or "heuristic"
    if gr_mode not in ("heuristic", "exact"):
        raise ValueError(f"unknown value for --gr-mode: {gr_mode!r}")

    shape, data = _resolve_profile(args.sigma2)
    if shape == "rle" and gr_mode == "exact":
        # the exact reduced search needs explicit arms
        total_arms = sum(c for _, c in data)
        if total_arms > 4096:
            raise EnumerationBudgetError(
                "exact reduced-set selection needs a materialized profile; "
                f"{total_arms} arms is too many to expand"
            )
        shape, data = "dense", tuple(v for v, c in data for _ in range(c))
    if shape == "dense":
        spec = ProblemSpec(args.epsilon, args.delta, args.m, data)
        terms = complexity_terms(spec, gr_mode=gr_mode)
        grouping = group_arms(spec.sigma2, spec.m, gr_mode=gr_mode)
        k_groups = len(grouping.groups)
        more_size = len(grouping.g_more)
        less_size = len(grouping.g_less)
        ent_reduced = entropy([spec.sigma2[i] for i in grouping.g_reduced])
    else:
        terms = complexity_terms_rle(args.epsilon, args.delta, args.m, data, gr_mode=gr_mode)
        bands, _ = partition_groups_rle(data)
        k_groups = len(bands)
        more_size = 0
        less_size = 0
        for band in bands:
            size = sum(c for _, c in band)
            if size > 2 * args.m:
                more_size += size
            else:
                less_size += size
        ent_reduced = entropy_rle(reduced_profile_rle(bands, args.m))

    w = _writer()
    w.writerow(_COMPLEXITY_HEADER)
    w.writerow(
        [
            _fmt(terms.term_confidence),
            _fmt(terms.term_homog),
            _fmt(terms.term_heterog),
            _fmt(terms.total),
            str(k_groups),
            str(more_size),
            str(less_size),
            _fmt(ent_reduced),
        ]
    )
    return 0


_LOWERBOUND_HEADER = ["eta_kind", "objective", "sc_bound", "B_delta"]


def _cmd_lowerbound(args: argparse.Namespace) -> int:
    _apply_config(args, "lowerbound")
    _require(args, ["sigma2", "epsilon", "delta", "m", "eta"])

    shape, data = _resolve_profile(args.sigma2)
    if shape == "rle":
        raise ValueError(
            "lowerbound needs an explicit per-arm profile; run-length encoded "
            "input is not supported here"
        )
    spec = ProblemSpec(args.epsilon, args.delta, args.m, data)

    kind = args.eta
    if kind == "uniform":
        eta = eta_uniform(spec)
    elif kind == "gm":
        eta = eta_product(spec)
    elif kind == "uniformL":
        eta = eta_uniform_top(spec)
    elif kind.startswith("file:"):
        with open(kind[len("file:") :], "r", encoding="utf-8") as fh:
            eta = eta_from_json(fh.read(), subset_size=spec.m - 1)
    else:
        raise ValueError(
            f"unknown value for --eta: {kind!r}; use uniform, gm, uniformL or file:PATH"
        )

    w = _writer()
    w.writerow(_LOWERBOUND_HEADER)
    if eta is None:
        w.writerow([kind, "inapplicable", "inapplicable", _fmt(b_delta(spec.delta))])
        return 0
    report = bound_report(eta, spec)
    w.writerow(
        [kind, _fmt(report.objective_value), _fmt(report.sc_bound), _fmt(b_delta(spec.delta))]
    )
    return 0


_SWEEP_HEADER = [
    "k",
    "budget_vmedelim",
    "budget_wnelim_formula",
    "budget_medelim_formula",
    "ratio",
]


def _parse_k_range(text: str) -> range:
    if ".." not in text:
        raise ValueError("--k-range must look like A..B")
    lo_text, hi_text = text.split("..", 1)
    try:
        lo, hi = int(lo_text), int(hi_text)
    except ValueError as exc:
        raise ValueError("--k-range must hold two integers") from exc
    return range(lo, hi + 1)


def _cmd_sweep(args: argparse.Namespace) -> int:
    _apply_config(args, "sweep")
    _require(args, ["family", "k-range", "epsilon", "delta"])
    mode = args.mode or "rle"
    if args.family != "illustrative":
        raise ValueError(f"unknown value for --family: {args.family!r}")
    if mode not in ("rle", "materialized"):
        raise ValueError(f"unknown value for --mode: {mode!r}")

    w = _writer()
    w.writerow(_SWEEP_HEADER)
    for k in _parse_k_range(args.k_range):
        if k < 2:
            raise ValueError("k out of supported range: k must be >= 2")
        if mode == "materialized" and k > 3:
            raise ValueError("k out of supported range for materialized mode (k <= 3)")
        if mode == "rle" and k > 16:
            raise ValueError("k out of supported range for rle mode (k <= 16)")
        profile, _ = illustrative_family(k)
        m = 2**k
        if mode == "materialized":
            dense = materialize_profile(profile)
            spec = ProblemSpec(args.epsilon, args.delta, m, dense)
            total_budget = complexity_terms(spec).total
            sum_all = fsum(dense)
            ent_all = entropy(dense)
        else:
            total_budget = complexity_terms_rle(args.epsilon, args.delta, m, profile).total
            sum_all = fsum(v * c for v, c in profile)
            ent_all = entropy_rle(profile)
        eps2 = args.epsilon * args.epsilon
        confidence = math.log(1.0 / args.delta)
        wn = 8.0 * sum_all / eps2 * (confidence + ent_all)
        me = sum_all / eps2 * (confidence + math.log(m))
        ratio = min(wn, me) / total_budget
        w.writerow([str(k), _fmt(total_budget), _fmt(wn), _fmt(me), _fmt(ratio)])
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varelim",
        description="Variance-aware top-m arm selection: simulation, budgets, "
        "and lower bounds.",
        epilog=_BUILTIN_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser(
        "simulate",
        help="seeded Monte Carlo trials of one algorithm on one instance",
    )
    p_sim.add_argument(
        "--algo", choices=["wnelim", "medelim", "vmedelim", "adapted"], default=None
    )
    p_sim.add_argument("--instance", default=None, help="path or builtin:NAME[,k=v...]")
    p_sim.add_argument("--epsilon", type=float, default=None)
    p_sim.add_argument("--delta", type=float, default=None)
    p_sim.add_argument("--m", type=int, default=None)
    p_sim.add_argument("--trials", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None, help="trial seed base (default 0)")
    p_sim.add_argument(
        "--threads", type=int, default=None, help="worker threads (default: all cores)"
    )
    p_sim.add_argument("--config", default=None, help="JSON config file")
    p_sim.set_defaults(func=_cmd_simulate)

    p_cx = sub.add_parser("complexity", help="three-term budget of a variance profile")
    p_cx.add_argument("--sigma2", default=None, help="path or builtin:NAME[,k=v...]")
    p_cx.add_argument("--epsilon", type=float, default=None)
    p_cx.add_argument("--delta", type=float, default=None)
    p_cx.add_argument("--m", type=int, default=None)
    p_cx.add_argument("--gr-mode", choices=["heuristic", "exact"], default=None)
    p_cx.add_argument("--config", default=None)
    p_cx.set_defaults(func=_cmd_complexity)

    p_lb = sub.add_parser("lowerbound", help="dual lower-bound evaluation")
    p_lb.add_argument("--sigma2", default=None, help="path or builtin:NAME[,k=v...]")
    p_lb.add_argument("--epsilon", type=float, default=None)
    p_lb.add_argument("--delta", type=float, default=None)
    p_lb.add_argument("--m", type=int, default=None)
    p_lb.add_argument(
        "--eta", default=None, help="uniform | gm | uniformL | file:PATH"
    )
    p_lb.add_argument("--config", default=None)
    p_lb.set_defaults(func=_cmd_lowerbound)

    p_sw = sub.add_parser("sweep", help="budget comparison across a family")
    p_sw.add_argument("--family", choices=["illustrative"], default=None)
    p_sw.add_argument("--k-range", dest="k_range", default=None, help="A..B inclusive")
    p_sw.add_argument("--epsilon", type=float, default=None)
    p_sw.add_argument("--delta", type=float, default=None)
    p_sw.add_argument("--mode", choices=["rle", "materialized"], default=None)
    p_sw.add_argument("--config", default=None)
    p_sw.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except EnumerationBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
