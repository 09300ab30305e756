"""Command-line front end.

Subcommands: ``bounds``, ``weight-dist``, ``entropy``, ``simulate``, ``sweep``.
Exit codes: 0 success, 1 invalid input, 2 resource guard, 3 I/O failure.
Results go to ``--out``, else ``$ORBLOOM_OUTPUT_DIR``, else ``./results``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import secrets
import sys
from pathlib import Path

from . import analysis, harness
from .analysis import LN2
from .bloom import occupancy_bound, weight_pmf
from .exceptions import OrBloomError, ParameterError, PersistenceError, ResourceError
from .schemes import Scenario
from .validation import check_real

log = logging.getLogger("orbloom")

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_IO = 0, 1, 2, 3

# config/flag aliases for Scenario fields
ALIASES = {"n": "n_users", "N": "n_users", "m": "n_messages", "M": "n_messages",
           "l": "length", "L": "length", "k": "n_hashes", "K": "n_hashes",
           "l2": "length2", "L2": "length2", "k2": "n_hashes2", "K2": "n_hashes2",
           "omega-a": "omega_a", "active-count": "active_count"}
SCENARIO_FIELDS = {f.name: f for f in dataclasses.fields(Scenario)}
RUN_KEYS = {"mode", "trials", "workers"}


class ConfigError(ParameterError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# -- bounds

def cmd_bounds(args) -> int:
    beta = args.beta
    gamma = args.gamma
    rows = []
    unit = "nats/c.u." if args.nats else "bits/c.u."
    scale = LN2 if args.nats else 1.0

    ar = analysis.cost_bounds_ar(beta)
    mt = analysis.cost_bounds_mt(beta, gamma)
    rows.append(("Omega_a interval", f"[{ar.lower:.4f}, {ar.upper:.4f}]", ""))
    rows.append(("Omega_m interval", f"[{mt.lower:.4f}, {mt.upper:.4f}]", f"gamma={gamma:g}"))
    k1, k2 = args.kappa1, args.kappa2
    region = analysis.rate_region_point(k1, k2)
    rows.append(("R1 bound", f"{region.r1_max * scale:.6f}", f"{unit} (kappa1={k1:.4g}, kappa2={k2:.4g})"))
    rows.append(("R2 bound", f"{region.r2_max * scale:.6f}", unit))
    rows.append(("R1+R2 bound", f"{region.sum_max * scale:.6f}", unit))
    corners = region.corners()
    rows.append(("corners in capacity region",
                 str(all(analysis.capacity_membership(c) for c in corners)),
                 "; ".join(f"({c.rates[0] * scale:.4f}, {c.rates[1] * scale:.4f})" for c in corners)))
    thr = analysis.sumrate_threshold(args.kappa, args.eps)
    rows.append(("sum-rate threshold", f"{thr if args.nats else analysis.nats_to_bits(thr):.6f}",
                 f"{unit} (kappa={args.kappa:.4g}, eps={args.eps:g})"))
    rows.append(("entropy limit h2(e^-kappa)", f"{analysis.entropy_limit(args.kappa) * scale:.6f}", unit))
    feasible = analysis.feasibility_mt(k1, k2, beta, gamma)
    rows.append(("two-phase feasible", str(feasible),
                 f"need kappa2 > {(beta + gamma) / LN2:.4f}, kappa1+kappa2 > {(1 + gamma) / LN2:.4f}"))
    width = max(len(r[0]) for r in rows)
    text = "\n".join(f"{name.ljust(width)}  {value}  {note}".rstrip() for name, value, note in rows)
    print(text)
    if args.csv:
        _write_text(Path(args.csv), "quantity,value,note\n"
                    + "".join(f'"{n}","{v}","{u}"\n' for n, v, u in rows))
    return EXIT_OK


# -- weight distribution and entropy

def cmd_weight_dist(args) -> int:
    law = weight_pmf(args.L, args.K)
    lines = ["w,probability" + (",in_envelope" if args.eps is not None else "")]
    if args.eps is not None:
        env = occupancy_bound(args.L, max(args.K, 1), args.eps)
        outside = 0.0
    for w, p in law.pmf.items():
        if args.eps is None:
            lines.append(f"{w},{p!r}")
        else:
            inside = abs((args.L - w) - env.p * args.L) <= args.eps * args.L
            outside += 0.0 if inside else p
            lines.append(f"{w},{p!r},{int(inside)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if args.eps is not None:
        print(f"# azuma bound {env.bound:.6g} (raw {env.raw:.6g}); exact mass outside envelope {outside:.6g}",
              file=sys.stderr)
    return EXIT_OK


def cmd_entropy(args) -> int:
    L, K = args.L, args.K
    if args.K2 is None:
        h = analysis.exact_entropy(L, K)
        limit = analysis.entropy_limit(K / L) if K else 0.0
        print(f"H(BF({L},{K})) = {h:.6f} bits; per position {h / L:.6f}; limit h2(e^-K/L) = {limit:.6f}")
    else:
        h = analysis.exact_conditional_entropy(L, K, args.K2)
        limit = analysis.conditional_entropy_limit(K / L, args.K2 / L) if K and args.K2 else 0.0
        print(f"H(BF1+BF2 | BF1) = {h:.6f} bits; per position {h / L:.6f}; limit = {limit:.6f}")
    return EXIT_OK


# -- simulation

def _scenario_from_args(args) -> Scenario:
    values = {}
    for name in SCENARIO_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return Scenario(**values)


def _resolve_seed(seed):
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed}")
        log.info("no --seed given; using %d", seed)
    return seed


def cmd_simulate(args) -> int:
    args.seed = _resolve_seed(args.seed)
    scenario = _scenario_from_args(args)
    summary, records = harness.run_trials(scenario, args.mode, args.trials, workers=args.workers,
                                          compare=not args.no_compare)
    print(harness.format_table([summary]))
    print(f"errors {summary.errors}/{summary.trials}; causes {summary.cause_counts}; "
          f"misses {summary.miss_count}")
    out = Path(args.out) if args.out else harness.default_output_dir()
    stem = f"simulate_{args.mode}_{summary.fingerprint}"
    for p in harness.persist(records, summary, out, stem=stem):
        print(f"wrote {p}")
    return EXIT_OK


# -- sweeps from config files

def _coerce(name: str, raw: str, lineno: int):
    if name in ("mode", "codebook"):
        return raw
    if name in ("trials", "workers"):
        kind = int
    else:
        f = SCENARIO_FIELDS[name]
        kind = int if "int" in str(f.type) else float
    try:
        if kind is int:
            x = float(raw)
            if not x.is_integer():
                raise ValueError
            return int(x)
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: {name} = {raw!r} is not a valid {kind.__name__}") from None


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines under ``[scenario]`` and ``[sweep <axis>]``
    sections; ``#`` and ``;`` start comments."""
    scenario: dict = {}
    sweeps: list[tuple[str, list]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated section header")
            header = line[1:-1].split()
            if header == ["scenario"]:
                section = "scenario"
            elif len(header) == 2 and header[0] == "sweep":
                if header[1] not in harness.SWEEP_AXES:
                    raise ConfigError(f"line {lineno}: unknown sweep axis {header[1]!r}")
                section = ("sweep", header[1])
                sweeps.append((header[1], None))
            else:
                raise ConfigError(f"line {lineno}: unknown section [{line[1:-1]}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of a section")
        if section == "scenario":
            name = ALIASES.get(key, key)
            if name not in SCENARIO_FIELDS and name not in RUN_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            scenario[name] = _coerce(name, value, lineno)
        else:
            if key != "values":
                raise ConfigError(f"line {lineno}: sweep sections only take 'values'")
            axis = section[1]
            field = harness.SWEEP_AXES[axis]
            items = [v.strip() for v in value.split(",") if v.strip()]
            sweeps[-1] = (axis, [_coerce(field, v, lineno) for v in items])
    for axis, values in sweeps:
        if values is None:
            raise ConfigError(f"sweep over {axis} has no 'values'")
    if not sweeps:
        raise ConfigError("config declares no [sweep <axis>] section")
    return {"scenario": scenario, "sweeps": sweeps}


def cmd_sweep(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot read config {args.config}: {exc}") from exc
    cfg = parse_config(text)
    sc = dict(cfg["scenario"])
    mode = sc.pop("mode", None)
    if mode not in harness.MODES:
        raise ConfigError(f"scenario needs mode = one of {harness.MODES}")
    trials = args.trials if args.trials is not None else sc.pop("trials", 1000)
    sc.pop("trials", None)
    workers = args.workers if args.workers is not None else sc.pop("workers", 1)
    sc.pop("workers", None)
    if args.seed is not None:
        sc["seed"] = args.seed
    if "seed" not in sc:
        sc["seed"] = _resolve_seed(None)
    if "n_users" not in sc:
        # N may be given only through its sweep; any swept value serves as the base
        swept = [values for axis, values in cfg["sweeps"] if axis == "N" and values]
        if not swept:
            raise ConfigError("scenario needs N (or a non-empty [sweep N])")
        sc["n_users"] = swept[0][0]
    base = Scenario(**sc)
    # validate every point before computing anything
    for axis, values in cfg["sweeps"]:
        for v in values:
            harness._params(base.replace(**{harness.SWEEP_AXES[axis]: v}), mode)

    results = []
    for axis, values in cfg["sweeps"]:
        rows = harness.run_sweep(base, axis, values, mode, trials, workers=workers, keep_records=True)
        results.append((axis, rows))
    out = Path(args.out) if args.out else harness.default_output_dir()
    for axis, rows in results:
        print(f"sweep over {axis} ({mode}, {trials} trials per point)")
        print(harness.format_table(rows, axis=axis))
        paths = harness.persist([r.records for r in rows], [r.summary for r in rows], out,
                                stem=f"sweep_{axis}")
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


def _unit_interval(name):
    def parse(s):
        try:
            return check_real(s, name, 0.0, 1.0, low_open=True, high_open=True)
        except ParameterError as exc:
            raise argparse.ArgumentTypeError(f"{name} out of (0,1)") from exc
    return parse


def _nonneg(name):
    def parse(s):
        try:
            return check_real(s, name, low=0.0)
        except ParameterError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="orbloom", description="Bloom-filter coding over OR many-access channels")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", help="cost bounds, rate-region points, thresholds, feasibility")
    p.add_argument("--beta", type=_unit_interval("beta"), required=True)
    p.add_argument("--gamma", type=_nonneg("gamma"), default=0.0)
    p.add_argument("--kappa", type=float, default=LN2, help="single-phase load, K = kappa L / N")
    p.add_argument("--kappa1", type=float, default=LN2 / 2)
    p.add_argument("--kappa2", type=float, default=LN2 / 2)
    p.add_argument("--eps", type=_nonneg("eps"), default=0.0)
    p.add_argument("--nats", action="store_true", help="print rates in nats per channel use")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("weight-dist", help="exact weight pmf of BF(L, K) as CSV")
    p.add_argument("--L", "-l", dest="L", type=int, required=True)
    p.add_argument("--K", "-k", dest="K", type=int, required=True)
    p.add_argument("--eps", type=float, help="mark the Azuma envelope |z - pL| <= eps L")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_weight_dist)

    p = sub.add_parser("entropy", help="exact (conditional) entropy of Bloom filter arrays")
    p.add_argument("--L", "-l", dest="L", type=int, required=True)
    p.add_argument("--K", "-k", dest="K", type=int, required=True)
    p.add_argument("--K2", "-k2", dest="K2", type=int)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("simulate", help="Monte Carlo run of one scheme")
    p.add_argument("--mode", choices=harness.MODES, required=True)
    p.add_argument("--n", dest="n_users", type=int, required=True)
    p.add_argument("--m", dest="n_messages", type=int)
    p.add_argument("--l", dest="length", type=int)
    p.add_argument("--k", dest="n_hashes", type=int)
    p.add_argument("--l2", dest="length2", type=int)
    p.add_argument("--k2", dest="n_hashes2", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega-a", dest="omega_a", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--kappa1", type=float)
    p.add_argument("--kappa2", type=float)
    p.add_argument("--rate", type=float, help="sum rate in bits/c.u.; sets M = 2^(L rate / N)")
    p.add_argument("--active-count", dest="active_count", type=int,
                   help="condition on exactly this many active users")
    p.add_argument("--codebook", choices=("auto", "explicit", "implicit"))
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-compare", action="store_true", help="skip the exact/bound columns")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweeps declared in a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except PersistenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OrBloomError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
