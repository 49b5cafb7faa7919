"""Command-line front end.

    kgsplit run --scheme SABA2 --tau 0.0185 --t-end 1e5 --out saba2.csv
    kgsplit bench --config fig3            # shipped preset, or a path
    kgsplit calibrate --scheme ABA864
    kgsplit order-check
    kgsplit schemes

Config files are flat ``key = value`` lines whose keys are the long flag
names without dashes prefix (``t-end = 1e5``).  Flags given on the command
line override the file.  Exit status: 0 ok, 1 usage error, 2 runtime abort;
aborts print one ``kgsplit: error=<kind> ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import io
import logging
import math
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from kgsplit import harness
from kgsplit.lattice import LatticeError, load_lattice, make_lattice, save_lattice
from kgsplit.schemes import CATALOG_NAMES, SchemeError, catalog_scheme, format_catalog

CSV_COLUMNS = ("t", "log10_ree", "log10_m2", "p", "wall_seconds", "grad_evals")
LOG_ZERO = -16.0
CONFIG_KEYS = ("scheme", "tau", "sites", "w", "seed", "energy", "t-end", "samples", "out")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- config files ---------------------------------------------------------------


def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in CONFIG_KEYS:
            raise UsageError(f"config line {lineno}: expected one of {', '.join(CONFIG_KEYS)} as 'key = value'")
        out[key] = value.strip()
    return out


def format_config(cfg: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.items())


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("kgsplit.presets").iterdir() if p.name.endswith(".cfg"))


def read_config(ref: str) -> dict[str, str]:
    """Load a config from a path, or from a shipped preset by bare name (``fig1``)."""
    path = Path(ref)
    if path.is_file():
        return parse_config(path.read_text())
    preset = resources.files("kgsplit.presets").joinpath(f"{ref}.cfg")
    if preset.is_file():
        return parse_config(preset.read_text())
    raise UsageError(f"no config file or preset named {ref!r} (presets: {', '.join(preset_names())})")


# -- CSV ------------------------------------------------------------------------


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else LOG_ZERO


def format_csv(result: harness.RunResult) -> str:
    cfg = result.config
    buf = io.StringIO()
    buf.write(
        f"# scheme={cfg.scheme} tau={cfg.tau!r} sites={cfg.n} w={cfg.w!r} seed={cfg.seed} "
        f"energy={cfg.energy!r} t_end={cfg.t_end!r}\n"
    )
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in result.records:
        row = (repr(float(r.t)), repr(_log10(r.ree)), repr(_log10(r.m2)), repr(r.p), repr(r.wall_seconds), str(r.grad_evals))
        buf.write(",".join(row) + "\n")
    if result.failure:
        buf.write(f"# FAILED {result.failure}\n")
    return buf.getvalue()


def write_csv(result: harness.RunResult, path) -> None:
    Path(path).write_text(format_csv(result))


# -- argument handling ----------------------------------------------------------


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _count(text: str) -> int:
    value = _number(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def _add_common(p: argparse.ArgumentParser, lists: bool = False) -> None:
    p.add_argument("--config", help="config file path or preset name")
    p.add_argument("--scheme", help="scheme name" + (" (comma-separated list)" if lists else ""))
    p.add_argument("--tau", help="step size" + (" (comma-separated list)" if lists else ""))
    p.add_argument("--sites", type=_count, help="lattice size N (default 1000)")
    p.add_argument("--w", type=_number, help="coupling/disorder parameter W (default 4)")
    p.add_argument("--seed", type=_count, help="disorder seed (default 1)")
    p.add_argument("--energy", type=_number, help="initial packet energy (default 0.4)")
    p.add_argument("--t-end", dest="t_end", type=_number, help="final time (default 1e5)")
    p.add_argument("--samples", type=_count, help="log-spaced observation count (default 60)")
    p.add_argument("--out", help="output CSV file (run) or directory (bench)")
    p.add_argument("--lattice", help="load the disorder realization from this file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgsplit", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="one experiment -> CSV + summary")
    _add_common(run)
    bench = sub.add_parser("bench", help="multi-scheme comparison table")
    _add_common(bench, lists=True)
    bench.add_argument("--jobs", type=_count, help=f"parallel runs (default ${harness.BENCH_JOBS_ENV} or 1)")
    cal = sub.add_parser("calibrate", help="largest tau meeting an energy-error target")
    _add_common(cal)
    cal.add_argument("--target", type=_number, default=1e-5, help="max relative energy error (default 1e-5)")
    cal.add_argument("--horizon", type=_number, default=1e3, help="calibration run length (default 1e3)")
    sub.add_parser("order-check", help="fitted convergence slopes for all catalog schemes")
    sub.add_parser("schemes", help="dump the coefficient catalog")
    lat = sub.add_parser("lattice", help="write a disorder realization file")
    _add_common(lat)
    return parser


def _merged(args) -> dict[str, str]:
    merged = read_config(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            merged[key] = str(value)
    return merged


def _field(merged, key, conv, default=None):
    if key not in merged:
        if default is None:
            raise UsageError(f"missing required setting --{key}")
        return default
    try:
        return conv(merged[key])
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"bad value for {key}: {merged[key]!r} ({exc})") from None


def _configs(merged, lists: bool) -> list[harness.RunConfig]:
    if "scheme" not in merged or "tau" not in merged:
        raise UsageError("both --scheme and --tau are required")
    schemes = [s.strip() for s in merged["scheme"].split(",")] if lists else [merged["scheme"].strip()]
    taus = [_number(t) for t in merged["tau"].split(",")] if lists else [_field(merged, "tau", _number)]
    if len(schemes) != len(taus):
        raise UsageError(f"{len(schemes)} schemes but {len(taus)} tau values")
    for s in schemes:
        if s not in CATALOG_NAMES:
            raise UsageError(f"unknown scheme {s!r}; valid names: {', '.join(CATALOG_NAMES)}")
    common = dict(
        n=_field(merged, "sites", _count, 1000),
        w=_field(merged, "w", _number, 4.0),
        seed=_field(merged, "seed", _count, 1),
        energy=_field(merged, "energy", _number, 0.4),
        t_end=_field(merged, "t-end", _number, 1e5),
        samples=_field(merged, "samples", _count, 60),
        out=merged.get("out"),
    )
    try:
        return [harness.RunConfig(scheme=s, tau=t, **common) for s, t in zip(schemes, taus)]
    except harness.ConfigError as exc:
        raise UsageError(str(exc)) from None


def _lattice_for(args, cfg: harness.RunConfig):
    if getattr(args, "lattice", None):
        lat = load_lattice(args.lattice)
        if lat.n != cfg.n and "sites" in _merged(args):
            raise UsageError(f"lattice file has {lat.n} sites, --sites says {cfg.n}")
        return lat
    return make_lattice(cfg.n, cfg.w, cfg.seed)


class Abort(Exception):
    def __init__(self, kind: str, detail: str):
        super().__init__(f"error={kind} {detail}")


def _cmd_run(args, out) -> int:
    (cfg,) = _configs(_merged(args), lists=False)
    lat = _lattice_for(args, cfg)
    if args.lattice:
        seed = lat.seed if lat.seed is not None else cfg.seed
        cfg = replace(cfg, n=lat.n, w=lat.w, seed=seed)
    result = harness.run_experiment(cfg, lat)
    text = format_csv(result)
    summary = harness.format_bench_table([result.summary])
    if cfg.out:
        Path(cfg.out).write_text(text)
        print(summary, file=out)
    else:
        out.write(text)
        print(summary, file=sys.stderr)
    if result.failure:
        raise Abort("blowup", f"scheme={cfg.scheme} {result.failure}")
    return 0


def _cmd_bench(args, out) -> int:
    cfgs = _configs(_merged(args), lists=True)
    rows, results = harness.bench_suite(cfgs, jobs=args.jobs)
    print(harness.format_bench_table(rows), file=out)
    if cfgs[0].out:
        outdir = Path(cfgs[0].out)
        outdir.mkdir(parents=True, exist_ok=True)
        for res in results:
            write_csv(res, outdir / f"{res.config.scheme}_tau{res.config.tau!r}.csv")
    failed = [r for r in rows if r.failure]
    if failed:
        raise Abort("blowup", " ".join(f"scheme={r.scheme}" for r in failed))
    return 0


def _cmd_calibrate(args, out) -> int:
    merged = _merged(args)
    merged.setdefault("tau", "1")
    (cfg,) = _configs(merged, lists=False)
    lat = _lattice_for(args, cfg)
    try:
        tau = harness.calibrate_tau(cfg.scheme, lat, args.target, args.horizon, cfg.energy)
    except harness.CalibrationError as exc:
        raise Abort("calibration", f"scheme={cfg.scheme} {exc}") from None
    print(f"{cfg.scheme} tau={tau!r}", file=out)
    return 0


def _cmd_order_check(args, out) -> int:
    for name in CATALOG_NAMES:
        fit = harness.measure_order(name)
        print(f"{name:8s} order={catalog_scheme(name).order:8s} slope={fit.slope:.3f}", file=out)
    return 0


def _cmd_schemes(args, out) -> int:
    print(format_catalog(), file=out)
    return 0


def _cmd_lattice(args, out) -> int:
    merged = _merged(args)
    if "out" not in merged:
        raise UsageError("--out is required")
    n = _field(merged, "sites", _count, 1000)
    lat = make_lattice(n, _field(merged, "w", _number, 4.0), _field(merged, "seed", _count, 1))
    save_lattice(lat, merged["out"])
    return 0


COMMANDS = {
    "run": _cmd_run,
    "bench": _cmd_bench,
    "calibrate": _cmd_calibrate,
    "order-check": _cmd_order_check,
    "schemes": _cmd_schemes,
    "lattice": _cmd_lattice,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"kgsplit: usage: {exc}", file=sys.stderr)
        return 1
    except (SchemeError, LatticeError, OSError) as exc:
        print(f"kgsplit: usage: {exc}", file=sys.stderr)
        return 1
    except Abort as exc:
        print(f"kgsplit: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
