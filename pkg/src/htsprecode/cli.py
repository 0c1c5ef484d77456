"""Command line entry points: run, sweep, compare, config.

Settings are layered, later wins: built-in defaults, the --config YAML file,
the --scenario preset, then individual flags (--seed, --loads, --epochs,
--users-per-beam, --scheduler). Outputs go to --out, else $HTSPRECODE_OUT,
else ./out. CSV numbers use 6 significant digits.
"""
import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

from . import __version__
from .config import SCENARIOS, ConfigError, dump_config, parse_config, scenario_config
from .simulator import (TRACE_COLUMNS, CapacityReport, compute_gain, fmt6, read_csv_points, run_scenario,
                        sweep_loads)

OUT_ENV = "HTSPRECODE_OUT"
GAIN_COLUMNS = ("row", "load_gbps", "precoding_served_gbps", "benchmark_served_gbps",
                "served_gain_pct", "upper_bound_gain_pct", "unbounded")

log = logging.getLogger("htsprecode")


@dataclass
class RunManifest:
    command: str
    config_digest: str
    seed: int
    version: str
    started: str
    finished: str = None
    outputs: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Outputs:
    """Collects files written by a command so a failure can remove them all."""

    def __init__(self, out_dir):
        self.dir = out_dir
        self.paths = []

    def write(self, name, text):
        os.makedirs(self.dir, exist_ok=True)
        path = os.path.join(self.dir, name)
        tmp = path + ".part"
        self.paths.append(tmp)
        with open(tmp, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
        self.paths[-1] = path
        return path

    def discard(self):
        for p in self.paths:
            try:
                os.remove(p)
            except FileNotFoundError:
                pass
        self.paths = []


def _parse_loads(text):
    try:
        loads = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"loads must be comma-separated numbers, got {text!r}") from None
    if not loads:
        raise argparse.ArgumentTypeError("need at least one load")
    return loads


def load_config(args):
    """Resolve the scenario config from file, preset and flags."""
    base = {}
    if args.config:
        base = parse_config(args.config).to_dict()
    overrides = {}
    for flag, key in (("seed", "seed"), ("loads", "loads_gbps"), ("epochs", "epochs"),
                      ("users_per_beam", "users_per_beam"), ("scheduler", "scheduler")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = tuple(v) if key == "loads_gbps" else v
    return scenario_config(args.scenario, base=base, **overrides)


def _out_dir(args):
    return args.out or os.environ.get(OUT_ENV) or "out"


def _warn_partial(report):
    for p in report.points:
        if p.failed_epoch is not None:
            log.warning("load %.6g Gbit/s stopped at epoch %d (numeric failure); report is partial",
                        p.load_gbps, p.failed_epoch)


def _format_trace(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in rows:
        w.writerow(r[:4] + tuple(fmt6(x) for x in r[4:]))
    return buf.getvalue()


def _simulate_and_write(args, command, stem, simulate):
    config = load_config(args)
    manifest = RunManifest(command, config.digest(), config.seed, __version__, _now())
    out = _Outputs(_out_dir(args))
    trace = [] if getattr(args, "trace", False) else None
    try:
        report = simulate(config, trace)
        _warn_partial(report)
        manifest.outputs.append(out.write(f"{stem}.json", report.to_json()))
        manifest.outputs.append(out.write(f"{stem}.csv", report.to_csv()))
        if trace is not None:
            manifest.outputs.append(out.write("trace.csv", _format_trace(trace)))
        manifest.outputs.append(out.write("config.yaml", dump_config(config)))
        manifest.finished = _now()
        out.write("manifest.json", manifest.to_json())
    except BaseException:
        out.discard()
        raise
    print(os.path.join(out.dir, f"{stem}.csv"))
    return 0


def cmd_run(args):
    """Simulate the configured loads and write report.{json,csv}."""
    if args.trace and len(load_config(args).loads_gbps) != 1:
        raise ValueError("--trace needs exactly one load")
    return _simulate_and_write(args, "run", "report", lambda c, tr: run_scenario(c, trace=tr))


def cmd_sweep(args):
    """Simulate a load sweep (default: the configured loads) and write sweep.{json,csv}."""
    def simulate(config, _trace):
        reports = sweep_loads(config, config.loads_gbps)
        return CapacityReport(reports[0].scenario | {"config_digest": config.digest()},
                              [r.points[0] for r in reports])

    return _simulate_and_write(args, "sweep", "sweep", simulate)


def gain_table(precoding_points, benchmark_points):
    """Rows of the gain CSV: one per load plus a summary row at the highest load."""
    gains = compute_gain(precoding_points, benchmark_points)
    rows = []
    for g, p, b in zip(gains, precoding_points, benchmark_points):
        rows.append({"row": "load", "load_gbps": g.load_gbps,
                     "precoding_served_gbps": p["served_gbps"], "benchmark_served_gbps": b["served_gbps"],
                     "served_gain_pct": 100 * g.served_gain, "upper_bound_gain_pct": 100 * g.upper_bound_gain,
                     "unbounded": int(g.unbounded)})
    top = max(range(len(rows)), key=lambda i: rows[i]["load_gbps"])
    rows.append(dict(rows[top], row="summary"))
    return rows


def format_gain_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAIN_COLUMNS)
    for r in rows:
        w.writerow([r["row"]] + [fmt6(r[k]) for k in GAIN_COLUMNS[1:-1]] + [r["unbounded"]])
    return buf.getvalue()


def cmd_compare(args):
    """Read a precoding and a benchmark sweep CSV and write gain.csv."""
    precoding = read_csv_points(args.precoding)
    benchmark = read_csv_points(args.benchmark)
    rows = gain_table(precoding, benchmark)
    out = _Outputs(_out_dir(args))
    try:
        path = out.write(args.name, format_gain_csv(rows))
    except BaseException:
        out.discard()
        raise
    print(path)
    return 0


def cmd_config(args):
    """Print the fully resolved config as YAML."""
    sys.stdout.write(dump_config(load_config(args)))
    return 0


def _add_scenario_args(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), help="named preset applied over the file")
    p.add_argument("--seed", type=int)
    p.add_argument("--loads", type=_parse_loads, help="per-beam loads in Gbit/s, e.g. 0.5,1,4")
    p.add_argument("--epochs", type=int)
    p.add_argument("--users-per-beam", type=int)
    p.add_argument("--scheduler", choices=("fair", "random"))


def build_parser():
    ap = argparse.ArgumentParser(prog="htsprecode", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        _add_scenario_args(p)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
        p.set_defaults(func=fn)
        if name == "run":
            p.add_argument("--trace", action="store_true", help="also write the per-frame schedule trace")

    p = sub.add_parser("compare", help=cmd_compare.__doc__)
    p.add_argument("precoding", help="sweep CSV of the precoding scenario")
    p.add_argument("benchmark", help="sweep CSV of the benchmark")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    p.add_argument("--name", default="gain.csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("config", help=cmd_config.__doc__)
    _add_scenario_args(p)
    p.set_defaults(func=cmd_config)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"htsprecode: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("htsprecode: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
