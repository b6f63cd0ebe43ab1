"""Command-line front end.

Usage::

    annulus-action invariants --spec twist.spec --out results/
    annulus-action verify --spec twist.spec --kmax 5
    annulus-action diagram --spec example_4_3.spec --format svg

Exit codes: 0 success, 2 parse/validation error, 3 map not rigid near the
boundary, 4 numerical non-convergence.
"""
import argparse
import math
from pathlib import Path
import sys
import warnings

import numpy as np

from . import analysis as AN
from . import report as R
from .action import ActionField, flux
from .embedding import embed, embedding_report, large_a_limits
from .errors import AnnulusActionError, ParseError
from .orbits import ActionTable, birkhoff_many, find_periodic_orbits
from .specfile import SpecFile, is_spec_file, load_spec
from .mapdef import parse_map_line

COMMANDS = ("invariants", "orbits", "verify", "diagram", "embed")
FORMATS = {
    "invariants": ("json",),
    "orbits": ("json", "csv"),
    "verify": ("json",),
    "diagram": ("svg", "csv", "json"),  # svg also writes the csv
    "embed": ("json",),
}
DEFAULTS = {
    "k_max": 8,
    "grid": 32,
    "tol": AN.DEFAULT_TOL,
    "a": AN.DEFAULT_A,
    "birkhoff_n": 0,
    "birkhoff_starts": 0,
    "seed": 0,
    "m_min": None,
    "m_max": None,
}
# Birkhoff runs with more samples than this read g from a spline table
TABLE_THRESHOLD = 20_000


def _floats(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part in ("inf", "infinity"):
            out.append(math.inf)
        else:
            try:
                out.append(float(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"not a number: {part!r}") from None
    return tuple(out)


def build_parser():
    p = argparse.ArgumentParser(
        prog="annulus-action",
        description="Action functions, Calabi invariants and periodic orbits of "
                    "area-preserving annulus and disk maps.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", required=True, metavar="PATH",
                   help="map spec file, or a file holding one map line")
    p.add_argument("--out", default=".", metavar="DIR", help="output directory")
    p.add_argument("--kmax", type=int, dest="k_max", help="largest period searched")
    p.add_argument("--grid", type=int, help="seed lattice size per side")
    p.add_argument("--tol", type=float, help="tolerance of inequality checks")
    p.add_argument("--a", type=_floats, metavar="LIST",
                   help="comma-separated a values, e.g. 0,0.5,1,inf")
    p.add_argument("--birkhoff-n", type=int, dest="birkhoff_n", help="iterates per sample")
    p.add_argument("--birkhoff-starts", type=int, dest="birkhoff_starts",
                   help="number of random Birkhoff starts")
    p.add_argument("--seed", type=int, help="seed for random starts")
    p.add_argument("--format", dest="fmt", help="output format (per command)")
    p.add_argument("--workers", type=int, default=1,
                   help="threads for the orbit search (does not change results)")
    return p


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read spec {path}: {exc.strerror}") from None
    if is_spec_file(text):
        return load_spec(text)
    return SpecFile(parse_map_line(text.strip("\n")))


def resolve(args, spec):
    """Fully explicit config: command line over [tasks] over defaults."""
    cfg = {"command": args.command, "spec": str(args.spec)}
    for key, default in DEFAULTS.items():
        val = getattr(args, key, None)
        if val is None:
            val = spec.tasks.get(key, default)
        cfg[key] = list(val) if isinstance(val, tuple) else val
    fmts = FORMATS[args.command]
    if args.fmt is not None and args.fmt not in fmts:
        raise ParseError(f"--format {args.fmt} is not available for {args.command} "
                         f"(choose from {', '.join(fmts)})")
    cfg["format"] = args.fmt or fmts[0]
    cfg["normalization"] = spec.normalization.describe()
    if cfg["k_max"] < 1 or cfg["grid"] < 8:
        raise ParseError("need --kmax >= 1 and --grid >= 8")
    return cfg


class Run:
    """Shared state of one command: map, field, lazily built atlas."""

    def __init__(self, spec, cfg, workers=1):
        self.map = spec.map
        self.cfg = cfg
        self.workers = workers
        self.field = ActionField(self.map, normalization=spec.normalization)
        self.header = R.header(self.map, cfg)
        self._atlas = None
        self._inv = None

    @property
    def disk(self):
        return self.map.chart.kind == "disk"

    @property
    def atlas(self):
        if self._atlas is None:
            m = (self.cfg["m_min"], self.cfg["m_max"])
            m_range = None if m == (None, None) else (
                -10**9 if m[0] is None else m[0], 10**9 if m[1] is None else m[1])
            self._atlas = find_periodic_orbits(self.map, self.cfg["k_max"], m_range,
                                               self.cfg["grid"], self.field, self.workers)
        return self._atlas

    @property
    def inv(self):
        if self._inv is None:
            self._inv = AN.compute_invariants(self.map, self.field)
        return self._inv

    def atlas_body(self):
        a = self.atlas
        return {"k_max": a.k_max, "grid": a.grid, "dropped_seeds": a.dropped,
                "count": len(a), "orbits": [o.to_dict() for o in a]}


def cmd_invariants(run):
    fr = flux(run.map)
    g_lo, g_hi = run.field.boundary_values
    inv = run.inv
    body = {"invariants": {
        "theta0": inv.theta0, "theta1": inv.theta1, "F": fr.flux, "Cal": inv.Cal,
        "g_A0": g_lo, "g_A1": g_hi, "flux_path_gap": fr.path_gap,
        "form": run.field.form.describe(), "chart": run.map.chart.describe(),
    }}
    return {"invariants.json": R.dumps(run.header, body)}, body["invariants"]


def cmd_orbits(run):
    if run.cfg["format"] == "csv":
        pts = AN.orbit_points(run.atlas)
        return {"atlas.csv": R.diagram_csv(run.header, pts)}, {"orbits": len(run.atlas)}
    return {"atlas.json": R.dumps(run.header, run.atlas_body())}, {"orbits": len(run.atlas)}


def cmd_verify(run):
    tol = run.cfg["tol"]
    atlas = run.atlas
    inv = run.inv
    verdicts = [AN.check_sandwich(run.map, run.field, atlas, tol, cal=inv.Cal)]
    if run.disk:
        verdicts.append(AN.check_disk_map(run.map, run.field, atlas, tol, cal=inv.Cal))
    else:
        verdicts += AN.check_main_theorem(run.map, run.field, atlas, tol, run.cfg["a"], inv)
        verdicts += AN.check_conjecture(run.map, run.field, atlas, tol, inv)
        for a in run.cfg["a"]:
            if math.isinf(a):
                continue
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                dm = embed(run.map, a)
            v = AN.check_hutchings_disk(dm, atlas, tol)
            v.name = f"disk a={a:g}"
            v.notes += [str(w.message) for w in caught]
            verdicts.append(v)
    unsound = [v.name for v in verdicts if not AN.recheck(v, inv)]
    body = {"invariants": inv.as_dict(), "atlas": {"k_max": atlas.k_max, "count": len(atlas)},
            "verdicts": [v.to_dict() for v in verdicts], "recheck_failures": unsound}
    summary = {v.name: v.status for v in verdicts}
    return {"verdicts.json": R.dumps(run.header, body)}, summary


def _birkhoff(run):
    n, starts = run.cfg["birkhoff_n"], run.cfg["birkhoff_starts"]
    if n < 2 or starts < 1:
        return []
    rng = np.random.default_rng(run.cfg["seed"])
    c = run.map.chart
    u = rng.uniform(0.0, 1.0, starts)
    # starts uniform with respect to area
    x = np.sqrt(u) if run.disk else c.x_min + (c.x_max - c.x_min) * u
    S = np.column_stack([x, rng.uniform(0.0, 1.0, starts)])
    table = ActionTable(run.field) if n * starts > TABLE_THRESHOLD else None
    return birkhoff_many(run.map, run.field, S, n, table)


def cmd_diagram(run):
    samples = _birkhoff(run)
    a_values = () if run.disk else run.cfg["a"]
    d = AN.diagram_for(run.map, run.atlas, samples, a_values, run.inv)
    summary = {"points": len(d.points), "rho_range": d.rho_range,
               "action_range": d.action_range}
    fmt = run.cfg["format"]
    if fmt == "json":
        body = {"points": [p.row() for p in d.points], "hull": d.hull, "theta0": d.theta0,
                "a_lines": d.a_lines, "overlap": [p.row() for p in d.overlap]}
        return {"diagram.json": R.dumps(run.header, body)}, summary
    files = {"diagram.csv": R.diagram_csv(run.header, d.points)}
    if fmt == "svg":
        files["diagram.svg"] = R.diagram_svg(d, run.map.to_text())
    return files, summary


def cmd_embed(run):
    if run.disk:
        raise ParseError("embed needs an annulus map")
    a_values = [a for a in run.cfg["a"] if not math.isinf(a)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = embedding_report(run.map, a_values, list(run.atlas))
    inv = run.inv
    limits = large_a_limits(inv.F, inv.Cal, inv.theta0, list(run.atlas))
    body = {"embedding": rows, "large_a": limits,
            "warnings": sorted({str(w.message) for w in caught})}
    summary = {f"a={r['a']:g}": max([r["center_action"]["gap"], r["calabi"]["gap"]]
                                    + [o["gap"] for o in r["orbits"]]) for r in rows}
    return {"embedding.json": R.dumps(run.header, body)}, summary


HANDLERS = {"invariants": cmd_invariants, "orbits": cmd_orbits, "verify": cmd_verify,
            "diagram": cmd_diagram, "embed": cmd_embed}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = load(args.spec)
        cfg = resolve(args, spec)
        run = Run(spec, cfg, max(1, args.workers))
        files, summary = HANDLERS[args.command](run)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    except AnnulusActionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for key, val in summary.items():
        print(f"{key}: {_show(val)}")
    for name in files:
        print(f"wrote {out / name}")
    return 0


def _show(v):
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_show(x) for x in v) + "]"
    if isinstance(v, float):
        return R.fmt(v)
    return str(v)


if __name__ == "__main__":
    sys.exit(main())
