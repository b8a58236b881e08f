"""Command-line pipelines: verify, scan-epsilon, asymptotics, export-body.

Exit codes: 0 counterexample certified (or command succeeded), 1 usage or
configuration error, 2 failed, 3 inconclusive.
"""
import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
import zlib
from dataclasses import dataclass

import numpy as np

from . import __version__
from .asymptotics import DEFAULT_LADDER, ScalingConfig, scaling_experiment, write_asymptotics_csv
from .body import BodyError, body_summary, make_body, write_body_csv
from .convexity import convexity_scan, default_angles, write_convexity_csv
from .numerics import c_n
from .radon import assemble_operator, intersection_certificate
from .sections import section_scan, write_sections_csv
from .sphere import ConfigError

log = logging.getLogger("ibody")

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_INCONCLUSIVE = 0, 1, 2, 3
SCAN_LADDER = (0.8, 0.4, 0.2, 0.1)
BISECT_STEPS = 10

PRESETS = {
    "fast": dict(eps=0.3, grid_resolution=8, subsphere_resolution=8, num_planes=20,
                 num_subspaces=10, m_angles="auto"),
    "full": dict(eps=0.1, grid_resolution=12, subsphere_resolution=12, num_planes=200,
                 num_subspaces=100, m_angles=2048),
}


@dataclass
class RunConfig:
    n: int = 5
    eps: float = 0.1
    x0: object = "e1"
    grid_resolution: object = "auto"
    subsphere_resolution: object = "auto"
    num_planes: int = 200
    num_subspaces: int = 100
    m_angles: object = "auto"
    seed: int = 42
    output_dir: str = "out"
    ladder: tuple = SCAN_LADDER
    asymptotics: bool = False

    def validate(self):
        if int(self.n) != self.n or self.n < 5:
            raise ConfigError(f"n must be an integer >= 5 (every symmetric convex body in "
                              f"dimension <= 4 is an intersection body), got {self.n}")
        if not 0.0 <= self.eps < 1.0:
            raise ConfigError(f"eps must lie in [0, 1), got {self.eps}")
        for name in ("grid_resolution", "subsphere_resolution"):
            v = getattr(self, name)
            if v != "auto" and (int(v) != v or v < 4):
                raise ConfigError(f"{name} must be 'auto' or an integer >= 4, got {v}")
        if self.m_angles != "auto" and (int(self.m_angles) != self.m_angles or self.m_angles < 64):
            raise ConfigError(f"m_angles must be 'auto' or an integer >= 64, got {self.m_angles}")
        if self.num_planes < 1 or self.num_subspaces < 1:
            raise ConfigError("num_planes and num_subspaces must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.x0_vector()
        return self

    def x0_vector(self):
        if isinstance(self.x0, str):
            if self.x0 != "e1":
                raise ConfigError(f"x0 must be 'e1' or a list of {self.n} numbers")
            return np.eye(self.n)[0]
        v = np.asarray(self.x0, dtype=float)
        if v.shape != (self.n,) or not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0:
            raise ConfigError(f"x0 must have {self.n} finite entries")
        return v / np.linalg.norm(v)

    def resolved(self):
        """Copy with every 'auto' replaced by a concrete value."""
        d = dataclasses.asdict(self)
        if d["grid_resolution"] == "auto":
            d["grid_resolution"] = 12
        if d["subsphere_resolution"] == "auto":
            d["subsphere_resolution"] = d["grid_resolution"]
        if d["m_angles"] == "auto":
            d["m_angles"] = default_angles(self.eps)
        d["ladder"] = tuple(d["ladder"])
        return RunConfig(**d)

    def echo(self):
        d = dataclasses.asdict(self)
        d["ladder"] = list(d["ladder"])
        return d


def stage_seed(seed, label):
    """64-bit seed for a pipeline stage, independent of the other stages."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(label.encode())])
    return int(ss.generate_state(1, np.uint64)[0])


# -- serialization -------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return "null"
        s = format(x, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    return json.dumps(x)


def dumps(obj, indent=0):
    """JSON text with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    return _fmt(obj)


def write_json(obj, path):
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")


# -- pipelines -------------------------------------------------------------------

def _overall(body_ok, conv, cert, sections):
    if not body_ok:
        return "failed", "epsilon too large: radial function not positive"
    if cert.verdict == "inconclusive":
        return "inconclusive", "n-dim intersection certificate"
    if any(s.verdict == "inconclusive" for s in sections):
        return "inconclusive", "sections"
    if cert.verdict == "intersection":
        return "failed", "n-dim body IS an intersection body"
    if not conv.J_min > 0:
        return "failed", "convexity: J_min <= 0"
    bad = [s.label for s in sections if s.verdict != "intersection"]
    if bad:
        return "failed", f"section not an intersection body: {bad[0]}"
    return "counterexample_certified", ""


def run_verify(cfg, write=True):
    """Construct the body and run all certificates; returns (report, exit code)."""
    cfg = cfg.resolved()
    out = cfg.output_dir
    report = {"config": cfg.echo()}
    try:
        body = make_body(cfg.n, cfg.eps, cfg.x0_vector(), cfg.grid_resolution)
    except BodyError as exc:
        report["verdict"] = {"status": "failed", "reason": str(exc)}
        if write:
            os.makedirs(out, exist_ok=True)
            write_json(report, os.path.join(out, "report.json"))
        return report, EXIT_FAILED
    log.info("body: rho in [%.6g, %.6g]", body.rho_min, body.rho_max)

    conv = convexity_scan(body, cfg.num_planes, cfg.m_angles, stage_seed(cfg.seed, "convexity"),
                          keep_profiles=write)
    log.info("convexity: J_min = %.6g over %d planes", conv.J_min, conv.num_planes)
    op = assemble_operator(body.grid)
    cert = intersection_certificate(op, body.sampled)
    log.info("n-dim certificate: min preimage %.6g (%s)", cert.min_preimage, cert.verdict)
    sections = section_scan(body, cfg.num_subspaces, stage_seed(cfg.seed, "sections"),
                            cfg.subsphere_resolution)
    log.info("sections: worst min preimage %.6g", sections[0].inner.min_preimage)

    status, reason = _overall(True, conv, cert, sections)
    report.update({
        "body": body_summary(body),
        "convexity": conv.to_dict(),
        "intersection": cert.to_dict(),
        "sections": {
            "count": len(sections),
            "min_inner_preimage": sections[0].inner.min_preimage,
            "max_deficit": max(s.deficit_max for s in sections),
            "all_intersection": all(s.verdict == "intersection" for s in sections),
            "note": "sampled hyperplanes: seeded Haar-random normals plus the two extremal frames",
            "certificates": [s.to_dict() for s in sections],
        },
        "provenance": {"grid_hash": body.grid.digest(), "operator_cache_key": op.cache_key()},
    })
    if cfg.asymptotics:
        report["asymptotics"] = scaling_experiment(cfg.n, DEFAULT_LADDER, x0=cfg.x0_vector()).to_dict()
    report["verdict"] = {"status": status, "reason": reason}
    if write:
        os.makedirs(out, exist_ok=True)
        write_json(report, os.path.join(out, "report.json"))
        write_convexity_csv(conv, os.path.join(out, "convexity.csv"))
        write_sections_csv(sections, os.path.join(out, "sections.csv"))
        write_body_csv(body, os.path.join(out, "body.csv"))
    code = {"counterexample_certified": EXIT_OK, "failed": EXIT_FAILED}.get(status, EXIT_INCONCLUSIVE)
    return report, code


def _checks(cfg, eps):
    """Per-eps row: star shape, convexity, n-dim and worst section preimage."""
    row = {"eps": eps}
    try:
        body = make_body(cfg.n, eps, cfg.x0_vector(), cfg.grid_resolution)
    except BodyError:
        row.update(star=False, convex=False, sections=False, rho_min=None, J_min=None,
                   min_preimage=None, worst_section_preimage=None, verdict="failed")
        return row
    conv = convexity_scan(body, cfg.num_planes, default_angles(eps) if cfg.m_angles == "auto" else cfg.m_angles,
                          stage_seed(cfg.seed, "convexity"))
    cert = intersection_certificate(assemble_operator(body.grid), body.sampled)
    secs = section_scan(body, cfg.num_subspaces, stage_seed(cfg.seed, "sections"), cfg.subsphere_resolution)
    status, _ = _overall(True, conv, cert, secs)
    row.update(star=body.rho_min > 0, convex=conv.J_min > 0,
               sections=all(s.verdict == "intersection" for s in secs),
               rho_min=body.rho_min, J_min=conv.J_min, min_preimage=cert.min_preimage,
               worst_section_preimage=secs[0].inner.min_preimage, verdict=status)
    return row


def _bisect(cfg, key, lo, hi):
    """Shrink [lo, hi] where ``key`` passes at lo and fails at hi."""
    steps = []
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        row = _checks(cfg, mid)
        steps.append({"eps": mid, "pass": bool(row[key])})
        if row[key]:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-3:
            break
    return {"pass_below": lo, "fail_at": hi, "steps": steps}


def scan_epsilon(cfg, ladder=None):
    cfg = cfg.resolved()
    ladder = tuple(cfg.ladder if ladder is None else ladder)
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("ladder must be strictly decreasing")
    rows = [_checks(cfg, e) for e in ladder]
    thresholds, anomalies = {}, []
    for key in ("star", "convex", "sections"):
        passes = [r[key] for r in rows]
        first = next((i for i, p in enumerate(passes) if p), None)
        if first is not None and not all(passes[first:]):
            anomalies.append(f"{key}: fails again below eps={ladder[first]}")
        if first is None:
            thresholds[key] = {"status": "fails at every rung"}
        elif first == 0:
            thresholds[key] = {"status": "passes at every rung", "pass_below": ladder[0]}
        else:
            thresholds[key] = {"status": "bracketed", **_bisect(cfg, key, ladder[first], ladder[first - 1])}
    ball = {"eps": 0.0, "J_min": c_n(cfg.n) ** 2, "min_preimage": 1.0,
            "note": "eps -> 0 limit (ball): J = C_n^2, preimage 1"}
    certified = [r["eps"] for r in rows if r["verdict"] == "counterexample_certified"]
    return {"config": cfg.echo(), "rows": rows, "ball_limit": ball, "thresholds": thresholds,
            "anomalies": anomalies, "largest_certified_rung": max(certified) if certified else None}


# -- argument handling -------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="ibody", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("verify", "scan-epsilon", "asymptotics", "export-body"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields")
        preset = p.add_mutually_exclusive_group()
        preset.add_argument("--fast", action="store_true", help="eps=0.3, small grids")
        preset.add_argument("--full", action="store_true", help="eps=0.1, certification grids")
        p.add_argument("--n", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--grid-resolution", dest="grid_resolution")
        p.add_argument("--subsphere-resolution", dest="subsphere_resolution")
        p.add_argument("--planes", dest="num_planes", type=int)
        p.add_argument("--subspaces", dest="num_subspaces", type=int)
        p.add_argument("--angles", dest="m_angles")
        p.add_argument("--out", dest="output_dir")
        p.add_argument("--ladder", type=lambda s: tuple(float(v) for v in s.split(",")),
                       help="comma-separated decreasing eps values")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            p.add_argument("--asymptotics", action="store_true", help="include the scaling block")
    return ap


def _int_or_auto(v):
    return v if v in (None, "auto") else int(v)


def config_from_args(args):
    # precedence: preset < config file < command-line flags
    fields = {}
    if args.fast or args.full:
        fields.update(PRESETS["fast" if args.fast else "full"])
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        fields.update(data)
    for k in ("n", "eps", "seed", "num_planes", "num_subspaces", "output_dir", "ladder"):
        v = getattr(args, k, None)
        if v is not None:
            fields[k] = v
    for k in ("grid_resolution", "subsphere_resolution", "m_angles"):
        v = getattr(args, k, None)
        if v is not None:
            fields[k] = _int_or_auto(v)
    if getattr(args, "asymptotics", False):
        fields["asymptotics"] = True
    if "ladder" in fields:
        fields["ladder"] = tuple(fields["ladder"])
    return RunConfig(**fields).validate()


def _metadata(started):
    return {"version": __version__, "started_unix": started, "finished_unix": time.time(),
            "python": sys.version.split()[0], "numpy": np.__version__}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError, TypeError, OSError) as exc:
        print(f"ibody: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    started = time.time()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    code = EXIT_OK
    if args.command == "verify":
        report, code = run_verify(cfg)
        print(f"verdict: {report['verdict']['status']} {report['verdict']['reason']}".rstrip())
    elif args.command == "scan-epsilon":
        table = scan_epsilon(cfg)
        write_json(table, os.path.join(out, "report.json"))
        for r in table["rows"]:
            print(f"eps={r['eps']:<6g} star={r['star']} convex={r['convex']} "
                  f"sections={r['sections']} min_preimage={r['min_preimage']}")
    elif args.command == "asymptotics":
        exp = scaling_experiment(cfg.n, cfg.ladder if args.ladder else DEFAULT_LADDER,
                                 ScalingConfig(), x0=cfg.x0_vector())
        write_asymptotics_csv(exp, os.path.join(out, "asymptotics.csv"))
        write_json({"config": cfg.echo(), "asymptotics": exp.to_dict()}, os.path.join(out, "report.json"))
        for k in exp.fits:
            print(f"{k}: slope {exp.preferred(k).slope:.4f}")
    elif args.command == "export-body":
        try:
            body = make_body(cfg.n, cfg.eps, cfg.x0_vector(), cfg.resolved().grid_resolution)
        except BodyError as exc:
            print(f"ibody: {exc}", file=sys.stderr)
            return EXIT_FAILED
        write_json(body_summary(body), os.path.join(out, "body.json"))
        write_body_csv(body, os.path.join(out, "body.csv"))
        print(f"wrote {out}/body.json and {out}/body.csv")
    write_json(_metadata(started), os.path.join(out, "metadata.json"))
    return code


if __name__ == "__main__":
    sys.exit(main())
