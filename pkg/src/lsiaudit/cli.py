"""Command-line entry point: ``lsiaudit <command> [flags]``.

Commands: ``theta``, ``deficit``, ``abp-audit``, ``shapes``, ``report``.
Exit codes: 0 success, 1 bad input or configuration, 2 an audited
invariant failed, 3 a numerical solver failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import abp, functional, io
from . import theta as gauss
from .ambient import Cone, Paraboloid, avr_estimate, load_model_config, parse_model
from .errors import DomainError, NumericalError, UnsupportedOperation, UsageError
from .submanifold import (
    GENERATORS,
    ClosedCurve,
    CurveOnSurface,
    integrate,
    parse_shape_spec,
    random_positive_field,
)

log = logging.getLogger("lsiaudit")

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("theta", "deficit", "abp-audit", "shapes", "report")
THETA_PRESETS = {"euclidean": 1.0, "paraboloid": 2.0}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    out: Path
    model: Optional[str] = None
    shape: Optional[str] = None
    f_spec: Optional[str] = None
    theta: Optional[str] = None
    r_grid: List[float] = field(default_factory=list)
    seed: int = 0
    tol_deficit: float = functional.EPS_DISC
    tol_monotone: float = gauss.MONOTONE_TOL
    tol_contact: Optional[float] = None
    ygrid: float = abp.Y_STEP
    targets: int = 1000
    disk_radius: Optional[float] = None
    inputs: List[Path] = field(default_factory=list)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("tol_deficit", "tol_monotone", "tol_contact", "ygrid", "disk_radius"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name.replace('_', '-')} must be a positive number")
        if self.r_grid and (np.any(np.asarray(self.r_grid) <= 0) or np.any(np.diff(self.r_grid) <= 0)):
            raise ConfigError("r-grid must be positive and increasing")
        if self.targets < 1:
            raise ConfigError("targets must be at least 1")
        return self

    def as_dict(self):
        d = dict(self.__dict__)
        d["out"] = str(self.out)
        d["inputs"] = [str(p) for p in self.inputs]
        return d


# --- parsing ---------------------------------------------------------------


def parse_r_grid(text: str) -> List[float]:
    """``1,10,100``; ``1..1e4`` (four points per decade); ``1..1e4:9``."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if ".." in part:
            rng, _, count = part.partition(":")
            a, b = (float(t) for t in rng.split(".."))
            if not (0 < a < b):
                raise ConfigError(f"bad r range {part!r}")
            n = int(count) if count else int(round(4 * math.log10(b / a))) + 1
            out.extend(np.geomspace(a, b, max(n, 2)).tolist())
        else:
            out.append(float(part))
    return out


def read_config_file(path) -> dict:
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        cfg[k.replace("-", "_")] = v
    return cfg


def build_parser():
    p = argparse.ArgumentParser(prog="lsiaudit", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value file; command-line flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("theta", help="Gaussian ratio rho(r) and its limit")
    common(sp)
    sp.add_argument("--model", help="euclidean:2, paraboloid:a=1, cylinder:radius=1, cone:beta=0.5 or a config file")
    sp.add_argument("--r", dest="r", action="append", help="r grid: list or a..b[:n]")
    sp.add_argument("--tol-monotone", type=float, default=None)

    sp = sub.add_parser("deficit", help="log-Sobolev deficit of a shape")
    common(sp)
    sp.add_argument("--shape", help="generator spec (circle:radius=1.4,n=512) or a .json/.obj file")
    sp.add_argument("--f", dest="f_spec", help="const:c | random[:seed] | unit-mass | path.csv")
    sp.add_argument("--theta", help="number, or preset 'euclidean' (1) / 'paraboloid' (2)")
    sp.add_argument("--tol-deficit", type=float, default=None)

    sp = sub.add_parser("abp-audit", help="transport-proof audit on a planar curve")
    common(sp)
    sp.add_argument("--shape")
    sp.add_argument("--f", dest="f_spec")
    sp.add_argument("--r", dest="r", action="append")
    sp.add_argument("--ygrid", type=float, default=None, help="normal-offset grid step")
    sp.add_argument("--targets", type=int, default=None)
    sp.add_argument("--disk-radius", type=float, default=None)
    sp.add_argument("--tol-contact", type=float, default=None)

    sp = sub.add_parser("shapes", help="write a generated shape to disk")
    common(sp)
    sp.add_argument("--shape")
    sp.add_argument("--f", dest="f_spec")
    sp.add_argument("--list", action="store_true", help="list generators")

    sp = sub.add_parser("report", help="consolidate earlier run outputs")
    common(sp)
    sp.add_argument("--inputs", action="append", help="directories holding theta/deficit/abp JSON")
    return p


def make_config(args) -> RunConfig:
    cfg = read_config_file(args.config) if args.config else {}

    def pick(name, conv=str, default=None):
        v = getattr(args, name, None)
        if v is None and name in cfg:
            try:
                v = conv(cfg[name])
            except ValueError:
                raise ConfigError(f"config value for {name!r} is not valid") from None
        return default if v is None else v

    r_text = getattr(args, "r", None)
    r_grid = []
    if r_text:
        for t in r_text:
            r_grid += parse_r_grid(t)
    elif "r" in cfg:
        r_grid = parse_r_grid(cfg["r"])
    inputs = getattr(args, "inputs", None) or ([cfg["inputs"]] if "inputs" in cfg else [])
    inputs = [Path(s) for t in inputs for s in str(t).split(",") if s]
    return RunConfig(
        command=args.command,
        out=Path(pick("out", str, ".")),
        model=pick("model"),
        shape=pick("shape"),
        f_spec=pick("f_spec") or cfg.get("f"),
        theta=pick("theta"),
        r_grid=r_grid,
        seed=pick("seed", int, 0),
        tol_deficit=pick("tol_deficit", float, functional.EPS_DISC),
        tol_monotone=pick("tol_monotone", float, gauss.MONOTONE_TOL),
        tol_contact=pick("tol_contact", float, None),
        ygrid=pick("ygrid", float, abp.Y_STEP),
        targets=pick("targets", int, 1000),
        disk_radius=pick("disk_radius", float, None),
        inputs=inputs,
    ).validate()


# --- helpers ---------------------------------------------------------------


def _load_model(text):
    if text is None:
        raise ConfigError("--model is required")
    if Path(text).is_file():
        return load_model_config(text)
    return parse_model(text)


def _load_shape(text):
    if text is None:
        raise ConfigError("--shape is required")
    p = Path(text)
    if p.suffix.lower() in (".json", ".obj"):
        if not p.is_file():
            raise ConfigError(f"shape file {text} not found")
        return io.load_shape(p)
    return parse_shape_spec(text)


def _apply_field(shape, spec, seed):
    if spec is None:
        return shape
    kind, _, arg = spec.partition(":")
    if kind == "const":
        return shape.with_field(np.full(shape.n_vertices, float(arg or 1.0)))
    if kind == "random":
        return shape.with_field(random_positive_field(shape, int(arg) if arg else seed))
    if kind == "unit-mass":
        return shape.with_field(shape.f / integrate(shape, shape.f))
    p = Path(spec)
    if p.is_file():
        return shape.with_field(io.load_field_csv(p))
    raise ConfigError(f"cannot interpret --f {spec!r}")


def _theta_value(text):
    if text is None:
        raise ConfigError("--theta is required (a number or a preset)")
    if text in THETA_PRESETS:
        if text == "paraboloid":
            log.warning(
                "theta preset 'paraboloid' uses the claimed limit 2; the measured "
                "Gaussian ratio of the paraboloid decays to 0 (see `lsiaudit theta --model paraboloid:a=1`)"
            )
        return THETA_PRESETS[text]
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"--theta must be positive or one of {sorted(THETA_PRESETS)}") from None
    if not v > 0:
        raise ConfigError("--theta must be positive")
    return v


def _meta(cfg):
    return {"command": cfg.command, "config": cfg.as_dict()}


# --- commands --------------------------------------------------------------


def run_theta(cfg: RunConfig) -> int:
    model = _load_model(cfg.model)
    r = cfg.r_grid or parse_r_grid("1..1e3")
    base = model.base_point()
    notes = []
    try:
        est = gauss.estimate_theta(model, base, r).to_dict()
    except DomainError as e:
        if "r_grid" not in str(e):
            raise
        # too short to extrapolate; tabulate anyway
        vals = [gauss.rho(model, base, float(x)) for x in r]
        est = {
            "r_grid": r,
            "rho_values": vals,
            "extrapolated_theta": float(min(vals)),
            "monotone_flag": bool(np.all(np.diff(vals) <= cfg.tol_monotone)),
            "tail_bound_used": None,
            "fit_stderr": None,
            "condition_P_satisfied": None,
            "fit_params": None,
            "notes": [f"{e}; no extrapolation, theta bracketed by the last sample"],
        }
    vals = np.asarray(est["rho_values"])
    mono_ok = np.concatenate([[True], np.diff(vals) <= cfg.tol_monotone])
    checks = {
        "monotone": bool(np.all(mono_ok)),
        "theta_below_min_rho": est["extrapolated_theta"] <= float(vals.min()) + 1e-6,
        "finite": bool(np.all(np.isfinite(vals))),
    }
    out = {**_meta(cfg), "model": model.describe(), "estimate": est}
    if isinstance(model, Paraboloid):
        audit = gauss.paraboloid_audit(model.a, r if len(r) >= 4 else (1, 10, 100, 1000, 10000))
        out["paraboloid_audit"] = audit
        checks["rho_at_most_2"] = audit["bound_2_holds"]
    if isinstance(model, Cone):
        out["avr_oracle"] = avr_estimate(model, np.asarray(r)).estimate
    out["checks"] = checks
    out["status"] = "PASS" if all(checks.values()) else "FAIL"
    io.write_json(cfg.out / "theta.json", out)
    io.write_csv(cfg.out / "rho.csv", ["r", "rho", "monotone_ok"], zip(map(float, r), map(float, vals), map(bool, mono_ok)))
    print(f"theta: {model.kind} extrapolated {est['extrapolated_theta']:.6g} [{out['status']}]")
    return EXIT_OK if out["status"] == "PASS" else EXIT_FAIL


def run_deficit(cfg: RunConfig) -> int:
    shape = _apply_field(_load_shape(cfg.shape), cfg.f_spec, cfg.seed)
    th = _theta_value(cfg.theta)
    rep = functional.deficit(shape, None, th)
    ok = rep.deficit >= -cfg.tol_deficit * rep.mass
    out = {
        **_meta(cfg),
        "shape_checksum": shape.checksum(),
        "report": rep.to_dict(),
        "tolerance": cfg.tol_deficit * rep.mass,
        "status": "PASS" if ok else "FAIL",
    }
    if isinstance(shape, CurveOnSurface) and isinstance(shape.surface, Paraboloid):
        measured = gauss.paraboloid_audit(shape.surface.a)["extrapolated_theta"]
        out["corollary"] = functional.corollary_report(shape, None, measured)
    io.write_json(cfg.out / "deficit.json", out)
    rows = [(k, getattr(rep, k)) for k in ("mass", "entropy_term", "dirichlet_term", "curvature_term", "rhs", "deficit")]
    io.write_csv(cfg.out / "deficit.csv", ["term", "value"], rows)
    print(f"deficit: {rep.deficit:.10g} (mass {rep.mass:.6g}, theta {th:g}) [{out['status']}]")
    return EXIT_OK if ok else EXIT_FAIL


def run_abp(cfg: RunConfig) -> int:
    shape = _apply_field(_load_shape(cfg.shape), cfg.f_spec, cfg.seed)
    if not isinstance(shape, ClosedCurve) or isinstance(shape, CurveOnSurface) or shape.ambient_dim != 2:
        raise ConfigError("abp-audit needs a planar curve")
    r_values = cfg.r_grid or [1.0]
    try:
        setup = abp.solve_potential(shape)
    except NumericalError as e:
        log.error("potential solve failed: %s %s", e, e.diagnostics)
        return EXIT_SOLVER
    audits, rows = [], []
    for r in r_values:
        s = setup.with_r(r, cfg.tol_contact)
        ys = abp.y_grid_for(s, step=cfg.ygrid)
        try:
            a = abp.run_audit(s, ys, n_targets=cfg.targets, disk_radius=cfg.disk_radius, seed=cfg.seed)
        except NumericalError as e:
            audits.append({"r": r, "error": str(e), "diagnostics": e.diagnostics, "passed": False})
            continue
        d = a.to_dict()
        d["r"] = r
        audits.append(d)
        m = a.margins
        for k in range(m["vertex"].size):
            rows.append(
                (
                    float(r),
                    int(m["vertex"][k]),
                    float(m["y"][k]),
                    float(m["slack"][k]),
                    float(m["lemma31_gap"][k]),
                    float(m["psd"][k]),
                    float(m["jacobian_closed_form"][k]),
                    float(m["jacobian_fd"][k]),
                    float(m["lemma37_margin"][k]),
                )
            )
    ok = all(a["passed"] for a in audits)
    out = {**_meta(cfg), "shape_checksum": shape.checksum(), "audits": audits, "status": "PASS" if ok else "FAIL"}
    io.write_json(cfg.out / "abp.json", out)
    header = ["r", "vertex", "y", "slack", "lemma31_gap", "psd", "jacobian_closed_form", "jacobian_fd", "lemma37_margin"]
    io.write_csv(cfg.out / "margins.csv", header, rows)
    print(f"abp-audit: {len(audits)} r-values, {len(rows)} contact records [{out['status']}]")
    return EXIT_OK if ok else EXIT_FAIL


def run_shapes(cfg: RunConfig, list_only=False) -> int:
    if list_only:
        for name in sorted(GENERATORS):
            print(name)
        return EXIT_OK
    shape = _apply_field(_load_shape(cfg.shape), cfg.f_spec, cfg.seed)
    name = (cfg.shape or "shape").split(":")[0].split("/")[-1].rsplit(".", 1)[0]
    files = io.save_shape(cfg.out, name, shape)
    print(f"shapes: wrote {', '.join(str(f) for f in files)} sha256={shape.checksum()[:16]}")
    return EXIT_OK


def _read_outputs(dirs):
    found = {"theta": [], "deficit": [], "abp": []}
    for d in dirs:
        for kind in found:
            p = Path(d) / f"{kind}.json"
            if p.is_file():
                try:
                    found[kind].append((p, json.loads(p.read_text())))
                except json.JSONDecodeError:
                    raise ConfigError(f"{p}: malformed JSON") from None
    return found


CLAIMED_THETA = {"euclidean": (1.0, "CLAIMED"), "cylinder": (0.0, "CLAIMED"), "paraboloid": (2.0, "CLAIMED")}


def emit_report(cfg: RunConfig) -> int:
    if not cfg.inputs:
        raise ConfigError("report needs --inputs")
    missing = [str(d) for d in cfg.inputs if not Path(d).is_dir()]
    if missing:
        raise ConfigError(f"input directories not found: {', '.join(missing)}")
    found = _read_outputs(cfg.inputs)
    if not any(found.values()):
        raise ConfigError("no theta.json, deficit.json or abp.json in the inputs")
    md, rows = ["# Audit report", ""], []

    def row(section, quantity, value, label):
        rows.append((section, quantity, value if isinstance(value, str) else float(value), label))

    md += ["## Gaussian ratio and its limit", "", "| model | claimed theta | measured theta | monotone | status |", "|---|---|---|---|---|"]
    for p, d in found["theta"]:
        kind = d["model"]["kind"]
        est = d["estimate"]
        claim, lab = CLAIMED_THETA.get(kind, (None, None))
        if kind == "cone":
            claim, lab = d["model"]["beta"], "DERIVED"
        md.append(
            f"| {kind} | {'-' if claim is None else f'{claim:g} [{lab}]'} | "
            f"{est['extrapolated_theta']:.6g} [MEASURED] | {est['monotone_flag']} | {d['status']} |"
        )
        row("theta", f"{kind}.extrapolated_theta", est["extrapolated_theta"], "MEASURED")
        if claim is not None:
            row("theta", f"{kind}.claimed_theta", claim, lab)
    for p, d in found["theta"]:
        pa = d.get("paraboloid_audit")
        if not pa:
            continue
        md += ["", "### Paraboloid: rho(r) against the bound 2", "", "| r | rho [MEASURED] | rho <= 2 [CLAIMED bound] |", "|---|---|---|"]
        for rv, val in zip(pa["r_grid"], pa["rho_values"]):
            md.append(f"| {rv:g} | {val:.6g} | {val <= 2} |")
            row("paraboloid", f"rho(r={rv:g})", val, "MEASURED")
        md += [
            "",
            f"- rho(100)/rho(10) = {pa['ratio_100_10']:.4f} [MEASURED]; an r^-1/2 law gives {pa['predicted_ratio']:.4f} [DERIVED]",
            f"- claimed limit {pa['claimed_theta']:g} [CLAIMED]; measured values bound the limit by {pa['limit_upper_bound']:.4g} [MEASURED]",
            f"- discrepancy flagged: {pa['discrepancy_flagged']}. {pa['note']}",
        ]
        row("paraboloid", "ratio_100_10", pa["ratio_100_10"], "MEASURED")
        row("paraboloid", "predicted_ratio", pa["predicted_ratio"], "DERIVED")
        row("paraboloid", "discrepancy_flagged", str(pa["discrepancy_flagged"]), "MEASURED")

    if found["deficit"]:
        n_pass = sum(d["status"] == "PASS" for _, d in found["deficit"])
        rate = n_pass / len(found["deficit"])
        md += ["", "## Deficits", "", "| input | theta | mass | deficit | status |", "|---|---|---|---|---|"]
        for p, d in found["deficit"]:
            r = d["report"]
            md.append(f"| {p.parent.name} | {r['theta_used']:g} | {r['mass']:.6g} | {r['deficit']:.6g} | {d['status']} |")
            if "corollary" in d:
                c = d["corollary"]
                md.append(
                    f"| {p.parent.name} (corollary, theta=2 [CLAIMED]) | 2 | | {c['deficit_claimed']['deficit']:.6g} | reported only |"
                )
        md += ["", f"Deficit suite pass rate: {n_pass}/{len(found['deficit'])} [DERIVED]"]
        row("deficit", "pass_rate", rate, "DERIVED")

    if found["abp"]:
        md += ["", "## Transport audit", "", "| input | r | records | min psd | max jac mismatch | min 3.7 margin | coverage | chain ratio | passed |", "|---|---|---|---|---|---|---|---|---|"]
        for p, d in found["abp"]:
            for a in d["audits"]:
                if "error" in a:
                    md.append(f"| {p.parent.name} | {a['r']:g} | error: {a['error']} | | | | | | False |")
                    continue
                md.append(
                    f"| {p.parent.name} | {a['r']:g} | {a['n_records']} | {a['psd_min']:.3g} | {a['jacobian_max_rel']:.3g} | "
                    f"{a['lemma37_min_rel_margin']:.3g} | {a['coverage_rate']:.3f} | {a['chain'].get('ratio', float('nan')):.4f} | {a['passed']} |"
                )
                row("abp", f"{p.parent.name}.r={a['r']:g}.passed", str(a["passed"]), "MEASURED")

    any_fail = any(d.get("status") == "FAIL" for v in found.values() for _, d in v)
    md += ["", f"Overall: {'some inputs FAILED' if any_fail else 'all inputs passed'}.", ""]
    io.atomic_write(cfg.out / "report.md", "\n".join(md))
    io.write_csv(cfg.out / "report.csv", ["section", "quantity", "value", "provenance"], rows)
    print(f"report: {sum(map(len, found.values()))} inputs -> {cfg.out / 'report.md'}")
    return EXIT_FAIL if any_fail else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = make_config(args)
        if cfg.command == "theta":
            return run_theta(cfg)
        if cfg.command == "deficit":
            return run_deficit(cfg)
        if cfg.command == "abp-audit":
            return run_abp(cfg)
        if cfg.command == "shapes":
            return run_shapes(cfg, list_only=getattr(args, "list", False))
        return emit_report(cfg)
    except (ConfigError, DomainError, UsageError, UnsupportedOperation, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as e:
        print(f"numerical failure: {e} {e.diagnostics}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
