"""Reproducible experiment runner.

Every subcommand wraps exactly one estimator, takes its parameters from
flags (optionally seeded from a JSON config file), requires an explicit
seed (flag, config, or the FURSTENBERG_SEED environment variable), and
writes a JSON result record plus, where the estimator produces a series,
a tidy CSV. The record embeds a hash of the canonicalized config so any
number in a writeup can be traced to one command. Timestamps live only in
the record envelope: CSV payloads are byte-identical across reruns of the
same config.

Exit codes: 0 success, 2 validation error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, boundary, dimension, measures, pingpong, walk
from .errors import FurstenbergError, SchemaMismatch
from .fits import geometric_grid
from .linalg import ProjectivePoint, SquareMatrix

TOOL = "furstenberg"
BUNDLED = ("sanov", "diagrot")

RECORD_SCHEMA = {
    "type": "object",
    "required": [
        "tool", "version", "subcommand", "config", "config_hash",
        "seed", "spec_label", "payload", "warnings",
    ],
    "properties": {
        "tool": {"const": TOOL},
        "version": {"type": "string"},
        "subcommand": {"type": "string"},
        "config": {"type": "object"},
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{12}$"},
        "seed": {"type": ["integer", "null"]},
        "spec_label": {"type": "string"},
        "payload": {"type": "object"},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "wall_clock_seconds": {"type": "number"},
        "created_unix": {"type": "number"},
    },
}

PAYLOAD_REQUIRED = {
    "validate-spec": ["diagnostics"],
    "walk": ["snapshots"],
    "lyapunov": ["lambdas", "stderrs", "n", "replicas"],
    "gap": ["gap", "ci_low", "ci_high", "gap_positive"],
    "converge": ["n_grid", "values", "slope", "rho_hat", "r2"],
    "kak-converge": ["side", "fit"],
    "u-diverge": ["grid", "means", "windowed_mean", "floor_ok", "fit"],
    "independence": ["grid", "phi_ids", "discrepancies", "max_series", "fit"],
    "dimension": ["eps_grid", "masses", "alpha", "alpha_positive"],
    "certify": ["epsilon", "passed", "letters", "condition_passed"],
    "word-oracle": ["words", "max_len"],
    "tits": ["grid", "certified_fraction", "failure_fit"],
}


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def make_record(subcommand, config, payload, spec_label="", warnings=None, wall_clock=0.0):
    return {
        "tool": TOOL,
        "version": __version__,
        "subcommand": subcommand,
        "config": config,
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "spec_label": spec_label,
        "payload": payload,
        "warnings": list(warnings or []),
        "wall_clock_seconds": wall_clock,
        "created_unix": time.time(),
    }


def validate_record(record: dict):
    try:
        import jsonschema

        jsonschema.validate(record, RECORD_SCHEMA)
    except Exception as exc:
        raise SchemaMismatch(f"record envelope invalid: {exc}") from exc
    sub = record["subcommand"]
    required = PAYLOAD_REQUIRED.get(sub)
    if required is None:
        raise SchemaMismatch(f"unknown subcommand {sub!r} in record")
    missing = [key for key in required if key not in record["payload"]]
    if missing:
        raise SchemaMismatch(f"{sub} payload missing keys {missing}")


def write_record(record: dict, outdir: Path) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{record['subcommand']}-{record['config_hash']}.json"
    with open(path, "w") as handle:
        json.dump(record, handle, indent=2)
        handle.write("\n")
    return path


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(x) for x in row])
    return path


def load_spec(ref: str) -> measures.MeasureSpec:
    if ref in BUNDLED:
        return measures.bundled_spec(ref)
    path = Path(ref)
    if not path.exists():
        raise SchemaMismatch(f"spec file not found: {ref}")
    return measures.MeasureSpec.load(path)


_TOKEN = re.compile(r"[^\[\],\s]+")


def parse_matrix_arg(text: str) -> SquareMatrix:
    """Parse an inline matrix like [[4,0],[0,1/4]]. Entries may be
    integers, p/q rationals, or decimals; exact entries are kept whenever
    every token parses as a rational."""
    rows_text = re.findall(r"\[([^\[\]]+)\]", text)
    if not rows_text:
        raise SchemaMismatch(f"cannot parse matrix from {text!r}")
    exact_rows, float_rows, all_exact = [], [], True
    for row in rows_text:
        exact_row, float_row = [], []
        for tok in _TOKEN.findall(row):
            try:
                frac = Fraction(tok)
                exact_row.append(frac)
                float_row.append(float(frac))
            except ValueError:
                all_exact = False
                float_row.append(float(tok))
                exact_row.append(None)
        exact_rows.append(exact_row)
        float_rows.append(float_row)
    if len({len(r) for r in float_rows}) != 1 or len(float_rows) != len(float_rows[0]):
        raise SchemaMismatch(f"matrix is not square: {text!r}")
    return SquareMatrix(float_rows, exact=exact_rows if all_exact else None)


def rotation_conjugate(g: SquareMatrix, degrees: float) -> SquareMatrix:
    """R(theta) g R(theta)^-1 with the rotation acting in the first two
    coordinates."""
    d = g.dim
    theta = math.radians(degrees)
    rot = np.eye(d)
    rot[0, 0] = rot[1, 1] = math.cos(theta)
    rot[0, 1] = -math.sin(theta)
    rot[1, 0] = math.sin(theta)
    return SquareMatrix(rot @ g.arr @ rot.T)


def _grid(arg: str) -> list[int]:
    return [int(tok) for tok in arg.split(",") if tok.strip()]


def _eps_grid(arg: str) -> list[float]:
    return [float(tok) for tok in arg.split(",") if tok.strip()]


# ---------------------------------------------------------------------------
# Subcommand handlers: each returns (payload, spec_label, warnings, csv_spec)
# where csv_spec is (header, rows) or None.
# ---------------------------------------------------------------------------

def _run_validate_spec(cfg):
    spec = load_spec(cfg["spec"])
    diagnostics = measures.validate(spec)
    notes = [
        "exponential moment: automatic for finite support",
        "adaptedness / Zariski density: assumed, not checkable",
    ]
    payload = {"diagnostics": diagnostics, "notes": notes}
    return payload, spec.label, [], None, (0 if not diagnostics else 2)


def _run_walk(cfg):
    spec = load_spec(cfg["spec"])
    checkpoints = cfg.get("checkpoints") or [cfg["n"]]
    snaps = walk.run_walk(
        spec, cfg["n"], cfg["seed"], side=cfg["side"], mode=cfg["mode"],
        checkpoints=checkpoints, stream=cfg.get("stream", 0),
    )
    payload_snaps, rows = [], []
    for s in snaps:
        entry = {"n": s.n, "mode": s.mode, "side": s.side}
        if s.mode == "direct":
            entry["matrix"] = s.product.to_json()
            entry["max_abs"] = s.max_abs
            rows.append((s.n, s.stream, "log_norm",
                         math.log(float(np.linalg.norm(s.product.arr, 2)))))
            rows.append((s.n, s.stream, "max_abs", s.max_abs))
        else:
            entry["log_diag"] = s.log_diag.tolist()
            for i, v in enumerate(s.log_diag):
                rows.append((s.n, s.stream, f"log_diag_{i + 1}", v))
        payload_snaps.append(entry)
    payload = {"snapshots": payload_snaps}
    return payload, spec.label, [], (("n", "replicate", "statistic", "value"), rows), 0


def _run_lyapunov(cfg):
    spec = load_spec(cfg["spec"])
    est = walk.lyapunov_spectrum(spec, cfg["n"], cfg["replicas"], cfg["seed"])
    rows = []
    for i, (lam, se) in enumerate(zip(est.lambdas, est.stderrs), start=1):
        rows.append((est.n, "", f"lambda_{i}", lam))
        rows.append((est.n, "", f"stderr_{i}", se))
    warnings = list(est.warnings) + est.check()
    return est.to_json(), spec.label, warnings, (("n", "replicate", "statistic", "value"), rows), 0


def _run_gap(cfg):
    spec = load_spec(cfg["spec"])
    est = walk.top_gap(spec, cfg["n"], cfg["replicas"], cfg["seed"])
    rows = [
        (est.n, "", "gap", est.gap),
        (est.n, "", "ci_low", est.ci_low),
        (est.n, "", "ci_high", est.ci_high),
    ]
    return est.to_json(), spec.label, [], (("n", "replicate", "statistic", "value"), rows), 0


def _run_converge(cfg):
    spec = load_spec(cfg["spec"])
    start_pair = None
    if cfg.get("start") and cfg.get("start2"):
        start_pair = (
            ProjectivePoint([float(x) for x in cfg["start"].split(",")]),
            ProjectivePoint([float(x) for x in cfg["start2"].split(",")]),
        )
    fit = boundary.convergence_rate(spec, cfg["n_grid"], cfg["replicas"], cfg["seed"],
                                    start_pair=start_pair)
    rows = [(n, "", "mean_distance", v) for n, v in zip(fit.grid, fit.values)]
    return fit.to_json(), spec.label, list(fit.warnings), (
        ("n", "phi_id", "statistic", "value"), rows), 0


def _run_kak_converge(cfg):
    spec = load_spec(cfg["spec"])
    res = boundary.kak_convergence(spec, cfg["n_grid"], cfg["replicas"], cfg["seed"],
                                   side=cfg["side"])
    rows = [(n, "", "mean_consecutive_distance", v)
            for n, v in zip(res.fit.grid, res.fit.values)]
    return res.to_json(), spec.label, list(res.fit.warnings), (
        ("n", "phi_id", "statistic", "value"), rows), 0


def _run_u_diverge(cfg):
    spec = load_spec(cfg["spec"])
    res = boundary.u_nonconvergence(spec, cfg["n_grid"], cfg["replicas"], cfg["seed"],
                                    floor=cfg.get("floor", 0.05))
    rows = [(n, "", "mean_consecutive_distance", v) for n, v in zip(res.grid, res.means)]
    rows.append((res.grid[-1], "", "windowed_mean", res.windowed_mean))
    return res.to_json(), spec.label, list(res.fit.warnings), (
        ("n", "phi_id", "statistic", "value"), rows), 0


def _run_independence(cfg):
    spec = load_spec(cfg["spec"])
    res = boundary.independence_gap(spec, cfg["n_grid"], cfg["samples"], cfg["seed"],
                                    n_star=cfg.get("n_star"))
    rows = []
    for name in res.phi_ids:
        for n, v in zip(res.grid, res.discrepancies[name]):
            rows.append((n, name, "discrepancy", v))
    for n, v in zip(res.grid, res.max_series):
        rows.append((n, "max", "discrepancy", v))
    return res.to_json(), spec.label, list(res.fit.warnings), (
        ("n", "phi_id", "statistic", "value"), rows), 0


def _run_dimension(cfg):
    spec = load_spec(cfg["spec"])
    fit = dimension.dimension_lower_bound(
        spec, cfg["n"], cfg["count"], cfg["seed"],
        eps_grid=cfg.get("eps_grid"), hyperplane_budget=cfg.get("hyperplane_budget", 120),
    )
    rows = []
    for i, eps in enumerate(fit.eps_grid):
        for j, mass in enumerate(fit.mass_table[i]):
            rows.append((eps, j, mass))
    return fit.to_json(), spec.label, [], (("epsilon", "hyperplane_id", "mass"), rows), 0


def _run_certify(cfg):
    g = parse_matrix_arg(cfg["g"])
    if cfg.get("h"):
        h = parse_matrix_arg(cfg["h"])
    elif cfg.get("h_rotate") is not None:
        h = rotation_conjugate(g, cfg["h_rotate"])
    else:
        raise SchemaMismatch("certify needs --h or --h-rotate")
    cert = pingpong.certify_pair(g, h, epsilon=cfg.get("epsilon"), seed=cfg["seed"])
    return cert.to_json(), "", [], None, 0


def _run_word_oracle(cfg):
    g = parse_matrix_arg(cfg["g"])
    h = parse_matrix_arg(cfg["h"])
    words = pingpong.word_oracle(g, h, cfg["max_len"])
    payload = {"words": words, "max_len": cfg["max_len"], "count": len(words)}
    return payload, "", [], None, 0


def _run_tits(cfg):
    spec1 = load_spec(cfg["spec1"])
    spec2 = load_spec(cfg["spec2"])
    res = pingpong.freeness_experiment(
        spec1, spec2, cfg["n_grid"], cfg["pairs"], cfg["seed"],
        oracle_len=cfg.get("oracle_len", 6),
    )
    rows = [(n, "", "certified_fraction", v) for n, v in zip(res.grid, res.certified_fraction)]
    label = f"{spec1.label}|{spec2.label}"
    return res.to_json(), label, list(res.warnings), (
        ("n", "replicate", "statistic", "value"), rows), 0


RUNNERS = {
    "validate-spec": _run_validate_spec,
    "walk": _run_walk,
    "lyapunov": _run_lyapunov,
    "gap": _run_gap,
    "converge": _run_converge,
    "kak-converge": _run_kak_converge,
    "u-diverge": _run_u_diverge,
    "independence": _run_independence,
    "dimension": _run_dimension,
    "certify": _run_certify,
    "word-oracle": _run_word_oracle,
    "tits": _run_tits,
}


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

def _headline(record: dict):
    sub = record["subcommand"]
    p = record["payload"]
    if sub == "validate-spec":
        k = len(p["diagnostics"])
        return f"diagnostics={k}", "", "ok" if k == 0 else "fail"
    if sub == "walk":
        last = p["snapshots"][-1]
        return f"n={last['n']}", "", "ok"
    if sub == "lyapunov":
        return (f"lambda_1={p['lambdas'][0]:.6f}",
                f"+-{p['stderrs'][0]:.2e}", "ok" if not record["warnings"] else "warn")
    if sub == "gap":
        return (f"gap={p['gap']:.6f}",
                f"[{p['ci_low']:.6f},{p['ci_high']:.6f}]",
                "gap_positive" if p["gap_positive"] else "gap_zero")
    if sub == "converge":
        return (f"slope={p['slope']:.5f} rho={p['rho_hat']:.5f}",
                f"R2={p['r2']:.3f}", "decay" if p["slope"] < 0 else "flat")
    if sub == "kak-converge":
        f = p["fit"]
        return (f"{p['side']} slope={f['slope']:.5f}",
                f"R2={f['r2']:.3f}", "decay" if f["slope"] < 0 else "flat")
    if sub == "u-diverge":
        return (f"windowed_mean={p['windowed_mean']:.4f}",
                f"slope={p['fit']['slope']:.5f}",
                "no_decay" if p["floor_ok"] else "decayed")
    if sub == "independence":
        series = p["max_series"]
        third = max(1, len(series) // 3)
        head = sum(series[:third]) / third
        tail = sum(series[-third:]) / third
        ratio = tail / head if head > 0 else float("nan")
        return (f"final/initial={ratio:.3f}",
                f"slope={p['fit']['slope']:.5f}", "decay" if ratio < 0.2 else "flat")
    if sub == "dimension":
        return (f"alpha={p['alpha']:.4f}",
                f"[{p['alpha_ci_low']:.4f},{p['alpha_ci_high']:.4f}]",
                "alpha_positive" if p["alpha_positive"] else "alpha_zero")
    if sub == "certify":
        return (f"eps={p['epsilon']:.5f}", "",
                "certified" if p["passed"] else "not_certified")
    if sub == "word-oracle":
        return (f"relations={p['count']}", f"L={p['max_len']}",
                "free_up_to_L" if p["count"] == 0 else "relation_found")
    if sub == "tits":
        return (f"certified@n={p['grid'][-1]}: {p['certified_fraction'][-1]:.3f}",
                f"failure_slope={p['failure_fit']['slope']:.5f}",
                "decay" if p["failure_fit"]["slope"] < 0 else "flat")
    return "", "", ""


def _run_report(paths, outdir: Path, figures: bool = True):
    from .plots import render_record_figure

    rows = []
    lines = []
    outdir.mkdir(parents=True, exist_ok=True)
    for ref in paths:
        with open(ref) as handle:
            record = json.load(handle)
        validate_record(record)
        headline, ci, flag = _headline(record)
        rows.append((record["subcommand"], record["spec_label"], record["config_hash"],
                     headline, ci, flag))
        lines.append(
            f"{record['subcommand']:<14} {record['spec_label']:<12} "
            f"{headline:<40} {ci:<28} {flag}"
        )
        if figures:
            fig_path = outdir / f"{record['subcommand']}-{record['config_hash']}.png"
            render_record_figure(record, fig_path)
    csv_path = write_csv(outdir / "report.csv",
                         ("subcommand", "spec_label", "config_hash", "headline", "ci", "flag"),
                         rows)
    text = "\n".join(lines) + ("\n" if lines else "")
    with open(outdir / "report.txt", "w") as handle:
        handle.write(text)
    sys.stdout.write(text)
    return csv_path


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="Random matrix product experiments on SL_d(R): estimators, "
                    "certificates, and reproducible records.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, spec=True):
        if spec:
            p.add_argument("--spec", required=True,
                           help="spec JSON path or bundled name (sanov, diagrot)")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (falls back to FURSTENBERG_SEED)")
        p.add_argument("--outdir", default="furstenberg_results")
        p.add_argument("--config", default=None, help="JSON file with default flags")
        p.add_argument("--jobs", type=int, default=1,
                       help="upper bound on concurrent work (current runner is sequential)")

    p = sub.add_parser("validate-spec", help="check a measure spec")
    p.add_argument("spec_path", nargs="?", default=None)
    common(p, spec=False)
    p.add_argument("--spec", default=None)

    p = sub.add_parser("walk", help="stream one walk")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--side", choices=("right", "left"), default="right")
    p.add_argument("--mode", choices=("direct", "renormalized"), default="direct")
    p.add_argument("--checkpoints", type=_grid, default=None)
    p.add_argument("--stream", type=int, default=0)

    p = sub.add_parser("lyapunov", help="Lyapunov spectrum")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicas", type=int, default=16)

    p = sub.add_parser("gap", help="top Lyapunov gap")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicas", type=int, default=16)

    p = sub.add_parser("converge", help="two-start boundary contraction rate")
    common(p)
    p.add_argument("--n-grid", type=_grid, default=None, dest="n_grid",
                   help="default: geometric grid 4..40, ratio 1.3")
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--start", default=None, help="comma-separated coordinates")
    p.add_argument("--start2", default=None)

    p = sub.add_parser("kak-converge", help="consecutive-step decay of a converging frame")
    common(p)
    p.add_argument("--n-grid", type=_grid, default=None, dest="n_grid",
                   help="default: geometric grid 2..30, ratio 1.3")
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--side", choices=("right-k", "left-u"), default="right-k")

    p = sub.add_parser("u-diverge", help="non-convergence of the right frame of the right walk")
    common(p)
    p.add_argument("--n-grid", type=_grid, default=None, dest="n_grid",
                   help="default: geometric grid 2..30, ratio 1.3")
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--floor", type=float, default=0.05)

    p = sub.add_parser("independence", help="joint-vs-product discrepancy of the two frames")
    common(p)
    p.add_argument("--n-grid", type=_grid, default=None, dest="n_grid",
                   help="default: geometric grid 1..32, ratio 1.3")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--n-star", type=int, default=None, dest="n_star")

    p = sub.add_parser("dimension", help="stationary-measure dimension lower bound")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--eps-grid", type=_eps_grid, default=None, dest="eps_grid")
    p.add_argument("--hyperplane-budget", type=int, default=120, dest="hyperplane_budget")

    p = sub.add_parser("certify", help="ping-pong certificate for a matrix pair")
    common(p, spec=False)
    p.add_argument("--g", required=True, help="matrix like [[4,0],[0,1/4]]")
    p.add_argument("--h", default=None)
    p.add_argument("--h-rotate", type=float, default=None, dest="h_rotate",
                   help="degrees: h = R g R^-1")
    p.add_argument("--epsilon", type=float, default=None)

    p = sub.add_parser("word-oracle", help="exact enumeration of short relations")
    common(p, spec=False)
    p.add_argument("--g", required=True)
    p.add_argument("--h", required=True)
    p.add_argument("--max-len", type=int, default=6, dest="max_len")

    p = sub.add_parser("tits", help="freeness experiment over independent walk pairs")
    common(p, spec=False)
    p.add_argument("--spec1", required=True)
    p.add_argument("--spec2", required=True)
    p.add_argument("--n-grid", type=_grid, default=None, dest="n_grid",
                   help="default: geometric grid 10..80, ratio 1.3")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--oracle-len", type=int, default=6, dest="oracle_len")

    p = sub.add_parser("report", help="consolidate result records, render figures")
    p.add_argument("records", nargs="*")
    p.add_argument("--outdir", default="furstenberg_results")
    p.add_argument("--no-figures", action="store_true")
    return parser


_NO_SEED_NEEDED = {"validate-spec", "report"}
_CONFIG_KEYS = {
    "walk": ["spec", "n", "side", "mode", "checkpoints", "stream", "seed"],
    "lyapunov": ["spec", "n", "replicas", "seed"],
    "gap": ["spec", "n", "replicas", "seed"],
    "converge": ["spec", "n_grid", "replicas", "start", "start2", "seed"],
    "kak-converge": ["spec", "n_grid", "replicas", "side", "seed"],
    "u-diverge": ["spec", "n_grid", "replicas", "floor", "seed"],
    "independence": ["spec", "n_grid", "samples", "n_star", "seed"],
    "dimension": ["spec", "n", "count", "eps_grid", "hyperplane_budget", "seed"],
    "certify": ["g", "h", "h_rotate", "epsilon", "seed"],
    "word-oracle": ["g", "h", "max_len", "seed"],
    "tits": ["spec1", "spec2", "n_grid", "pairs", "oracle_len", "seed"],
    "validate-spec": ["spec"],
}


_DEFAULT_GRIDS = {
    "converge": (4, 40),
    "kak-converge": (2, 30),
    "u-diverge": (2, 30),
    "independence": (1, 32),
    "tits": (10, 80),
}


def _build_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as handle:
            cfg.update(json.load(handle))
    for key in _CONFIG_KEYS.get(args.subcommand, []):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.subcommand in _DEFAULT_GRIDS and cfg.get("n_grid") is None:
        cfg["n_grid"] = geometric_grid(*_DEFAULT_GRIDS[args.subcommand])
    if args.subcommand == "validate-spec" and cfg.get("spec") is None:
        cfg["spec"] = getattr(args, "spec_path", None)
    if args.subcommand not in _NO_SEED_NEEDED and cfg.get("seed") is None:
        env = os.environ.get("FURSTENBERG_SEED")
        if env is not None:
            cfg["seed"] = int(env)
    cfg["jobs"] = getattr(args, "jobs", 1)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = args.subcommand

    if sub == "report":
        try:
            _run_report(args.records, Path(args.outdir), figures=not args.no_figures)
        except SchemaMismatch as exc:
            sys.stderr.write(f"error [{exc.code}]: {exc}\n")
            return 2
        except FileNotFoundError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return 2
        return 0

    cfg = _build_config(args)
    if sub not in _NO_SEED_NEEDED and cfg.get("seed") is None:
        sys.stderr.write("error: no seed given (flag, config, or FURSTENBERG_SEED)\n")
        return 2
    if sub == "validate-spec" and not cfg.get("spec"):
        sys.stderr.write("error: validate-spec needs a spec path\n")
        return 2
    if cfg.get("jobs", 1) < 1:
        sys.stderr.write("error: --jobs must be >= 1\n")
        return 2

    started = time.monotonic()
    try:
        payload, spec_label, warnings, csv_spec, code = RUNNERS[sub](cfg)
    except FurstenbergError as exc:
        sys.stderr.write(f"error [{exc.code}]: {exc}\n")
        return exc.exit_code
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    wall = time.monotonic() - started

    record = make_record(sub, cfg, payload, spec_label, warnings, wall)
    validate_record(record)
    outdir = Path(getattr(args, "outdir", "furstenberg_results"))
    record_path = write_record(record, outdir)
    paths = [record_path]
    if csv_spec is not None:
        header, rows = csv_spec
        paths.append(write_csv(outdir / f"{sub}-{record['config_hash']}.csv", header, rows))
    headline, ci, flag = _headline(record)
    print(f"{sub}: {headline} {ci} [{flag}]")
    for warning in warnings:
        print(f"  warning: {warning}")
    for path in paths:
        print(f"  wrote {path}")
    if sub == "validate-spec":
        for diag in payload["diagnostics"]:
            print(f"  diagnostic: {diag}")
        for note in payload["notes"]:
            print(f"  note: {note}")
    return code


if __name__ == "__main__":
    sys.exit(main())
