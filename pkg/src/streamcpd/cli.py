"""Command-line front end: run a detector on a CSV, synthesize test data,
and score predicted change points against ground truth.

Exit codes: 0 success, 1 input error, 2 config error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .detector import (
    CandidatePolicy,
    ChangePointRule,
    DetectorConfig,
    HazardConfig,
    NigParams,
    PrunePolicy,
    RunResult,
    run,
)
from .errors import ConfigError, ContractViolation, InputError
from .oracles import SegmentSpec, gen_piecewise_gaussian

POSTERIOR_FILE_FLOOR = 1e-12
CLI_DEFAULT_PRUNE_EPSILON = 1e-10


def _fmt(v: float) -> str:
    # 17 significant digits: enough to round-trip any float64 exactly.
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# configuration keys: single source of truth for config files and manifests


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes"):
        return True
    if v in ("0", "false", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_candidate_mu(s: str):
    if s.strip() == "at-observation":
        return None
    return float(s)


_CONFIG_PARSERS = {
    "mode": str,
    "alpha": float,
    "lambda": float,
    "k_fixed": int,
    "beta": float,
    "eta_mu": float,
    "eta_sigma": float,
    "decay": float,
    "var_floor": float,
    "log_var_update": _parse_bool,
    "candidate_mu": _parse_candidate_mu,
    "candidate_var": float,
    "prune_epsilon": float,
    "prune_top_m": int,
    "cp_mode": str,
    "cp_drop_fraction": float,
    "cp_mass_window": int,
    "cp_mass_threshold": float,
    "baseline_mu0": float,
    "baseline_kappa0": float,
    "baseline_a0": float,
    "baseline_b0": float,
    "seed": int,
}

# Keys a manifest may carry beyond the config snapshot; recognized so a
# manifest can be fed back as a config file unchanged.
_INFO_KEYS = ("input", "output_dir", "tool_version", "duration_seconds")

_DEFAULTS = {
    "mode": "infinite",
    "alpha": 1.0,
    "lambda": 1e6,
    "k_fixed": 10,
    "beta": 1.0,
    "eta_mu": 1.0,
    "eta_sigma": 0.02,
    "decay": 0.02,
    "var_floor": 1e-6,
    "log_var_update": False,
    "candidate_mu": None,
    "candidate_var": 1.0,
    "prune_epsilon": 0.0,
    "prune_top_m": 0,
    "cp_mode": "map-drop",
    "cp_drop_fraction": 0.5,
    "cp_mass_window": 0,
    "cp_mass_threshold": 0.5,
    "baseline_mu0": 0.0,
    "baseline_kappa0": 1.0,
    "baseline_a0": 1.0,
    "baseline_b0": 1.0,
    "seed": 0,
}


def _read_kv_file(path) -> dict:
    values = {}
    info = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _INFO_KEYS:
            info[key] = val
        elif key in _CONFIG_PARSERS:
            try:
                values[key] = _CONFIG_PARSERS[key](val)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return values | {f"@{k}": v for k, v in info.items()}


def _build_config(values: dict) -> DetectorConfig:
    eps, top_m = values["prune_epsilon"], values["prune_top_m"]
    if eps < 0 or top_m < 0:
        raise ConfigError("prune settings must be non-negative (0 disables)")
    if eps > 0 and top_m > 0:
        raise ConfigError("prune_epsilon and prune_top_m are mutually exclusive")
    if eps > 0:
        prune = PrunePolicy.threshold(eps)
    elif top_m > 0:
        prune = PrunePolicy.top_m(top_m)
    else:
        prune = PrunePolicy.none()
    return DetectorConfig(
        mode=values["mode"],
        alpha=values["alpha"],
        k_fixed=values["k_fixed"],
        dirichlet_beta=values["beta"],
        hazard=HazardConfig(values["lambda"]),
        candidate=CandidatePolicy(mu0=values["candidate_mu"], var_init=values["candidate_var"]),
        eta_init=(values["eta_mu"], values["eta_sigma"]),
        decay=values["decay"],
        var_floor=values["var_floor"],
        log_var_update=values["log_var_update"],
        prune=prune,
        cp_rule=ChangePointRule(
            mode=values["cp_mode"],
            drop_fraction=values["cp_drop_fraction"],
            mass_window=values["cp_mass_window"],
            mass_threshold=values["cp_mass_threshold"],
        ),
        baseline=NigParams(
            mu=values["baseline_mu0"],
            kappa=values["baseline_kappa0"],
            a=values["baseline_a0"],
            b=values["baseline_b0"],
        ),
        seed=values["seed"],
    )


def config_to_items(cfg: DetectorConfig) -> list[tuple[str, str]]:
    """Config snapshot as ordered key=value pairs (manifest/config format)."""
    prune_eps = cfg.prune.epsilon if cfg.prune.kind == "threshold" else 0.0
    prune_top = cfg.prune.max_live if cfg.prune.kind == "top-m" else 0
    cand_mu = "at-observation" if cfg.candidate.mu0 is None else _fmt(cfg.candidate.mu0)
    return [
        ("mode", cfg.mode),
        ("alpha", _fmt(cfg.alpha)),
        ("lambda", _fmt(cfg.hazard.lam)),
        ("k_fixed", str(cfg.k_fixed)),
        ("beta", _fmt(cfg.dirichlet_beta)),
        ("eta_mu", _fmt(cfg.eta_init[0])),
        ("eta_sigma", _fmt(cfg.eta_init[1])),
        ("decay", _fmt(cfg.decay)),
        ("var_floor", _fmt(cfg.var_floor)),
        ("log_var_update", "true" if cfg.log_var_update else "false"),
        ("candidate_mu", cand_mu),
        ("candidate_var", _fmt(cfg.candidate.var_init)),
        ("prune_epsilon", _fmt(prune_eps)),
        ("prune_top_m", str(prune_top)),
        ("cp_mode", cfg.cp_rule.mode),
        ("cp_drop_fraction", _fmt(cfg.cp_rule.drop_fraction)),
        ("cp_mass_window", str(cfg.cp_rule.mass_window)),
        ("cp_mass_threshold", _fmt(cfg.cp_rule.mass_threshold)),
        ("baseline_mu0", _fmt(cfg.baseline.mu)),
        ("baseline_kappa0", _fmt(cfg.baseline.kappa)),
        ("baseline_a0", _fmt(cfg.baseline.a)),
        ("baseline_b0", _fmt(cfg.baseline.b)),
        ("seed", str(cfg.seed)),
    ]


def parse_config(overrides: dict | None = None, config_file=None, cli_defaults: dict | None = None):
    """Resolve the effective configuration: flags override the file, the
    file overrides defaults. Unknown file keys are an error.

    Returns ``(config, info)`` where ``info`` carries any informational
    keys found in the file (input path and the like).
    """
    values = dict(_DEFAULTS)
    if cli_defaults:
        values.update(cli_defaults)
    info = {}
    if config_file is not None:
        raw = _read_kv_file(config_file)
        info = {k[1:]: v for k, v in raw.items() if k.startswith("@")}
        values.update({k: v for k, v in raw.items() if not k.startswith("@")})
    for key, val in (overrides or {}).items():
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        if val is not None:
            values[key] = val
    return _build_config(values), info


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    """Reproducibility record for one run: everything needed to repeat it
    plus bookkeeping (tool version, wall-clock duration)."""

    input: str
    output_dir: str
    duration_seconds: float
    config: DetectorConfig
    tool_version: str = __version__

    def lines(self) -> list[str]:
        head = [
            ("input", self.input),
            ("output_dir", self.output_dir),
            ("tool_version", self.tool_version),
            ("duration_seconds", _fmt(self.duration_seconds)),
        ]
        return [f"{k}={v}" for k, v in head + config_to_items(self.config)]

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text("\n".join(self.lines()) + "\n", encoding="utf-8")
        return path


# ---------------------------------------------------------------------------
# CSV ingestion / trace emission


def ingest_csv(path) -> np.ndarray:
    """Read a single-column numeric series; first row may be a header.

    Only the first column is used; row order is time order.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    values: list[float] = []
    saw_data = False
    for rownum, row in enumerate(csv.reader(text.splitlines()), 1):
        if not row or all(not c.strip() for c in row):
            continue
        cell = row[0].strip()
        try:
            v = float(cell)
        except ValueError:
            if not saw_data and not values:
                continue  # header row
            raise InputError(f"{path}: row {rownum}: non-numeric value {cell!r}") from None
        if not math.isfinite(v):
            raise InputError(f"{path}: row {rownum}: non-finite value {cell!r}")
        values.append(v)
        saw_data = True
    if not values:
        raise InputError(f"{path}: no numeric data rows")
    return np.array(values)


def write_series_csv(series, path) -> Path:
    path = Path(path)
    lines = ["x"] + [_fmt(v) for v in np.asarray(series, dtype=float)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def emit_traces(result: RunResult, outdir, manifest: RunManifest | None = None) -> list[Path]:
    """Write the machine-readable trace files for a completed run."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {outdir}: {exc}") from exc

    written = []

    rows = ["t,x,z_star,k_t"]
    for s, x in zip(result.steps, result.series):
        rows.append(f"{s.t},{_fmt(x)},{s.z_star},{s.k_t}")
    p = outdir / "assignments.csv"
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    written.append(p)

    rows = ["t,r_star,cp_flag"]
    for s in result.steps:
        rows.append(f"{s.t},{s.r_star},{1 if s.cp_flag else 0}")
    p = outdir / "runlength_map.csv"
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    written.append(p)

    rows = ["t,r,mass"]
    for s in result.steps:
        for r, mass in zip(s.rl_posterior.runs, s.rl_posterior.probs):
            if mass >= POSTERIOR_FILE_FLOOR:
                rows.append(f"{s.t},{int(r)},{_fmt(mass)}")
    p = outdir / "posterior.csv"
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    written.append(p)

    rows = ["t"] + [str(t) for t in result.change_points]
    p = outdir / "changepoints.csv"
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    written.append(p)

    if manifest is not None:
        written.append(manifest.write(outdir / "manifest"))
    return written


# ---------------------------------------------------------------------------
# SVG rendering (hand-rolled: deterministic markup, no external assets)


def _class_color(k: int) -> str:
    hue = (137.508 * (k - 1)) % 360.0
    return f"hsl({hue:.1f},65%,42%)"


def _scale(value, lo, hi, out_lo, out_hi):
    span = hi - lo
    if span <= 0:
        span = 1.0
    return out_lo + (value - lo) * (out_hi - out_lo) / span


def _ticks(lo, hi, n=5):
    return [lo + i * (hi - lo) / (n - 1) for i in range(n)]


def render_svg(result: RunResult, outdir) -> Path:
    """Two-panel SVG: the signal colored by class assignment on top, the
    MAP run length with change-point markers below."""
    steps = result.steps
    if not steps:
        raise ContractViolation("cannot render an empty trace")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    T = len(steps)
    xs = np.asarray(result.series, dtype=float)
    rstars = np.array([s.r_star for s in steps], dtype=float)
    W, H = 960.0, 680.0
    L, R = 62.0, 944.0
    panels = ((28.0, 310.0), (376.0, 658.0))

    x_lo, x_hi = 1.0, float(max(T, 2))
    y1_lo, y1_hi = float(xs.min()), float(xs.max())
    pad = 0.05 * (y1_hi - y1_lo) or 1.0
    y1_lo, y1_hi = y1_lo - pad, y1_hi + pad
    y2_lo, y2_hi = 0.0, float(rstars.max()) * 1.05 + 1.0

    def px(t):
        return _scale(t, x_lo, x_hi, L, R)

    def py1(v):
        return _scale(v, y1_lo, y1_hi, panels[0][1], panels[0][0])

    def py2(v):
        return _scale(v, y2_lo, y2_hi, panels[1][1], panels[1][0])

    e = []
    e.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
        f'viewBox="0 0 {W:.0f} {H:.0f}">'
    )
    e.append(f'<rect x="0" y="0" width="{W:.0f}" height="{H:.0f}" fill="white"/>')

    for (top, bot), (lo, hi, py, fmt) in zip(
        panels,
        ((y1_lo, y1_hi, py1, "%.4g"), (y2_lo, y2_hi, py2, "%.4g")),
    ):
        e.append(
            f'<rect x="{L:.2f}" y="{top:.2f}" width="{R - L:.2f}" height="{bot - top:.2f}" '
            'fill="none" stroke="#222" stroke-width="1"/>'
        )
        for tv in _ticks(lo, hi, 4):
            y = py(tv)
            e.append(
                f'<line x1="{L - 4:.2f}" y1="{y:.2f}" x2="{L:.2f}" y2="{y:.2f}" stroke="#222"/>'
            )
            e.append(
                f'<text x="{L - 7:.2f}" y="{y + 4:.2f}" font-size="11" text-anchor="end" '
                f'font-family="monospace">{fmt % tv}</text>'
            )
        for tv in _ticks(x_lo, float(T), 5):
            x = px(tv)
            e.append(
                f'<line x1="{x:.2f}" y1="{bot:.2f}" x2="{x:.2f}" y2="{bot + 4:.2f}" stroke="#222"/>'
            )
            e.append(
                f'<text x="{x:.2f}" y="{bot + 16:.2f}" font-size="11" text-anchor="middle" '
                f'font-family="monospace">{tv:.0f}</text>'
            )
    e.append(
        f'<text x="{L:.2f}" y="18" font-size="12" font-family="monospace">signal, colored by class</text>'
    )
    e.append(
        f'<text x="{L:.2f}" y="366" font-size="12" font-family="monospace">MAP run length</text>'
    )

    pts = " ".join(f"{px(i + 1):.2f},{py1(v):.2f}" for i, v in enumerate(xs))
    e.append(f'<polyline points="{pts}" fill="none" stroke="#bbb" stroke-width="1"/>')
    for i, (s, v) in enumerate(zip(steps, xs)):
        e.append(
            f'<circle cx="{px(i + 1):.2f}" cy="{py1(v):.2f}" r="2" fill="{_class_color(s.z_star)}"/>'
        )

    pts = " ".join(f"{px(i + 1):.2f},{py2(v):.2f}" for i, v in enumerate(rstars))
    e.append(f'<polyline points="{pts}" fill="none" stroke="#336" stroke-width="1.2"/>')
    for t in result.change_points:
        x = px(t)
        for top, bot in panels:
            e.append(
                f'<line x1="{x:.2f}" y1="{top:.2f}" x2="{x:.2f}" y2="{bot:.2f}" '
                'stroke="#c22" stroke-width="1" stroke-dasharray="4,3"/>'
            )
    e.append("</svg>")

    path = outdir / "trace.svg"
    path.write_text("\n".join(e) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# subcommands


def _cmd_run(args) -> int:
    overrides = {
        "mode": args.mode,
        "alpha": args.alpha,
        "lambda": args.lam,
        "k_fixed": args.k,
        "beta": args.beta,
        "eta_mu": args.eta_mu,
        "eta_sigma": args.eta_sigma,
        "decay": args.decay,
        "var_floor": args.var_floor,
        "prune_epsilon": args.prune,
        "seed": args.seed,
    }
    cfg, info = parse_config(
        overrides, args.config, cli_defaults={"prune_epsilon": CLI_DEFAULT_PRUNE_EPSILON}
    )
    input_path = args.input or info.get("input")
    if not input_path:
        raise ConfigError("no input: pass --input or a config file with an input= line")

    series = ingest_csv(input_path)
    start = time.perf_counter()
    result = run(series, cfg)
    duration = time.perf_counter() - start

    outdir = Path(args.out)
    manifest = RunManifest(
        input=str(input_path),
        output_dir=str(outdir),
        duration_seconds=duration,
        config=cfg,
    )
    emit_traces(result, outdir, manifest)
    if args.svg:
        render_svg(result, outdir)

    print(f"steps={len(result.steps)}")
    print(f"changepoints={len(result.change_points)}")
    print(f"final_k={result.final_k}")
    print(f"outdir={outdir}")
    return 0


def parse_segments(spec: str) -> list[SegmentSpec]:
    """``LENGTH:MU:VAR[:CLASS]`` groups separated by commas."""
    segments = []
    for i, part in enumerate(spec.split(","), 1):
        fields = part.strip().split(":")
        if len(fields) not in (3, 4):
            raise ConfigError(
                f"segment {i}: expected LENGTH:MU:VAR[:CLASS], got {part.strip()!r}"
            )
        try:
            length = int(fields[0])
            mu = float(fields[1])
            var = float(fields[2])
            class_id = int(fields[3]) if len(fields) == 4 else i
        except ValueError as exc:
            raise ConfigError(f"segment {i}: bad number in {part.strip()!r}") from exc
        segments.append(SegmentSpec(length=length, mu=mu, var=var, class_id=class_id))
    return segments


def _cmd_synth(args) -> int:
    segments = parse_segments(args.segments)
    series, cps, _ = gen_piecewise_gaussian(segments, np.random.default_rng(args.seed))
    write_series_csv(series, args.out)
    if args.truth:
        Path(args.truth).write_text("\n".join(["t"] + [str(c) for c in cps]) + "\n", "utf-8")
    print(f"samples={len(series)}")
    print(f"changepoints={','.join(str(c) for c in cps) if cps else ''}")
    return 0


def _read_int_column(path) -> list[int]:
    return [int(round(v)) for v in ingest_csv(path)]


def score_changepoints(predicted, truth, tolerance: int):
    """Greedy one-to-one matching of predictions to true change points
    within +-tolerance; returns (matched pairs, precision, recall, mean delay)."""
    preds = sorted(predicted)
    used = [False] * len(preds)
    pairs = []
    for t in sorted(truth):
        best = None
        for j, p in enumerate(preds):
            if used[j] or abs(p - t) > tolerance:
                continue
            if best is None or abs(p - t) < abs(preds[best] - t):
                best = j
        if best is not None:
            used[best] = True
            pairs.append((preds[best], t))
    precision = len(pairs) / len(preds) if preds else 0.0
    recall = len(pairs) / len(truth) if truth else 0.0
    delay = (
        sum(p - t for p, t in pairs) / len(pairs) if pairs else float("nan")
    )
    return pairs, precision, recall, delay


def _cmd_score(args) -> int:
    if args.tolerance < 0:
        raise ConfigError("tolerance must be non-negative")
    preds = _read_int_column(args.pred)
    truth = _read_int_column(args.truth)
    pairs, precision, recall, delay = score_changepoints(preds, truth, args.tolerance)
    print(f"true_count={len(truth)}")
    print(f"pred_count={len(preds)}")
    print(f"matched={len(pairs)}")
    print(f"precision={_fmt(precision)}")
    print(f"recall={_fmt(recall)}")
    print(f"mean_delay={_fmt(delay)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamcpd",
        description="Streaming Bayesian change-point detection over latent classes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a detector over a CSV series")
    p.add_argument("--input", help="single-column CSV of observations")
    p.add_argument("--config", help="key=value config file (a manifest also works)")
    p.add_argument("--mode", choices=["infinite", "fixed-k", "baseline"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda", dest="lam", type=float, help="expected run length of the hazard prior")
    p.add_argument("--k", type=int, help="class count in fixed-k mode")
    p.add_argument("--beta", type=float, help="Dirichlet smoothing in fixed-k mode")
    p.add_argument("--eta-mu", dest="eta_mu", type=float)
    p.add_argument("--eta-sigma", dest="eta_sigma", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--var-floor", dest="var_floor", type=float)
    p.add_argument("--prune", type=float, help="posterior-mass pruning threshold (0 disables)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="streamcpd_out", help="output directory")
    p.add_argument("--svg", action="store_true", help="also render trace.svg")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("synth", help="generate a piecewise-Gaussian series")
    p.add_argument("--segments", required=True, help="LENGTH:MU:VAR[:CLASS],...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--truth", help="also write true change points to this CSV")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("score", help="score predicted change points against truth")
    p.add_argument("--pred", required=True, help="CSV of predicted change-point times")
    p.add_argument("--truth", required=True, help="CSV of true change-point times")
    p.add_argument("--tolerance", type=int, default=10)
    p.set_defaults(func=_cmd_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
