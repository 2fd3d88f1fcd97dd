"""Command-line front end.

Subcommands emit CSV tables (numeric cells fixed at 10 significant digits)
and, for simulation runs, a JSON manifest holding the resolved config, the
seed, and digests of the outputs so a run can be reproduced byte for byte.

Commands: age-curve, age-perturb, size-mc, estimator-compare, tree-dump.
Simulation config files are flat ``key=value`` lines (``#`` comments);
``--set key=value`` overrides individual entries.
"""
from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import sys
from typing import Optional, Sequence

from . import __version__
from .age_model import (
    AlphaFamily,
    ConstantRate,
    Dirac,
    DiscreteMixture,
    PowerLagRate,
    TruncatedGaussian,
    UniformLaw,
    cv_curve,
    d2lambda_at_zero,
    dlambda_dalpha,
    malthus_reference,
    malthus_with_variability,
)
from .estimator import cv_table, estimator_sd_comparison
from .numerics import RngStream
from .size_sim import (
    AutoRegressive,
    DrawnFromKernel,
    Exponential,
    FixedRate,
    Linear,
    Memoryless,
    SimConfig,
    Symmetric,
    SizeDivisionRate,
    UniformAsymmetric,
    simulate_tree,
)

_FMT = "%.10g"


class ConfigError(ValueError):
    """Invalid flags or config file; maps to exit code 2."""


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return _FMT % x
    return str(x)


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> bytes:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    data = ("\n".join(lines) + "\n").encode()
    with open(path, "wb") as f:
        f.write(data)
    return data


def _write_manifest(out_path: str, command: str, config_text: str, seed: int, started: str, payloads: dict) -> None:
    manifest = {
        "command": command,
        "config": config_text,
        "seed": seed,
        "version": __version__,
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": {name: hashlib.sha256(data).hexdigest() for name, data in payloads.items()},
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# baseline / config parsing
# ---------------------------------------------------------------------------


def _parse_baseline_flag(text: str, vbar: float, sigma_eta: float):
    """--baseline gauss | twopoint(v1,v2); gauss is centered at vbar with a
    symmetric window of half-width vbar (the support must stay in [0, inf))."""
    s = text.strip().lower()
    if s == "gauss":
        return TruncatedGaussian(0.0, 2.0 * vbar, sigma_eta)
    if s.startswith("twopoint(") and s.endswith(")"):
        inner = s[len("twopoint(") : -1]
        v1, v2 = (float(t) for t in inner.split(","))
        return DiscreteMixture([(v1, 0.5), (v2, 0.5)])
    raise ConfigError(f"unknown baseline {text!r} (expected gauss or twopoint(v1,v2))")


def _parse_law(text: str):
    """Config-file rate laws: gauss:vmin,vmax,sigma | twopoint:v1,v2 |
    uniform:vmin,vmax | dirac:v."""
    kind, _, args = text.partition(":")
    kind = kind.strip().lower()
    try:
        vals = [float(t) for t in args.split(",")] if args else []
        if kind == "gauss":
            vmin, vmax, sigma = vals
            return TruncatedGaussian(vmin, vmax, sigma)
        if kind == "twopoint":
            v1, v2 = vals
            return DiscreteMixture([(v1, 0.5), (v2, 0.5)])
        if kind == "uniform":
            vmin, vmax = vals
            return UniformLaw(vmin, vmax)
        if kind == "dirac":
            (v,) = vals
            return Dirac(v)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad rate law {text!r}: {e}") from e
    raise ConfigError(f"unknown rate law kind {kind!r}")


_CONFIG_DEFAULTS = {
    "division.mode": "unit_size",
    "division.x0": "1.0",
    "division.beta": "2.0",
    "growth": "exp",
    "split": "sym",
    "kernel": "memoryless",
    "baseline": "gauss:0,2,0.7",
    "root_size": "2.0",
    "root_rate": "fixed:1.0",
    "M": "50",
    "seed": "1",
    "estimator": "biomass",
}


def _read_config(path: Optional[str], sets: Sequence[str]) -> dict:
    items = dict(_CONFIG_DEFAULTS)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path!r}: {e}") from e
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {raw!r}")
            k, _, v = line.partition("=")
            items[k.strip()] = v.strip()
    for s in sets:
        if "=" not in s:
            raise ConfigError(f"--set expects key=value, got {s!r}")
        k, _, v = s.partition("=")
        items[k.strip()] = v.strip()
    return items


def _float_of(items: dict, key: str) -> float:
    try:
        return float(items[key])
    except (KeyError, ValueError) as e:
        raise ConfigError(f"bad numeric config value for {key!r}") from e


def _sim_config(items: dict, alpha: float, horizon: float) -> SimConfig:
    try:
        return _sim_config_inner(items, alpha, horizon)
    except ConfigError:
        raise
    except ValueError as e:  # component constructors validate their own fields
        raise ConfigError(str(e)) from e


def _sim_config_inner(items: dict, alpha: float, horizon: float) -> SimConfig:
    mode = items["division.mode"]
    if mode not in ("unit_size", "unit_time"):
        raise ConfigError(f"division.mode must be unit_size or unit_time, got {mode!r}")
    division = SizeDivisionRate(_float_of(items, "division.x0"), _float_of(items, "division.beta"), mode)

    growth_key = items["growth"]
    if growth_key == "exp":
        growth = Exponential()
    elif growth_key == "linear":
        growth = Linear()
    else:
        raise ConfigError(f"growth must be exp or linear, got {growth_key!r}")

    split_key = items["split"]
    if split_key == "sym":
        split = Symmetric()
    elif split_key.startswith("asym:"):
        split = UniformAsymmetric(float(split_key.split(":", 1)[1]))
    else:
        raise ConfigError(f"split must be sym or asym:eps, got {split_key!r}")

    baseline = _parse_law(items["baseline"])
    if alpha == 0.0:
        law = baseline.contract(0.0) if not getattr(baseline, "is_degenerate", False) else baseline
    elif getattr(baseline, "is_degenerate", False):
        raise ConfigError("alpha > 0 requires a non-degenerate baseline")
    else:
        law = AlphaFamily(baseline, alpha)

    kernel_key = items["kernel"]
    if kernel_key == "memoryless":
        kernel = Memoryless(law)
    elif kernel_key.startswith("ar:"):
        kernel = AutoRegressive(law, float(kernel_key.split(":", 1)[1]))
    else:
        raise ConfigError(f"kernel must be memoryless or ar:theta, got {kernel_key!r}")

    rr = items["root_rate"]
    if rr == "kernel":
        root_rate = DrawnFromKernel()
    elif rr.startswith("fixed:"):
        root_rate = FixedRate(float(rr.split(":", 1)[1]))
    else:
        raise ConfigError(f"root_rate must be fixed:v or kernel, got {rr!r}")

    return SimConfig(
        division=division,
        growth=growth,
        split=split,
        kernel=kernel,
        horizon=horizon,
        root_size=_float_of(items, "root_size"),
        root_rate=root_rate,
    )


def _parse_rows(text: str) -> list:
    rows = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigError(f"rows entries must be alpha:T, got {part!r}")
        a, _, t = part.partition(":")
        rows.append((float(a), float(t)))
    if not rows:
        raise ConfigError("rows is empty")
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_age_curve(args) -> int:
    baseline = _parse_baseline_flag(args.baseline, args.vbar, args.sigma_eta)
    if args.vmin is not None or args.vmax is not None:
        if args.baseline.strip().lower() != "gauss":
            raise ConfigError("--vmin/--vmax apply to the gauss baseline")
        baseline = TruncatedGaussian(
            args.vmin if args.vmin is not None else 0.0,
            args.vmax if args.vmax is not None else 2.0 * args.vbar,
            args.sigma_eta,
        )
    alphas = [a for a in args.alpha if a > 0.0]
    rows = []
    for beta in args.beta:
        B = PowerLagRate(beta, args.lag)
        curve = cv_curve(B, baseline, alphas)
        lam_ref = next(r.lam for r in curve if r.alpha == 0.0)
        for r in curve:
            rows.append((beta, r.alpha, r.cv, r.lam, lam_ref, r.status))
    _write_csv(args.out, ["beta", "alpha", "cv", "lambda", "lambda_reference", "solver_status"], rows)
    return 0


def _cmd_age_perturb(args) -> int:
    if args.b_const is not None:
        B = ConstantRate(args.b_const)
    else:
        B = PowerLagRate(args.beta, args.lag)
    baseline = _parse_baseline_flag(args.baseline, args.vbar, args.sigma_eta)
    lam0 = malthus_reference(B, baseline.mean)
    d2 = d2lambda_at_zero(B, baseline)
    rows = []
    for alpha in sorted({0.0, *args.alphas}):
        if alpha == 0.0:
            rows.append((0.0, lam0, lam0, 0.0, d2, 0.0))
            continue
        fam = AlphaFamily(baseline, alpha)
        lam = malthus_with_variability(B, fam.law())
        approx = lam0 + 0.5 * d2 * alpha * alpha
        rows.append((alpha, lam, approx, lam - approx, d2, dlambda_dalpha(B, fam)))
    _write_csv(
        args.out,
        ["alpha", "lambda_exact", "lambda_quadratic_approx", "residual", "d2_at_zero", "dlambda_dalpha"],
        rows,
    )
    return 0


def _cmd_size_mc(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    items = _read_config(args.config, args.set)
    if "rows" not in items:
        raise ConfigError("config needs rows=alpha:T[,alpha:T...]")
    rows_spec = _parse_rows(items["rows"])
    m_trees = int(items["M"])
    seed = int(items["seed"])
    estimator = items["estimator"]
    if estimator not in ("biomass", "count"):
        raise ConfigError(f"estimator must be biomass or count, got {estimator!r}")
    if m_trees < 2:
        raise ConfigError("M must be at least 2")
    # validate every row's config before simulating anything
    configs = [_sim_config(items, alpha, T) for alpha, T in rows_spec]

    base = configs[0]
    table = cv_table(base, rows_spec, m_trees, seed, estimator)
    out_rows = []
    for row in table:
        e = row.estimate
        if e is None:
            nan = float("nan")
            out_rows.append((row.cv, row.alpha, row.T, nan, nan, nan, nan, nan, nan, nan))
        else:
            out_rows.append(
                (row.cv, row.alpha, row.T, e.mean, e.sd, e.ci_low, e.ci_high, e.pop_mean, e.pop_min, e.pop_max)
            )
    data = _write_csv(
        args.out,
        ["cv", "alpha", "T", "mean", "sd", "ci_low", "ci_high", "pop_mean", "pop_min", "pop_max"],
        out_rows,
    )
    config_text = "\n".join(f"{k}={v}" for k, v in sorted(items.items()))
    _write_manifest(args.out, "size-mc", config_text, seed, started, {args.out: data})
    for row in table:
        if row.estimate is None:
            print(f"row alpha={row.alpha} T={row.T}: {row.status}", file=sys.stderr)
    return 0


def _cmd_estimator_compare(args) -> int:
    items = _read_config(args.config, args.set)
    cfg = _sim_config(items, args.alpha, max(args.horizons))
    rows = estimator_sd_comparison(cfg, args.horizons, args.m, args.seed)
    _write_csv(args.out, ["T", "sd_biomass", "sd_count"], rows)
    return 0


def _cmd_tree_dump(args) -> int:
    items = _read_config(args.config, args.set)
    cfg = _sim_config(items, args.alpha, args.horizon)
    tree = simulate_tree(cfg, RngStream(args.seed, args.stream))
    rows = []
    for c in tree.cells():
        rows.append((c.path, c.parent_path if c.parent_path is not None else "", c.b, c.zeta, c.xi, c.tau, c.d))
    _write_csv(args.out, ["id_path", "parent_path", "b", "zeta", "xi", "tau", "d"], rows)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="malthus", description="Growth exponents of structured cell populations")
    sub = p.add_subparsers(dest="command", required=True)

    def add_baseline_flags(q):
        q.add_argument("--baseline", default="gauss", help="gauss or twopoint(v1,v2)")
        q.add_argument("--vbar", type=float, default=1.0, help="mean rate (gauss window center)")
        q.add_argument("--sigma-eta", type=float, default=0.7, dest="sigma_eta")
        q.add_argument("--vmin", type=float, default=None)
        q.add_argument("--vmax", type=float, default=None)

    q = sub.add_parser("age-curve", help="growth exponent vs rate variability (age model)")
    q.add_argument("--beta", type=float, nargs="+", required=True)
    q.add_argument("--lag", type=float, default=0.0)
    q.add_argument("--alpha", type=float, nargs="+", required=True)
    add_baseline_flags(q)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=_cmd_age_curve)

    q = sub.add_parser("age-perturb", help="quadratic expansion of the exponent in the contraction amount")
    g = q.add_mutually_exclusive_group()
    g.add_argument("--b-const", type=float, default=None, dest="b_const")
    g.add_argument("--beta", type=float, default=2.0)
    q.add_argument("--lag", type=float, default=1.0)
    q.add_argument("--alphas", type=float, nargs="+", required=True)
    add_baseline_flags(q)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=_cmd_age_perturb)

    q = sub.add_parser("size-mc", help="Monte Carlo growth-exponent table (size model)")
    q.add_argument("--config", default=None, help="key=value config file")
    q.add_argument("--set", action="append", default=[], help="override config entries")
    q.add_argument("--out", required=True)
    q.set_defaults(fn=_cmd_size_mc)

    q = sub.add_parser("estimator-compare", help="sd of biomass vs count estimators over horizons")
    q.add_argument("--alpha", type=float, default=0.3)
    q.add_argument("--horizons", type=float, nargs="+", required=True)
    q.add_argument("--m", type=int, default=50)
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--config", default=None)
    q.add_argument("--set", action="append", default=[])
    q.add_argument("--out", required=True)
    q.set_defaults(fn=_cmd_estimator_compare)

    q = sub.add_parser("tree-dump", help="one simulated tree, one CSV row per cell")
    q.add_argument("--alpha", type=float, default=0.0)
    q.add_argument("--horizon", type=float, default=6.0)
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--stream", type=int, default=0)
    q.add_argument("--config", default=None)
    q.add_argument("--set", action="append", default=[])
    q.add_argument("--out", required=True)
    q.set_defaults(fn=_cmd_tree_dump)

    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # simulation/solver failures
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
