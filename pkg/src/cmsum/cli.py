"""Batch front-end: problem files in, tables/JSON/CSV (and figures) out.

A problem file is a single JSON object naming the two marginals, the
probability levels and retentions to evaluate, and the verification
settings.  ``report`` writes a JSON report with every decomposition;
``gplot`` samples the quantile-sum curve to CSV with a crossing-set
sidecar; ``verify`` runs the oracle comparisons only and prints one
pass/fail line per check.

Exit codes: 0 success, 2 unusable problem specification, 3 degenerate
counter-monotonic sum, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field

from . import decomposition as dc
from . import oracle
from .crossing import GPair, crossing_set, sum_quantile
from .errors import CmsumError, DegenerateSum
from .marginals import from_descriptor

EXIT_OK = 0
EXIT_BAD_SPEC = 2
EXIT_DEGENERATE = 3
EXIT_VERIFY_FAILED = 4


class SpecError(ValueError):
    """The problem file cannot be used as given."""


@dataclass
class ProblemSpec:
    """Parsed problem file."""

    pair: GPair
    levels: list[float]
    retentions: list[float]
    alpha: float = 0.0
    verify: bool = False
    mc_samples: int = 0
    seed: int = 0
    outputs: list[str] = field(default_factory=list)
    raw: dict = field(default_factory=dict)


def load_spec(path: str) -> ProblemSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read problem file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SpecError("problem file must hold a JSON object")
    try:
        first = from_descriptor(raw["marginal1"])
        second = from_descriptor(raw["marginal2"])
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecError(f"bad marginal descriptor: {exc}") from exc
    levels = [float(p) for p in raw.get("levels", [])]
    retentions = [float(x) for x in raw.get("retentions", [])]
    if not levels and not retentions:
        raise SpecError("nothing to compute: no levels and no retentions")
    if any(not 0.0 < p < 1.0 for p in levels):
        raise SpecError(f"levels must lie in (0, 1): {levels}")
    alpha = float(raw.get("alpha", 0.0))
    if not 0.0 <= alpha <= 1.0:
        raise SpecError(f"alpha must lie in [0, 1]: {alpha}")
    mc_samples = int(raw.get("mc_samples", 0))
    if mc_samples < 0:
        raise SpecError("mc_samples must be >= 0")
    clip = float(raw.get("clip", 1e-9))
    try:
        pair = GPair(first, second, clip=clip)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    return ProblemSpec(
        pair=pair, levels=levels, retentions=retentions, alpha=alpha,
        verify=bool(raw.get("verify", False)), mc_samples=mc_samples,
        seed=int(raw.get("seed", 0)), outputs=list(raw.get("outputs", [])),
        raw=raw,
    )


def _thread_cap() -> int:
    raw = os.environ.get("CMSUM_THREADS", "")
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError as exc:
        raise SpecError(f"CMSUM_THREADS must be an integer: {raw!r}") from exc
    if cap < 1:
        raise SpecError(f"CMSUM_THREADS must be >= 1: {cap}")
    return cap


def _verify_entry(pair: GPair, target: str, level: float, analytic: float,
                  spec: ProblemSpec, alpha: float = 0.0) -> dict:
    rep = oracle.build_report(
        pair, target, level, alpha=alpha, n_samples=spec.mc_samples, seed=spec.seed,
    )
    verdict = oracle.compare(analytic, rep, target, level)
    entry = rep.to_dict()
    entry["analytic"] = analytic
    entry["verdict"] = verdict
    return entry


def _level_block(spec: ProblemSpec, p: float) -> dict:
    pair, alpha = spec.pair, spec.alpha
    var_dec = dc.var_countermonotonic(pair, p)
    tvar_dec = dc.tvar_countermonotonic(pair, p, alpha)
    sp = dc.spread(pair, p)
    block = {
        "p": p,
        "var": {
            "comonotonic": dc.var_comonotonic(pair, p),
            "countermonotonic": var_dec.to_dict(),
        },
        "tvar": {
            "comonotonic": dc.tvar_comonotonic(pair, p),
            "countermonotonic": tvar_dec.to_dict(),
            "simple": dc.tvar_simple(pair, p),
        },
        "spread": sp.to_dict(),
    }
    if spec.verify:
        block["verification"] = {
            "var": _verify_entry(pair, "var", p, var_dec.value, spec),
            "tvar": _verify_entry(pair, "tvar", p, tvar_dec.total, spec, alpha=alpha),
        }
    return block


def _retention_block(spec: ProblemSpec, x: float) -> dict:
    pair = spec.pair
    sl = dc.stoploss_countermonotonic(pair, x, form="left_inverse")
    slg = dc.stoploss_countermonotonic(pair, x, form="generalized_inverse")
    single = dc.stoploss_single_crossing(pair, x)
    block = {
        "x": x,
        "stoploss": {
            "comonotonic": dc.stoploss_comonotonic(pair, x).to_dict(),
            "countermonotonic": sl.to_dict(),
            "countermonotonic_generalized": slg.to_dict(),
            "single_crossing": None if single is None else single.to_dict(),
        },
    }
    if spec.verify:
        block["verification"] = {
            "stoploss": _verify_entry(pair, "stoploss", x, sl.total, spec),
        }
    return block


def build_report(spec: ProblemSpec) -> dict:
    report = {
        "problem": spec.raw,
        "levels": [_level_block(spec, p) for p in spec.levels],
        "retentions": [_retention_block(spec, x) for x in spec.retentions],
    }
    if spec.levels:
        rows = dc.approximation_report(spec.pair, spec.levels)
        report["approximation"] = [r.to_dict() for r in rows]
    return report


def _collect_verdicts(report: dict) -> list[tuple[str, float, str]]:
    out = []
    for block in report.get("levels", []):
        for target, entry in block.get("verification", {}).items():
            out.append((target, block["p"], entry["verdict"]))
    for block in report.get("retentions", []):
        for target, entry in block.get("verification", {}).items():
            out.append((target, block["x"], entry["verdict"]))
    return out


def _dump_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_report(args) -> int:
    spec = load_spec(args.spec)
    _thread_cap()
    report = build_report(spec)
    out = args.out or (spec.outputs[0] if spec.outputs else None)
    _dump_json(report, out)
    if args.figures:
        render_report_figures(spec, report, args.figures)
    verdicts = _collect_verdicts(report)
    if any(v != "pass" for _, _, v in verdicts):
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def cmd_gplot(args) -> int:
    spec = load_spec(args.spec)
    if args.points < 2:
        raise SpecError(f"need at least 2 sample points, got {args.points}")
    pair = spec.pair
    grid = pair.grid(args.points)
    is_bp = [0] * len(grid.nodes)
    for i in grid.bp_idx:
        is_bp[int(i)] = 1
    out = args.out or (spec.outputs[0] if spec.outputs else "g.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "g", "is_breakpoint"])
        for u, g, b in zip(grid.nodes, grid.g_at, is_bp):
            writer.writerow([repr(float(u)), repr(float(g)), b])
    sidecar = {"levels": []}
    for p in spec.levels:
        x = sum_quantile(pair, p, spec.alpha)
        cs = crossing_set(pair, x)
        sidecar["levels"].append({"p": p, "x": x, "crossing_set": cs.to_dict()})
    sidecar_path = os.path.splitext(out)[0] + ".crossings.json"
    _dump_json(sidecar, sidecar_path)
    if args.figures:
        render_gplot_figure(spec, grid, sidecar, args.figures)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = load_spec(args.spec)
    pair = spec.pair
    rows = []
    for p in spec.levels:
        var_dec = dc.var_countermonotonic(pair, p)
        rows.append(("var", p, _verify_entry(pair, "var", p, var_dec.value, spec)))
        tvar_dec = dc.tvar_countermonotonic(pair, p, spec.alpha)
        rows.append(("tvar", p,
                     _verify_entry(pair, "tvar", p, tvar_dec.total, spec, alpha=spec.alpha)))
    for x in spec.retentions:
        sl = dc.stoploss_countermonotonic(pair, x)
        rows.append(("stoploss", x, _verify_entry(pair, "stoploss", x, sl.total, spec)))
    failures = 0
    for target, level, entry in rows:
        verdict = entry["verdict"]
        if verdict != "pass":
            failures += 1
        mc = entry["mc_value"]
        mc_txt = "-" if mc is None else f"{mc:.8g}±{entry['mc_std_error']:.2g}"
        print(f"{verdict.upper():12s} {target:8s} level={level:<12.8g} "
              f"analytic={entry['analytic']:.10g} quad={entry['quadrature_value']:.10g} "
              f"mc={mc_txt}")
    print(f"{len(rows)} checks, {failures} not passing")
    return EXIT_OK if failures == 0 else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# optional matplotlib rendering


def _mpl():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_gplot_figure(spec: ProblemSpec, grid, sidecar: dict, outdir: str) -> None:
    plt = _mpl()
    os.makedirs(outdir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(grid.nodes, grid.g_at, lw=1.0, color="C0")
    for entry in sidecar["levels"]:
        x = entry["x"]
        ax.axhline(x, color="k", ls="--", lw=0.8)
        us = [pt["u"] for pt in entry["crossing_set"]["points"]]
        ax.plot(us, [x] * len(us), "o", ms=4, color="C3")
    ax.set_xlabel("u")
    ax.set_ylabel("g(u)")
    ax.set_title("counter-monotonic quantile sum")
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "g_curve.png"), dpi=150)
    plt.close(fig)


def render_report_figures(spec: ProblemSpec, report: dict, outdir: str) -> None:
    plt = _mpl()
    os.makedirs(outdir, exist_ok=True)
    for block in report.get("levels", []):
        terms = block["tvar"]["countermonotonic"]["terms"]
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(range(1, len(terms) + 1), [t["scaled"] for t in terms], color="C0")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel("component j")
        ax.set_ylabel("contribution to TVaR")
        ax.set_title(f"TVaR decomposition terms at p={block['p']:g}")
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, f"tvar_terms_p{block['p']:g}.png"), dpi=150)
        plt.close(fig)
    rows = report.get("approximation", [])
    if len(rows) >= 2:
        ps = [r["p"] for r in rows]
        fig, axes = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
        axes[0].plot(ps, [r["rel_err1"] for r in rows], "k-", label="two-term form 1")
        axes[0].plot(ps, [r["rel_err2"] for r in rows], "b--", label="two-term form 2")
        axes[0].set_ylabel("TVaR relative error (%)")
        axes[0].legend()
        axes[1].plot(ps, [r["spread_rel_err1"] for r in rows], "k-")
        axes[1].plot(ps, [r["spread_rel_err2"] for r in rows], "b--")
        axes[1].set_ylabel("spread relative error (%)")
        axes[1].set_xlabel("p")
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "approximation_errors.png"), dpi=150)
        plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cmsum",
        description="Risk measures of two-variable counter-monotonic sums.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_report = sub.add_parser("report", help="full decomposition report as JSON")
    p_report.add_argument("spec", help="problem file (JSON)")
    p_report.add_argument("--out", help="report path (stdout when omitted)")
    p_report.add_argument("--figures", metavar="DIR",
                          help="also render matplotlib figures into DIR")
    p_report.set_defaults(func=cmd_report)

    p_gplot = sub.add_parser("gplot", help="sample the quantile-sum curve to CSV")
    p_gplot.add_argument("spec", help="problem file (JSON)")
    p_gplot.add_argument("--points", type=int, default=1001, help="number of samples")
    p_gplot.add_argument("--out", help="CSV path (default g.csv)")
    p_gplot.add_argument("--figures", metavar="DIR",
                         help="also render the curve figure into DIR")
    p_gplot.set_defaults(func=cmd_gplot)

    p_verify = sub.add_parser("verify", help="oracle comparisons only")
    p_verify.add_argument("spec", help="problem file (JSON)")
    p_verify.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_SPEC
    except DegenerateSum as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except CmsumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_SPEC


if __name__ == "__main__":
    sys.exit(main())
