"""``adaptive-pll`` command: run scenarios, extract plot data, diagnostics.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 infeasible
power flow, 5 I/O error.
"""
import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA, ConfigError, SimConfig, parse_config
from .ctrl import InfeasiblePowerFlow, compute_references, equilibrium_residual
from .engine import (DivergenceError, Scenario, builtin_scenarios, lre_probe,
                     parse_scenario, read_trace_csv, run_scenario, scenario_to_text,
                     write_trace_csv)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4, 5

# figure -> list of (curve name, column, scale)
FIGURES = {
    "p-step": [("i_d", "i_d", 1.0), ("i_q", "i_q", 1.0), ("phi_deg", "phi_deg", 1.0),
               ("i_d_ref", "i_d_ref", 1.0), ("i_q_ref", "i_q_ref", 1.0),
               ("phi_ref_deg", "phi_ref", 180 / np.pi)],
    "comparison": [("i_d", "i_d", 1.0), ("i_q", "i_q", 1.0), ("phi_deg", "phi_deg", 1.0)],
    "w-step": [("i_d", "i_d", 1.0), ("i_q", "i_q", 1.0), ("phi_deg", "phi_deg", 1.0)],
    "vg-step": [("i_d", "i_d", 1.0), ("i_q", "i_q", 1.0), ("phi_deg", "phi_deg", 1.0)],
    "f-estimate": [("f_hat", "f_hat", 1.0), ("f_true", "f_true", 1.0)],
    "vg-estimate": [("Vg_hat", "Vg_hat", 1.0), ("Vg_true", "Vg_true", 1.0)],
}

_UNITS = {"i_d": "A", "i_q": "A", "i_d_ref": "A", "i_q_ref": "A", "phi_deg": "deg",
          "phi_ref_deg": "deg", "f_hat": "Hz", "f_true": "Hz", "Vg_hat": "V", "Vg_true": "V"}


def git_blob_hash(text):
    data = text.encode("utf-8")
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _fmt_settle(v):
    return "not settled" if v is None else f"{v:.4f} s"


def format_summary(trace):
    lines = [f"scenario: {trace.meta['scenario']} ({trace.meta['variant']})"]
    for ev in trace.meta["summary"]["events"]:
        lines.append(f"  {ev['event']}")
        for ch in ("i_d", "i_q", "phi_deg", "f_hat", "Vg_hat"):
            lines.append(f"    settling {ch:8s} {_fmt_settle(ev[ch])}")
    lines.append("  final errors:")
    for k, v in trace.meta["summary"]["final"].items():
        lines.append(f"    {k:14s} {v: .6g}")
    return "\n".join(lines) + "\n"


def manifest_text(cfg, sc, traces):
    body = cfg.to_text() + "\n" + scenario_to_text(sc)
    lines = [body, "[references]"]
    for P, r in sorted(traces[0].meta["references"].items()):
        lines.append(f"P{P:g}.i_dq_ref = {float(r.i_dq_ref[0])!r}, {float(r.i_dq_ref[1])!r}")
        lines.append(f"P{P:g}.phi_ref = {r.phi_ref!r}")
        lines.append(f"P{P:g}.v_dq_ref = {float(r.v_dq_ref[0])!r}, {float(r.v_dq_ref[1])!r}")
        lines.append(f"P{P:g}.Q = {r.Q!r}")
    lines += ["", "[run]", f"version = {__version__}", f"content_hash = {git_blob_hash(body)}"]
    for kind, t_req, t_used, snap in traces[0].meta["event_snaps"]:
        lines.append(f"snap.{kind}@{t_req!r} = {t_used!r} (distance {snap:.3g} s)")
    return "\n".join(lines) + "\n"


def _load_config(path, overrides):
    cfg = parse_config(path) if path else SimConfig()
    changes = {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        sec, dot, k = key.strip().partition(".")
        if not (sep and dot and sec in SCHEMA and k in SCHEMA[sec]):
            raise ConfigError(f"--set expects a known section.key=value, got {item!r}")
        try:
            changes[f"{sec}__{k}"] = SCHEMA[sec][k][0](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{sec}.{k} = {raw.strip()!r}: {exc}") from exc
    return cfg.replace(**changes) if changes else cfg


def cmd_run(cfg, scenario, out_dir):
    """Run one scenario (two variants for ``comparison``) and write outputs.

    Writes ``trace*.csv``, ``manifest.ini`` and ``summary.txt``; returns the traces.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if scenario.name == "comparison" and scenario.pll_variant is None:
        variants = ["adaptive", "baseline"]
    else:
        variants = [scenario.pll_variant or cfg.pll.source]
    traces = []
    for v in variants:
        try:
            traces.append(run_scenario(cfg, scenario, variant=v))
        except DivergenceError as exc:
            if exc.trace is not None:
                write_trace_csv(exc.trace, out / f"trace_{v}_partial.csv")
            raise
    summary = []
    for v, tr in zip(variants, traces):
        name = "trace.csv" if len(variants) == 1 else f"trace_{v}.csv"
        write_trace_csv(tr, out / name)
        summary.append(format_summary(tr))
    (out / "summary.txt").write_text("\n".join(summary), encoding="utf-8")
    (out / "manifest.ini").write_text(manifest_text(cfg, scenario, traces), encoding="utf-8")
    return traces


def cmd_plotdata(trace_csv, figure, out_dir):
    """Write one two-column ``t value`` file per curve of `figure` plus ``legend.txt``."""
    if figure not in FIGURES:
        raise KeyError(f"unknown figure {figure!r}; valid: {', '.join(FIGURES)}")
    trace = read_trace_csv(trace_csv)
    missing = [col for _, col, _ in FIGURES[figure] if col not in trace.data]
    missing += [] if "t" in trace.data else ["t"]
    if missing:
        raise KeyError(f"trace is missing columns: {', '.join(missing)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    legend = [f"# figure {figure} from {trace_csv}", "# file curve unit"]
    written = []
    for curve, col, scale in FIGURES[figure]:
        path = out / f"{figure}_{curve}.dat"
        np.savetxt(path, np.column_stack([trace.t, trace[col] * scale]), fmt="%.10g")
        legend.append(f"{path.name} {curve} {_UNITS.get(curve, '-')}")
        written.append(path)
    (out / f"{figure}_legend.txt").write_text("\n".join(legend) + "\n", encoding="utf-8")
    return written


def cmd_check(cfg):
    """Nominal run diagnostics; returns the report text."""
    refs = compute_references(cfg.P_ref, cfg.V_ref, cfg.grid, cfg.plant)
    lines = ["equilibrium:"]
    lines.append(f"  dq derivative norm at references   {equilibrium_residual(refs, cfg.grid, cfg.plant):.3e}")
    P_audit = 1.5 * float(refs.v_dq_ref @ refs.i_g_dq_ref)
    rel = abs(P_audit - cfg.P_ref) / cfg.P_ref if cfg.P_ref > 0 else abs(P_audit)
    lines.append(f"  power audit 1.5 v.i_g = {P_audit:.9g} W (rel. error {rel:.2e})")
    lines.append(f"  phi_ref = {np.degrees(refs.phi_ref):.6f} deg, i_dq_ref = "
                 f"({refs.i_dq_ref[0]:.6f}, {refs.i_dq_ref[1]:.6f}) A, Q = {refs.Q:.4f} var")

    tr = run_scenario(cfg, Scenario("nominal", cfg.duration))
    t, pe, fn, fr = tr.t, tr["pe_metric"], tr["F_norm"], tr["frozen"]
    after = (t >= cfg.warmup) & np.isfinite(pe)
    lines.append(f"excitation (window {cfg.pe_window:g} s):")
    if after.any():
        lines.append(f"  min after warm-up {pe[after].min():.4e}, final {pe[-1]:.4e}")
        low = after & (pe < cfg.pe_threshold)
        if low.any():
            lines.append(f"  WARNING: below threshold {cfg.pe_threshold:g} from t = {t[low][0]:.4f} s")
    else:
        lines.append("  no samples after warm-up")
    k = np.arange(0, len(t), max(1, len(t) // 10))
    lines.append("  t [s]    pe_metric")
    lines += [f"  {t[j]:7.3f}  {pe[j]:.4e}" for j in k]
    lines.append("gain matrix:")
    lines.append(f"  ||F|| max {fn.max():.4g}, min {fn.min():.4g}, final {fn[-1]:.4g}")
    onsets = np.nonzero(np.diff(np.concatenate([[0.0], fr])) > 0)[0]
    if onsets.size:
        lines.append(f"  freeze events: {onsets.size}, first at t = {t[onsets[0]]:.5f} s, "
                     f"frozen fraction {fr.mean():.3f}")
    else:
        lines.append("  freeze events: 0")
    t_l, res, rate = lre_probe(cfg)
    lines.append("LRE residual from the operating point:")
    lines.append(f"  initial {res[0]:.4e}, at 20 ms {res[-1]:.4e} "
                 f"(ratio {res[-1] / res[0]:.2e}), fitted rate {rate:.2f} 1/s "
                 f"(filter pole {cfg.filt.lam:g})")
    return "\n".join(lines) + "\n"


def _parser():
    ap = argparse.ArgumentParser(prog="adaptive-pll", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add_cfg(p):
        p.add_argument("-c", "--config", help="config file (defaults: laboratory setup)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config value; repeatable")

    run = sub.add_parser("run", help="simulate a scenario")
    add_cfg(run)
    g = run.add_mutually_exclusive_group(required=True)
    g.add_argument("-s", "--scenario", help="built-in scenario name")
    g.add_argument("--scenario-file", help="file with a [scenario] section (e.g. a manifest)")
    g.add_argument("-m", "--manifest", help="re-run from a manifest: config and scenario")
    run.add_argument("-o", "--out", default="out", help="output directory")

    pd = sub.add_parser("plotdata", help="extract figure curves from a trace CSV")
    pd.add_argument("trace")
    pd.add_argument("figure", help="one of: " + ", ".join(FIGURES))
    pd.add_argument("-o", "--out", default="plotdata")

    ck = sub.add_parser("check", help="diagnostics on the nominal scenario")
    add_cfg(ck)
    ck.add_argument("-o", "--out", help="also write the report here")

    ls = sub.add_parser("list-scenarios", help="show the built-in scenarios")
    add_cfg(ls)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "plotdata":
            try:
                files = cmd_plotdata(args.trace, args.figure, args.out)
            except KeyError as exc:
                print(f"error: {exc.args[0]}", file=sys.stderr)
                return EXIT_CONFIG
            print("\n".join(str(f) for f in files))
            return EXIT_OK

        if getattr(args, "manifest", None):
            args.config = args.scenario_file = args.manifest
        cfg = _load_config(args.config, args.set)
        if args.cmd == "list-scenarios":
            for sc in builtin_scenarios(cfg).values():
                evs = "; ".join(f"t={e.time:g} {e.kind}->{e.value:g}" for e in sc.events)
                print(f"{sc.name:12s} duration {sc.duration:g} s, P_start {sc.P_start:g} W: {evs}")
            return EXIT_OK
        if args.cmd == "check":
            report = cmd_check(cfg)
            print(report, end="")
            if args.out:
                Path(args.out).write_text(report, encoding="utf-8")
            return EXIT_OK

        if args.scenario:
            scs = builtin_scenarios(cfg)
            if args.scenario not in scs:
                raise ConfigError(f"unknown scenario {args.scenario!r}; valid: {', '.join(scs)}")
            sc = scs[args.scenario]
        else:
            try:
                sc = parse_scenario(Path(args.scenario_file).read_text(encoding="utf-8"),
                                    source=args.scenario_file)
            except FileNotFoundError as exc:
                raise ConfigError(f"scenario file not found: {args.scenario_file}") from exc
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        traces = cmd_run(cfg, sc, args.out)
        for tr in traces:
            print(format_summary(tr), end="")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InfeasiblePowerFlow as exc:
        print(f"infeasible power flow: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
