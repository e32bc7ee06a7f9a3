"""Command line front end.

Every subcommand reads CSV inputs, writes CSV/JSON outputs next to a
``*.config.json`` (or ``run_config.json``) holding the resolved settings, and
prints a one-line JSON summary on stdout. Failures print a JSON error object
on stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import (
    Instance,
    approximation_ratio_harness,
    brute_force_opt,
    greedy_multichannel,
)
from .core import Environment, Link, PowerAssignment
from .evaluation import (
    Trial,
    best_beta,
    predicted_combined_rss,
    roc_sweep,
)
from .gains import (
    GainFormatError,
    NodeLayout,
    fit_path_loss,
    geometric_gain,
    load_layout,
    load_rss_matrix,
    lognormal_gain,
    median_rss_matrix,
    write_layout,
    write_rss_matrix,
)
from .layouts import named_layout
from .metricity import zeta_cdf, zeta_report, zeta_subset


class CliError(Exception):
    pass


ENV_DEFAULTS = {"noise_dbm": -99.1, "beta": 2.15, "tx_power_dbm": 0.0}


# --- helpers ----------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def _num(x: float):
    """JSON-friendly float: NaN/inf become strings so output stays valid JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise CliError(f"file not found: {path}") from None
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None


def _read_csv(path: str) -> list[dict]:
    rows = list(csv.DictReader(line for line in _read_text(path).splitlines() if not line.startswith("#")))
    return rows


def _load_gains(path: str, tx_power_dbm=None, channel_id=None):
    try:
        return load_rss_matrix(_read_text(path), tx_power_dbm=tx_power_dbm, channel_id=channel_id)
    except GainFormatError as e:
        raise CliError(f"{path}: {e}") from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_config(path: Path, config: dict) -> None:
    _write(path, _dumps(config) + "\n")


def _load_env(args) -> Environment:
    values = dict(ENV_DEFAULTS)
    if args.env:
        for k, line in enumerate(_read_text(args.env).splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{args.env}:{k}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in values:
                raise CliError(f"{args.env}:{k}: unknown key {key!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise CliError(f"{args.env}:{k}: {key} is not a number") from None
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    args.noise_dbm, args.beta, args.tx_power_dbm = values["noise_dbm"], values["beta"], values["tx_power_dbm"]
    try:
        return Environment.from_dbm(values["noise_dbm"], values["beta"], values["tx_power_dbm"])
    except ValueError as e:
        raise CliError(str(e)) from None


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    return cfg


def _node(gains, node_id, where: str) -> int:
    try:
        return gains.index_of(node_id)
    except KeyError:
        raise CliError(f"{where}: unknown node id {node_id!r}") from None


# --- subcommands ------------------------------------------------------------


def cmd_generate(args) -> dict:
    if args.layout_file:
        layout = load_layout(_read_text(args.layout_file))
    else:
        stochastic_layout = args.layout.startswith("random")
        if stochastic_layout and args.seed is None:
            raise CliError("--seed is required for random layouts")
        layout = named_layout(args.layout, spacing=args.spacing, side=args.side, seed=args.seed)
    if args.sigma > 0:
        if args.seed is None:
            raise CliError("--seed is required when --sigma > 0")
        gains = lognormal_gain(layout, args.alpha, args.sigma, args.seed)
    else:
        gains = geometric_gain(layout, args.alpha)
    out = Path(args.out)
    buf = io.StringIO()
    write_rss_matrix(gains, buf, tx_power_dbm=args.tx_power_dbm)
    _write(out, buf.getvalue())
    if args.layout_out:
        buf = io.StringIO()
        write_layout(layout, buf)
        _write(Path(args.layout_out), buf.getvalue())
    cfg = _config(args)
    _write_config(out.with_name(out.name + ".config.json"), cfg)
    return {"n": gains.n, "out": str(out), "config": cfg}


def cmd_zeta(args) -> dict:
    gains = _load_gains(args.gains)
    pct = [float(p) for p in args.percentiles.split(",") if p.strip()]
    if args.subset:
        nodes = [_node(gains, s.strip(), "--subset") for s in args.subset.split(",")]
        report = zeta_subset(gains, nodes, args.floor, pct)
    else:
        report = zeta_report(gains, args.floor, pct)
    summary = {k: _num(v) for k, v in report.summary().items()}
    summary["percentiles"] = {repr(q): v for q, v in sorted(report.percentiles.items())}
    cfg = _config(args)
    if args.out_dir:
        d = Path(args.out_dir)
        lines = ["sender,receiver,zeta"]
        for (x, y), z in sorted(report.zeta_pairs.items()):
            lines.append(f"{gains.node_ids[x]},{gains.node_ids[y]},{z!r}")
        _write(d / "zeta_pairs.csv", "\n".join(lines) + "\n")
        cdf = ["zeta,cumulative_fraction"] + [f"{z!r},{c!r}" for z, c in zeta_cdf(report)]
        _write(d / "zeta_cdf.csv", "\n".join(cdf) + "\n")
        _write(d / "zeta_summary.json", _dumps(summary) + "\n")
        _write_config(d / "run_config.json", cfg)
    return {**summary, "config": cfg}


def cmd_fit_alpha(args) -> dict:
    gains = _load_gains(args.gains)
    layout = load_layout(_read_text(args.layout_file))
    if layout.node_ids != gains.node_ids:
        order = [layout.node_ids.index(i) if i in layout.node_ids else None for i in gains.node_ids]
        if None in order:
            raise CliError("layout does not cover every node of the gain matrix")
        layout = NodeLayout(layout.positions[order], node_ids=gains.node_ids)
    fit = fit_path_loss(layout, gains)
    result = {"alpha": fit.alpha, "stderr": fit.stderr, "n_points": fit.n_points, "intercept_db": fit.intercept_db}
    cfg = _config(args)
    if args.out:
        out = Path(args.out)
        _write(out, _dumps(result) + "\n")
        _write_config(out.with_name(out.name + ".config.json"), cfg)
    return {**result, "config": cfg}


def cmd_median_rss(args) -> dict:
    mats = [_load_gains(p, channel_id=str(i)) for i, p in enumerate(args.gains)]
    ids = mats[0].node_ids
    for p, m in zip(args.gains, mats):
        if m.node_ids != ids:
            raise CliError(f"{p}: node ids differ from {args.gains[0]}")
    med = median_rss_matrix(mats)
    buf = io.StringIO()
    write_rss_matrix(med, buf, tx_power_dbm=0.0)
    out = Path(args.out)
    _write(out, buf.getvalue())
    cfg = _config(args)
    _write_config(out.with_name(out.name + ".config.json"), cfg)
    return {"n": med.n, "channels": len(mats), "unreachable": int((~med.reachable).sum()), "config": cfg}


def _read_links(path: str, gains, power_mode: str) -> list[Link]:
    links = []
    for k, row in enumerate(_read_csv(path), start=2):
        try:
            lid = int(row["id"])
            s = _node(gains, row["sender"].strip(), f"{path}:{k}")
            r = _node(gains, row["receiver"].strip(), f"{path}:{k}")
            p = row.get("power_mw") or ""
            power = float(p) if p.strip() else 1.0
        except (KeyError, TypeError):
            raise CliError(f"{path}: expected columns id,sender,receiver,power_mw") from None
        except ValueError:
            raise CliError(f"{path}:{k}: malformed number") from None
        if power_mode == "file" and not p.strip():
            raise CliError(f"{path}:{k}: power_mw required with --power file")
        try:
            links.append(Link(lid, s, r, power))
        except ValueError as e:
            raise CliError(f"{path}:{k}: {e}") from None
    return links


def cmd_capacity(args) -> dict:
    env = _load_env(args)
    mats = [_load_gains(p, channel_id=str(i)) for i, p in enumerate(args.gains)]
    k = args.k if args.k is not None else len(mats)
    if len(mats) not in (1, k):
        raise CliError(f"got {len(mats)} gain files for k={k}; give one shared file or one per channel")
    primary = mats[0]
    links = _read_links(args.links, primary, args.power)
    if args.power == "uniform":
        level = args.power_level if args.power_level is not None else env.tx_power_mw
        links = PowerAssignment("uniform", level).apply(links, primary)
    elif args.power == "linear":
        if args.power_level is not None:
            level = args.power_level
        else:
            # longest link sends at the reference power
            level = env.tx_power_mw / max(primary.decay(l.sender, l.receiver) for l in links)
        links = PowerAssignment("linear", level).apply(links, primary)
    ids = {l.id for l in links}
    if args.eligibility:
        elig = [set() for _ in range(k)]
        for j, row in enumerate(_read_csv(args.eligibility), start=2):
            try:
                lid, ch = int(row["link_id"]), int(row["channel"])
            except (KeyError, TypeError, ValueError):
                raise CliError(f"{args.eligibility}:{j}: expected integer link_id,channel") from None
            if not 0 <= ch < k:
                raise CliError(f"{args.eligibility}:{j}: channel {ch} outside 0..{k - 1}")
            if lid not in ids:
                raise CliError(f"{args.eligibility}:{j}: unknown link id {lid}")
            elig[ch].add(lid)
    else:
        elig = [set(ids) for _ in range(k)]
    try:
        inst = Instance(tuple(links), k, tuple(elig), tuple(mats), env)
    except ValueError as e:
        raise CliError(str(e)) from None
    sched = greedy_multichannel(inst)
    chan = sched.channel_of()
    summary = {
        "n": inst.n,
        "k": k,
        "scheduled": sched.size,
        "per_channel_sizes": [len(s) for s in sched.assignment],
        "markov_check": sched.markov_ok(),
        "feasibility_check": True,
    }
    if args.brute_force:
        summary["optimum"] = brute_force_opt(inst)
    cfg = _config(args)
    if args.out_dir:
        d = Path(args.out_dir)
        lines = ["link_id,channel"] + [f"{l.id},{chan.get(l.id, '-')}" for l in links]
        _write(d / "schedule.csv", "\n".join(lines) + "\n")
        _write(d / "summary.json", _dumps(summary) + "\n")
        _write_config(d / "run_config.json", cfg)
    return {**summary, "config": cfg}


def cmd_ratio_harness(args) -> dict:
    env = Environment(noise_mw=args.noise_mw, beta=args.beta_harness)
    res = approximation_ratio_harness(
        args.trials, args.seed, n_max=args.n_max, k_max=args.k_max, alpha=args.alpha,
        sigma=args.sigma, power=args.power, env=env,
    )
    cfg = _config(args)
    stats = res.stats()
    stats["ceiling_violations"] = int(sum(r["ratio"] > 3.0 ** r["zeta_max"] for r in res.rows))
    if args.out:
        out = Path(args.out)
        lines = ["trial,n,k,zeta_max,opt,greedy,ratio"]
        for r in res.rows:
            lines.append(f"{r['trial']},{r['n']},{r['k']},{r['zeta_max']!r},{r['opt']},{r['greedy']},{r['ratio']!r}")
        _write(out, "\n".join(lines) + "\n")
        _write_config(out.with_name(out.name + ".config.json"), cfg)
    return {**stats, "config": cfg}


def _read_trials(path: str, mats, env: Environment) -> list[Trial]:
    power = env.tx_power_mw
    trials = []
    for k, row in enumerate(_read_csv(path), start=2):
        where = f"{path}:{k}"
        try:
            ch = int(row.get("channel") or 0)
            prr = float(row["prr"])
            raw_ids = (row.get("interferer_ids") or "").strip()
        except (KeyError, TypeError):
            raise CliError(f"{path}: expected columns sender,receiver,interferer_ids,prr,channel") from None
        except ValueError:
            raise CliError(f"{where}: malformed number") from None
        if not 0 <= ch < len(mats):
            raise CliError(f"{where}: channel {ch} has no gain matrix")
        g = mats[ch]
        s = _node(g, row["sender"].strip(), where)
        r = _node(g, row["receiver"].strip(), where)
        senders = [_node(g, t.strip(), where) for t in raw_ids.split(";") if t.strip()]
        if any(u in (s, r) for u in senders):
            raise CliError(f"{where}: an interferer coincides with the link's sender or receiver")
        try:
            link = Link(0, s, r, power)
            interferers = tuple(Link(j + 1, u, r, power) for j, u in enumerate(senders))
            trials.append(Trial(link, interferers, prr, ch))
        except ValueError as e:
            raise CliError(f"{where}: {e}") from None
    if not trials:
        raise CliError(f"{path}: no trials")
    return trials


def cmd_roc(args) -> dict:
    env = _load_env(args)
    mats = [_load_gains(p, channel_id=str(i)) for i, p in enumerate(args.gains)]
    trials = _read_trials(args.trials, mats, env)
    grid = np.logspace(math.log10(args.beta_min), math.log10(args.beta_max), args.beta_points)
    points = roc_sweep(trials, mats, env, grid, args.t_high, args.t_low)
    try:
        best = best_beta(points)
    except ValueError:
        best = None
    cfg = _config(args)
    if args.out:
        out = Path(args.out)
        lines = ["beta,tpr,fpr,tp,fp,tn,fn,excluded"]
        for p in points:
            lines.append(f"{p.beta!r},{p.tpr!r},{p.fpr!r},{p.tp},{p.fp},{p.tn},{p.fn},{p.excluded}")
        _write(out, "\n".join(lines) + "\n")
        _write_config(out.with_name(out.name + ".config.json"), cfg)
    best_pt = next((p for p in points if p.beta == best), None)
    return {
        "trials": len(trials),
        "excluded": points[0].excluded,
        "best_beta": best,
        "best_tpr": None if best_pt is None else best_pt.tpr,
        "best_fpr": None if best_pt is None else best_pt.fpr,
        "config": cfg,
    }


def cmd_additivity(args) -> dict:
    env = _load_env(args)
    gains = _load_gains(args.gains)
    power = env.tx_power_mw
    cases = []
    if args.cases:
        for k, row in enumerate(_read_csv(args.cases), start=2):
            where = f"{args.cases}:{k}"
            try:
                senders = [s.strip() for s in row["senders"].split(";") if s.strip()]
                receiver = row["receiver"].strip()
                m = (row.get("measured_dbm") or "").strip()
                measured = float(m) if m else None
            except (KeyError, AttributeError):
                raise CliError(f"{args.cases}: expected columns senders,receiver[,measured_dbm]") from None
            except ValueError:
                raise CliError(f"{where}: malformed measured_dbm") from None
            cases.append((senders, receiver, measured, where))
    elif args.senders and args.receiver is not None:
        cases.append(([s.strip() for s in args.senders.split(";") if s.strip()], args.receiver, None, "--senders"))
    else:
        raise CliError("give --cases FILE or both --senders and --receiver")
    rows = []
    for senders, receiver, measured, where in cases:
        r = _node(gains, receiver, where)
        idx = [_node(gains, s, where) for s in senders]
        if not idx or r in idx:
            raise CliError(f"{where}: need senders distinct from the receiver")
        links = [Link(j, u, r, power) for j, u in enumerate(idx)]
        rows.append((";".join(senders), receiver, predicted_combined_rss(links, r, gains, env), measured))
    summary = {"cases": len(rows)}
    pairs = [(p, m) for _, _, p, m in rows if m is not None and math.isfinite(p)]
    if len(pairs) >= 2:
        pred, meas = np.array(pairs).T
        summary["r2"] = float(np.corrcoef(pred, meas)[0, 1] ** 2)
        summary["mean_abs_error_db"] = float(np.mean(np.abs(pred - meas)))
    if len(rows) == 1:
        summary["predicted_dbm"] = _num(rows[0][2])
    cfg = _config(args)
    if args.out:
        out = Path(args.out)
        lines = ["senders,receiver,predicted_dbm,measured_dbm"]
        for s, r, p, m in rows:
            lines.append(f"{s},{r},{p!r},{'' if m is None else repr(m)}")
        _write(out, "\n".join(lines) + "\n")
        _write_config(out.with_name(out.name + ".config.json"), cfg)
    return {**summary, "config": cfg}


# --- parser -----------------------------------------------------------------


def _env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", help="key=value file with noise_dbm, beta, tx_power_dbm")
    p.add_argument("--noise-dbm", dest="noise_dbm", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tx-power-dbm", dest="tx_power_dbm", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mbsinr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthetic geometric / log-normal RSS matrix")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--layout", help="grid4x5, arc60, gridRxC or randomN")
    g.add_argument("--layout-file", help="layout CSV id,x,y[,z]")
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--side", type=float, default=10.0, help="square side for random layouts (m)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--tx-power-dbm", dest="tx_power_dbm", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--layout-out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("zeta", help="metricity of a gain matrix")
    p.add_argument("--gains", required=True)
    p.add_argument("--floor", type=float, default=1.0)
    p.add_argument("--percentiles", default="95,99")
    p.add_argument("--subset", help="comma-separated node ids")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_zeta)

    p = sub.add_parser("fit-alpha", help="least-squares path-loss exponent")
    p.add_argument("--gains", required=True)
    p.add_argument("--layout-file", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_alpha)

    p = sub.add_parser("median-rss", help="per-pair median over channel matrices")
    p.add_argument("--gains", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_median_rss)

    p = sub.add_parser("capacity", help="greedy multi-channel link capacity")
    p.add_argument("--links", required=True)
    p.add_argument("--eligibility", help="CSV link_id,channel (default: all links on all channels)")
    p.add_argument("--gains", nargs="+", required=True, help="one shared matrix or one per channel")
    p.add_argument("--k", type=int)
    p.add_argument("--power", choices=["uniform", "linear", "file"], default="uniform")
    p.add_argument("--power-level", type=float, help="uniform mW, or linear received mW")
    p.add_argument("--brute-force", action="store_true", help="also report the exact optimum")
    p.add_argument("--out-dir")
    _env_flags(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("ratio-harness", help="greedy vs exhaustive optimum on random instances")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--k-max", type=int, default=2)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--power", choices=["uniform", "linear"], default="uniform")
    p.add_argument("--noise-mw", type=float, default=1e-6)
    p.add_argument("--beta", dest="beta_harness", type=float, default=1.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ratio_harness)

    p = sub.add_parser("roc", help="ROC sweep of the SINR classifier over beta")
    p.add_argument("--trials", required=True)
    p.add_argument("--gains", nargs="+", required=True, help="matrix per channel index")
    p.add_argument("--beta-min", type=float, default=1e-2)
    p.add_argument("--beta-max", type=float, default=1e4)
    p.add_argument("--beta-points", type=int, default=200)
    p.add_argument("--t-high", type=float, default=0.8)
    p.add_argument("--t-low", type=float, default=0.2)
    p.add_argument("--out")
    _env_flags(p)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("additivity", help="predicted combined RSS of simultaneous senders")
    p.add_argument("--gains", required=True)
    p.add_argument("--cases", help="CSV senders(;-separated),receiver[,measured_dbm]")
    p.add_argument("--senders", help="';'-separated sender node ids")
    p.add_argument("--receiver")
    p.add_argument("--out")
    _env_flags(p)
    p.set_defaults(func=cmd_additivity)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        summary = args.func(args)
    except CliError as e:
        print(_dumps({"error": str(e), "command": args.command}), file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(_dumps({"error": f"{type(e).__name__}: {e}", "command": args.command}), file=sys.stderr)
        return 2
    print(_dumps({"command": args.command, **summary}))
    return 0


def main() -> None:
    sys.exit(run())
