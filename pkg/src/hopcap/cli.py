"""Command-line entry point.

Exit codes: 0 success / Holds, 1 Fails, 2 usage error, library error or Indeterminate.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass, fields, is_dataclass
from enum import Enum

import click

from . import capacity, saddle
from .errors import HopcapError, WindowCollapsedError
from .functional import ModelParams, a_star, big_d, c_star, f0, f0_d, f1_d
from .hopfield import mc_fixed_probability, retrieval_error
from .specfun import gauss_tail

SCHEMA_VERSION = "1"
THREADS_ENV = "HOPCAP_THREADS"
SWEEP_COLUMNS = ("alpha", "delta", "q", "phi0", "u_phi0", "rate_exponent", "u_star", "branch",
                 "c_star", "delta_c_asym")
# options that steer execution but never change results, so they are not echoed
_NOT_ECHOED = {"config", "output", "fmt", "threads"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    output_path: str | None
    format: str


# ---------------------------------------------------------------- output

def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def to_plain(obj):
    """Convert results (dataclasses, enums, tuples, numpy scalars) to JSON-ready values."""
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if hasattr(obj, "_asdict"):
        return {k: to_plain(v) for k, v in obj._asdict().items()}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "item"):
        return to_plain(obj.item())
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return obj
    return str(obj)


def dump_json(obj, indent=0) -> str:
    """JSON with every float written at 17 significant digits; nan/inf become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dump_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dump_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dump_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj)


def _csv_cell(v):
    if isinstance(v, float):
        return "" if math.isnan(v) or math.isinf(v) else format(v, ".17g")
    if isinstance(v, bool):
        return "true" if v else "false"
    return "" if v is None else str(v)


def dump_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = ";".join(_csv_cell(x) for x in v)
        else:
            out[key] = v
    return out


def emit(cfg: RunConfig, result: dict, table=None):
    """Write one document: JSON with schema and input echo, or CSV rows."""
    if cfg.format == "csv":
        if table is None:
            flat = _flatten(to_plain(result))
            text = dump_csv(list(flat), [flat])
        else:
            text = dump_csv(*table)
    else:
        doc = {"schema_version": SCHEMA_VERSION, "command": cfg.command,
               "input": to_plain(cfg.params), "result": to_plain(result)}
        text = dump_json(doc) + "\n"
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# ---------------------------------------------------------------- config

def parse_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.BadParameter(f"{path}:{lineno}: expected key=value")
            k, v = (t.strip() for t in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def _config_callback(ctx, param, value):
    if value is None:
        return None
    entries = parse_config(value)
    names = {p.name for p in ctx.command.params} - _NOT_ECHOED
    unknown = sorted(set(entries) - names)
    if unknown:
        raise click.BadParameter(f"unknown key(s) {unknown}", ctx=ctx, param=param)
    ctx.default_map = {**(ctx.default_map or {}), **entries}
    return value


def common(f):
    f = click.option("--threads", type=click.IntRange(min=1), envvar=THREADS_ENV, default=1,
                     show_default=True, help=f"Worker cap (env {THREADS_ENV}); never changes results.")(f)
    f = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None,
                     help="Output format.")(f)
    f = click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None,
                     help="Write to this file instead of stdout.")(f)
    f = click.option("--config", type=click.Path(exists=True, dir_okay=False), is_eager=True,
                     expose_value=True, callback=_config_callback,
                     help="key=value file; explicit flags win.")(f)
    return f


def _cfg(name, kw, default_format="json"):
    params = {k: v for k, v in kw.items() if k not in _NOT_ECHOED}
    return RunConfig(name, params, kw.get("output"), kw.get("fmt") or default_format)


def _run(fn):
    """Map library errors to exit code 2 with a one-line message."""
    try:
        return fn()
    except (HopcapError, ValueError, ArithmeticError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


# ---------------------------------------------------------------- commands

@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact", prog_name="hopcap")
def cli():
    """Capacity functionals and Hopfield simulations."""


def _params(kw):
    return ModelParams(kw["alpha"], kw["delta"], kw.get("q", 0.0), kw.get("qprime", 0.0),
                       kw.get("delta1", 0.0))


@cli.command("eval")
@click.option("--alpha", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--q", type=float, default=0.0, show_default=True)
@click.option("--qprime", type=float, default=0.0, show_default=True)
@click.option("--delta1", type=float, default=0.0, show_default=True)
@click.option("--u", type=float, required=True)
@click.option("--v", type=float, required=True)
@common
def cmd_eval(**kw):
    """Evaluate the functionals at one (U, V)."""
    cfg = _cfg("eval", kw)

    def go():
        p = _params(kw)
        u, v = kw["u"], kw["v"]
        a1, a2 = a_star(p)
        return {"a1_star": a1, "a2_star": a2, "f0": f0(u, v, p), "big_d": big_d(u, v, p),
                "f0_d": f0_d(u, v, p), "f1_d": f1_d(u, v, p), "c_star": c_star(p.delta)}

    emit(cfg, _run(go))


@cli.command("saddle")
@click.option("--alpha", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--q", type=float, default=0.0, show_default=True)
@click.option("--qprime", type=float, default=0.0, show_default=True)
@click.option("--delta1", type=float, default=0.0, show_default=True)
@click.option("--plain", is_flag=True, help="Use F0 instead of the piecewise functional.")
@click.option("--u-max", type=float, default=10.0, show_default=True)
@common
def cmd_saddle(**kw):
    """Max over U of min over V, and the resulting rate exponent."""
    cfg = _cfg("saddle", kw)

    def go():
        p = _params(kw)
        res = saddle.maximize_u(p, plain=kw["plain"], u_max=kw["u_max"])
        return {"saddle": res, "rate_exponent": res.value + saddle.load_constant(p.alpha),
                "c_star": c_star(p.delta)}

    emit(cfg, _run(go))


_VERDICT_EXIT = {capacity.Verdict.HOLDS: 0, capacity.Verdict.FAILS: 1,
                 capacity.Verdict.INDETERMINATE: 2}


@cli.command("certify")
@click.option("--alpha", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--q-max", type=float, default=0.131, show_default=True)
@click.option("--q-step", type=float, default=1e-3, show_default=True)
@common
def cmd_certify(**kw):
    """Capacity certificate over a q-grid. Exit 0 Holds, 1 Fails, 2 Indeterminate."""
    cfg = _cfg("certify", kw)
    cert = _run(lambda: capacity.certify_theorem3(kw["alpha"], kw["delta"], kw["q_max"],
                                                  kw["q_step"], workers=kw["threads"]))
    emit(cfg, cert)
    sys.exit(_VERDICT_EXIT[cert.verdict])


@cli.command("critical")
@click.option("--seed-alpha", type=float, default=0.11, show_default=True)
@click.option("--seed-delta", type=float, default=0.008, show_default=True)
@common
def cmd_critical(**kw):
    """Critical pair (alpha_c, delta_c) by damped Newton."""
    cfg = _cfg("critical", kw)
    emit(cfg, _run(lambda: capacity.critical_pair(kw["seed_alpha"], kw["seed_delta"])))


@cli.command("window")
@click.option("--alpha", type=float, required=True)
@common
def cmd_window(**kw):
    """Sign changes (delta1, delta2, delta3) of Phi_0(0, alpha, .)."""
    cfg = _cfg("window", kw)
    def go():
        try:
            return {"collapsed": False, "window": capacity.delta_window(kw["alpha"])}
        except WindowCollapsedError as exc:
            return {"collapsed": True, "delta_at_min": exc.delta_at_min,
                    "phi0_at_min": exc.phi_at_min, "roots": list(exc.roots)}

    res = _run(go)
    emit(cfg, res)
    if res["collapsed"]:
        sys.exit(2)


@cli.command("theorem2")
@click.option("--alpha", type=float, required=True)
@click.option("--delta", type=float, required=True)
@common
def cmd_theorem2(**kw):
    """Small-load closed form next to the saddle rate exponent."""
    cfg = _cfg("theorem2", kw)

    def go():
        a, d = kw["alpha"], kw["delta"]
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", capacity.HypothesisWarning)
            t2 = capacity.theorem2_exponent(a, d)
            ps = capacity.pstar_exponent(a, d)
        return {"theorem2_exponent": t2, "pstar_exponent": ps,
                "delta_c_asym": capacity.delta_c_asym(a),
                "hypothesis_ok": capacity.theorem2_hypothesis_ok(a, d),
                "rate_exponent": saddle.rate_exponent(ModelParams(a, d))}

    emit(cfg, _run(go))


@cli.command("simulate")
@click.argument("kind", type=click.Choice(["fixed", "retrieval"]))
@click.option("--n", type=click.IntRange(min=2), required=True)
@click.option("--alpha", type=float, required=True)
@click.option("--delta", type=float, default=0.0, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), required=True)
@click.option("--max-sweeps", type=click.IntRange(min=1), default=100, show_default=True)
@common
def cmd_simulate(kind, **kw):
    """Monte Carlo fixed-point probability or retrieval error."""
    cfg = _cfg("simulate", {"kind": kind, **kw})
    n, a, d = kw["n"], kw["alpha"], kw["delta"]

    def go():
        if not a > 0:
            raise ValueError("alpha must be positive")
        if kind == "fixed":
            est = mc_fixed_probability(n, a, d, kw["trials"], kw["seed"], workers=kw["threads"])
            rate = saddle.rate_exponent(ModelParams(a, d))
            # zero counts are floored at one success so the comparison stays finite
            emp = math.log(max(est.p_hat, 1.0 / est.trials)) / n
            return {"estimate": est, "alpha_nominal": a, "alpha_empirical": est.alpha_emp,
                    "marginal": est.marginal, "rate_exponent": rate,
                    "bound_comparison": {"log_rate_empirical": emp, "slack": 0.05,
                                         "bound": rate + 0.05, "holds": bool(emp <= rate + 0.05)}}
        st = retrieval_error(n, a, kw["trials"], kw["seed"], max_sweeps=kw["max_sweeps"],
                             workers=kw["threads"])
        p = st.p
        return {"stats": st, "alpha_nominal": a, "alpha_empirical": st.alpha_emp,
                "delta_c_asym": capacity.delta_c_asym(a),
                "one_step_theory": gauss_tail(math.sqrt(n / p))}

    emit(cfg, _run(go))


def parse_grid(spec: str) -> list:
    """'start:stop:step' (inclusive), a comma list, or a single value; '' is empty."""
    spec = spec.strip()
    if not spec:
        return []
    try:
        if ":" in spec:
            start, stop, step = (float(t) for t in spec.split(":"))
            if not step > 0:
                raise ValueError
            if stop < start:
                return []
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 12) for k in range(count)]
        return [float(t) for t in spec.split(",") if t.strip()]
    except ValueError:
        raise click.BadParameter(f"malformed grid spec {spec!r}") from None


def _sweep_row(args):
    a, d, q = args
    p0, u0 = saddle.phi0(q, a, d)
    res = saddle.maximize_u(ModelParams.symmetric(a, d, q))
    return {"alpha": a, "delta": d, "q": q, "phi0": p0, "u_phi0": u0,
            "rate_exponent": res.value + saddle.load_constant(a), "u_star": res.u_star,
            "branch": res.branch.value, "c_star": c_star(d), "delta_c_asym": capacity.delta_c_asym(a)}


@cli.command("sweep")
@click.option("--alpha", "alpha_grid", type=str, required=True, help="start:stop:step or list")
@click.option("--delta", "delta_grid", type=str, required=True)
@click.option("--q", "q_grid", type=str, default="0", show_default=True)
@common
def cmd_sweep(**kw):
    """Phi_0, rate exponent and asymptote over a product grid (q' = -q)."""
    cfg = _cfg("sweep", kw, default_format="csv")
    axes = [parse_grid(kw[k]) for k in ("alpha_grid", "delta_grid", "q_grid")]
    pts = list(itertools.product(*axes))
    uniq = list(dict.fromkeys(pts))
    if len(uniq) < len(pts):
        click.echo(f"warning: dropped {len(pts) - len(uniq)} duplicate grid point(s)", err=True)
    rows = _run(lambda: capacity._map(_sweep_row, uniq, kw["threads"]))
    emit(cfg, {"columns": list(SWEEP_COLUMNS), "rows": rows}, table=(SWEEP_COLUMNS, rows))


@cli.command("regions")
@click.option("--dense", is_flag=True, help="Also sample alpha densely (step 5e-4).")
@common
def cmd_regions(**kw):
    """Endpoint checks for the three certification intervals. Exit 1 if any fails."""
    cfg = _cfg("regions", kw)
    rep = _run(lambda: capacity.verify_paper_regions(dense=kw["dense"], workers=kw["threads"]))
    ok = all(r.passed for r in rep)
    emit(cfg, {"all_passed": ok, "regions": rep})
    sys.exit(0 if ok else 1)


def main(argv=None):
    cli.main(args=argv, prog_name="hopcap")


if __name__ == "__main__":
    main()
