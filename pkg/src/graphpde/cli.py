"""Command line interface: ``graphpde <subcommand> [options]``.

Exit codes: 0 success, 2 failed hypothesis or certificate, 1 error.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import comparison as cmp
from . import dynamics as dy
from . import spectral, suites
from .graph import GraphError, example_graph, read_graph, validate
from .io import atomic_write, dumps, fmt
from .linear import LinearParabolicProblem, TimeSeries, solve_parabolic
from .monotone import Bracket, Reaction, cauchy_elliptic_monotone, elliptic_monotone


DEMO_U0 = (8.0, 1.0, 0.5)
DEMO_T, DEMO_DT, DEMO_STRIDE = 200.0, 1e-2, 10


class ConfigError(Exception):
    """Malformed input; exit code 1."""


class PreconditionError(Exception):
    """Unsatisfied hypothesis or failed certificate; exit code 2."""


# --- config ---------------------------------------------------------------------

def load_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return cp


def scenario_sections(cp) -> list[str]:
    names = [s for s in cp.sections() if s == "scenario" or s.startswith("scenario ")]
    if not names:
        raise ConfigError("config has no [scenario] section")
    return names


def _float(sec, key, default=None):
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"[{sec.name}] missing key {key!r}")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r} is not a number") from None


def _values(sec, key, names, default=0.0):
    """A constant, a comma list in ``names`` order, or ``id: value`` pairs."""
    raw = sec.get(key)
    if raw is None:
        return np.full(len(names), float(default))
    items = [x.strip() for x in raw.replace(";", ",").split(",") if x.strip()]
    try:
        if items and all(":" in x for x in items):
            out = np.zeros(len(names))
            for item in items:
                vid, val = (s.strip() for s in item.split(":", 1))
                if vid not in names:
                    raise ConfigError(f"[{sec.name}] {key}: unknown vertex {vid!r}")
                out[names.index(vid)] = float(val)
            return out
        vals = [float(x) for x in items]
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r} is not numeric") from None
    if len(vals) == 1:
        return np.full(len(names), vals[0])
    if len(vals) != len(names):
        raise ConfigError(f"[{sec.name}] {key}: expected {len(names)} values, got {len(vals)}")
    return np.array(vals)


def reaction_from(sec) -> Reaction | None:
    kind = sec.get("reaction", "none").strip().lower()
    try:
        if kind in ("none", "zero"):
            return None
        if kind == "logistic":
            return Reaction.logistic(_float(sec, "a"), _float(sec, "b", 1.0))
        if kind == "kpp":
            coef = sec.get("coefficients")
            return Reaction.kpp(coefficients=None if coef is None else [float(c) for c in coef.split(",")])
        if kind in ("allen_cahn", "allen-cahn"):
            return Reaction.allen_cahn(_float(sec, "alpha"))
        if kind == "polynomial":
            return Reaction.polynomial([float(c) for c in sec.get("coefficients", "0").split(",")])
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {exc}") from None
    raise ConfigError(f"[{sec.name}] unknown reaction {kind!r}")


def load_geometry(args, cp=None):
    path = args.graph
    if path is None and cp is not None and cp.has_option("graph", "path"):
        path = cp.get("graph", "path")
        if args.config and not Path(path).is_absolute():
            path = str(Path(args.config).parent / path)
    if path is None:
        raise ConfigError("no graph given (use --graph or [graph] path)")
    try:
        g, p = read_graph(path)
    except OSError as exc:
        raise ConfigError(f"cannot read graph {path}: {exc.strerror}") from None
    except GraphError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    rep = validate(g, p)
    if not rep.ok:
        raise PreconditionError("graph validation failed: " + "; ".join(rep.violations))
    return g, p


# --- reports ---------------------------------------------------------------------

def report(command, args, **blocks) -> dict:
    meta = {"command": command, "version": __version__, "seed": args.seed, "tol": args.tol,
            "graph": args.graph, "config": args.config}
    meta.update(blocks.pop("meta", {}))
    return {"meta": meta, "spectrum": blocks.get("spectrum", {}), "verdicts": blocks.get("verdicts", {}),
            "classification": blocks.get("classification", {}), **blocks.get("extra", {})}


def spectrum_block(g, p) -> dict:
    out = {}
    systems = [spectral.full_eigensystem(g)]
    if p is not None:
        systems += [spectral.dirichlet_eigensystem(p), spectral.neumann_eigensystem(p)]
    for es in systems:
        names = [g.vertices[i] for i in es.support]
        funcs = [dict(zip(names, col)) for col in es.eigenfunctions.T]
        entry = {"eigenvalues": es.eigenvalues, "eigenfunctions": funcs}
        if es.extension is not None:
            bnames = [g.vertices[i] for i in p.outer]
            entry["boundary_extension"] = [dict(zip(bnames, col)) for col in es.extended().T]
        out[es.kind] = entry
    return out


def plot_blocks(series_by_label: dict[str, TimeSeries]) -> str:
    """Gnuplot data: one ``t value`` block per vertex, blank-line separated; two blank lines between runs."""
    chunks = []
    for label, s in series_by_label.items():
        blocks = []
        for j, v in enumerate(s.vertices):
            lines = [f"# {label} vertex {v}"]
            lines += [f"{fmt(t)} {fmt(x)}" for t, x in zip(s.times, s.states[:, j])]
            blocks.append("\n".join(lines))
        chunks.append("\n\n".join(blocks))
    return "\n\n\n".join(chunks) + "\n"


def write_out(args, name, text):
    path = Path(args.out) / name
    atomic_write(path, text)
    return str(path)


def emit(args, rep, name):
    text = dumps(rep)
    write_out(args, name, text)
    if not args.quiet:
        sys.stdout.write(text)


# --- subcommands -------------------------------------------------------------------

def cmd_validate(args):
    try:
        g, p = read_graph(args.graph) if args.graph else example_graph()
    except OSError as exc:
        raise ConfigError(f"cannot read graph {args.graph}: {exc.strerror}") from None
    except GraphError as exc:
        raise ConfigError(f"{args.graph}: {exc}") from None
    rep = validate(g, p)
    out = report("validate", args, verdicts={"validation": rep.as_dict()})
    emit(args, out, "validate.json")
    return 0 if rep.ok else 2


def cmd_eig(args):
    g, p = load_geometry(args) if args.graph else example_graph()
    out = report("eig", args, spectrum=spectrum_block(g, p))
    emit(args, out, "eig.json")
    return 0


def _scenario_common(sec, g, p):
    kind = sec.get("boundary_kind", "dirichlet" if p is not None else "cauchy").strip().lower()
    if kind not in ("dirichlet", "neumann", "cauchy"):
        raise ConfigError(f"[{sec.name}] unknown boundary_kind {kind!r}")
    if kind != "cauchy" and p is None:
        raise ConfigError(f"[{sec.name}] {kind} problems need interior/boundary roles in the graph file")
    names = list(g.vertices)
    u0 = _values(sec, "u0", names)
    bdata = None if kind == "cauchy" else _values(sec, "boundary", [g.vertices[i] for i in p.outer])
    T = _float(sec, "T", 1.0)
    dt = _float(sec, "dt", 1e-3)
    stride = int(_float(sec, "stride", 10))
    if T <= 0 or dt <= 0 or stride < 1:
        raise ConfigError(f"[{sec.name}] need T > 0, dt > 0, stride >= 1")
    return kind, u0, bdata, T, dt, stride


def run_solve(sec, g, p, tol):
    """One scenario: spectral solve for linear problems, IMEX for semilinear ones."""
    kind, u0, bdata, T, dt, stride = _scenario_common(sec, g, p)
    f = reaction_from(sec)
    part = None if kind == "cauchy" else p
    dom = np.arange(g.n) if part is None else part.inner
    if f is None:
        shift = _float(sec, "shift", 0.0)
        forcing = _values(sec, "forcing", [g.vertices[i] for i in dom])
        times = np.linspace(0.0, T, int(round(T / (dt * stride))) + 1)
        prob = LinearParabolicProblem(g, kind, u0, part, shift, forcing, bdata)
        series = solve_parabolic(prob, times)
        k, source = -shift, (lambda t, v: forcing)
    else:
        series = dy.integrate(dy.Scenario(g, kind, f, u0, T, dt, stride, part, bdata))
        k, source = 0.0, (lambda t, v: f(v))
    bc = {} if part is None else (dict(alpha=1.0, beta=0.0) if kind == "dirichlet" else dict(alpha=0.0, beta=1.0))
    cert = cmp.certify_parabolic(series, g, part, k=k, source=source, boundary_data=bdata,
                                 initial_data=u0[dom], tol=tol, **bc)
    verdicts = {"residual": cert.as_dict()}
    if np.all(u0 >= 0) and (bdata is None or np.all(bdata >= 0)) and (f is not None or np.all(forcing >= 0)):
        verdicts["positivity"] = cmp.check_positivity(series, None, cmp.NONNEG, tol=1e-10).as_dict()
    ok = cert.verdict == cmp.BOTH and verdicts.get("positivity", {"ok": True})["ok"]
    return series, verdicts, ok


def cmd_solve(args):
    cp = load_config(args.config)
    g, p = load_geometry(args, cp)
    all_ok, verdicts = True, {}
    for name in scenario_sections(cp):
        sec = cp[name]
        series, v, ok = run_solve(sec, g, p, args.tol)
        all_ok &= ok
        label = name.replace(" ", "_")
        csv_name = sec.get("csv", f"{label}.csv")
        write_out(args, csv_name, series.to_csv())
        if sec.get("plot"):
            write_out(args, sec.get("plot"), plot_blocks({label: series}))
        verdicts[label] = {**v, "csv": csv_name, "passed": ok}
    emit(args, report("solve", args, verdicts=verdicts), "solve.json")
    return 0 if all_ok else 2


def _bracket_from(sec, g, default_lo, default_hi):
    names = list(g.vertices)
    return Bracket(_values(sec, "lower", names, default_lo), _values(sec, "upper", names, default_hi))


def cmd_steady(args):
    cp = load_config(args.config)
    g, p = load_geometry(args, cp)
    tol = args.tol if args.tol is not None else 1e-10
    out, all_ok = {}, True
    for name in scenario_sections(cp):
        sec = cp[name]
        kind = sec.get("boundary_kind", "dirichlet" if p is not None else "cauchy").strip().lower()
        f = reaction_from(sec) or Reaction.zero()
        cap = f.params["a"] / f.params["b"] if f.kind == "logistic" else 1.0
        max_iters = int(_float(sec, "max_iters", 10000))
        if kind == "cauchy":
            drift = _values(sec, "drift", list(g.vertices)) if sec.get("drift") else None
            c = _values(sec, "c", list(g.vertices))
            res = cauchy_elliptic_monotone(g, f, _bracket_from(sec, g, 0.0, cap), drift, c, tol, max_iters)
        elif kind in ("dirichlet", "neumann"):
            if p is None:
                raise ConfigError(f"[{name}] {kind} problems need a partition")
            data = _values(sec, "boundary", [g.vertices[i] for i in p.outer])
            bracket = None
            if kind == "neumann" or sec.get("lower") or sec.get("upper"):
                bracket = _bracket_from(sec, g, 0.0, cap)
            res = elliptic_monotone(p, kind, f, data, bracket, tol, max_iters)
        else:
            raise ConfigError(f"[{name}] unknown boundary_kind {kind!r}")
        label = name.replace(" ", "_")
        chains = res.chains_hold()
        all_ok &= chains and res.residual <= 10 * tol
        out[label] = {"minimal": dict(zip(g.vertices, res.minimal)), "maximal": dict(zip(g.vertices, res.maximal)),
                      "iterations": res.iterations, "gap": res.gap, "unique": res.unique,
                      "residual": res.residual, "shift": res.shift, "chains_hold": chains,
                      "chains": res.chain_defects(), **{k: v for k, v in res.info.items() if k != "kind"}}
        if sec.get("iterates"):
            rows = ["sequence,m," + ",".join(g.vertices)]
            for tag, seq in (("lower", res.lower_iterates), ("upper", res.upper_iterates)):
                rows += [f"{tag},{m}," + ",".join(fmt(x) for x in it) for m, it in enumerate(seq)]
            write_out(args, sec.get("iterates"), "\n".join(rows) + "\n")
    emit(args, report("steady", args, verdicts=out), "steady.json")
    return 0 if all_ok else 2


def classify_section(sec, g, p):
    kind = sec.get("boundary_kind", "dirichlet" if p is not None else "cauchy").strip().lower()
    f = reaction_from(sec)
    if f is None:
        raise ConfigError(f"[{sec.name}] classify needs a reaction")
    names = list(g.vertices)
    T = _float(sec, "T", 200.0 if f.kind == "logistic" else 100.0)
    dt = _float(sec, "dt", 1e-2 if kind == "dirichlet" else 1e-3)
    stride = int(_float(sec, "stride", 10))
    u0 = _values(sec, "u0", names)
    if f.kind == "logistic" and kind == "dirichlet":
        return dy.classify_logistic_dirichlet(p, f.params["a"], f.params["b"], u0[p.inner], T, dt, stride)
    if f.kind == "logistic" and kind == "neumann":
        return dy.classify_logistic_neumann(p, f.params["a"], f.params["b"], u0, T, dt, stride)
    if f.kind == "kpp" and kind == "cauchy":
        return dy.classify_kpp_cauchy(g, f, u0, T, dt, stride)
    if f.kind == "allen_cahn" and kind == "cauchy":
        return dy.classify_allen_cahn(g, f, u0, T, dt, stride)
    raise ConfigError(f"[{sec.name}] no classifier for reaction {f.kind!r} with {kind} boundary")


def _classification_entry(c: dy.Classification) -> tuple[dict, bool]:
    d = c.as_dict()
    hyp = c.hypotheses_ok and c.outcome != dy.UNDECIDED and (c.expected is None or c.outcome == c.expected)
    return d, hyp


def workers() -> int:
    raw = os.environ.get("GRAPHPDE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"GRAPHPDE_THREADS={raw!r} is not an integer") from None


def cmd_classify(args):
    cp = load_config(args.config)
    g, p = load_geometry(args, cp)
    names = scenario_sections(cp)
    with ThreadPoolExecutor(max_workers=workers()) as pool:
        results = list(pool.map(lambda n: classify_section(cp[n], g, p), names))
    out, all_ok = {}, True
    for name, c in zip(names, results):
        entry, ok = _classification_entry(c)
        all_ok &= ok
        out[name.replace(" ", "_")] = entry
    spectrum = {}
    if p is not None:
        spectrum["lambda1"] = float(spectral.dirichlet_eigensystem(p).eigenvalues[0])
    emit(args, report("classify", args, spectrum=spectrum, classification=out), "classify.json")
    return 0 if all_ok else 2


def demo_runs():
    g, p = example_graph()
    out = {}
    for label, a in (("extinction", 0.1), ("establishment", 1.8)):
        out[label] = (a, dy.classify_logistic_dirichlet(p, a, 1.0, np.array(DEMO_U0), DEMO_T, DEMO_DT, DEMO_STRIDE))
    return g, p, out


def cmd_demo(args):
    g, p, runs = demo_runs()
    es = spectral.dirichlet_eigensystem(p)
    classification, verdicts, plots, all_ok = {}, {}, {}, True
    for label, (a, c) in runs.items():
        entry, ok = _classification_entry(c)
        entry["a"] = a
        classification[label] = entry
        f = Reaction.logistic(a, 1.0)
        cert = cmp.certify_parabolic(c.series, g, p, source=lambda t, v, f=f: f(v),
                                     initial_data=np.array(DEMO_U0), boundary_data=0.0, tol=args.tol)
        pos = cmp.check_positivity(c.series, p.inner, cmp.STRICT)
        verdicts[label] = {"residual": cert.as_dict(), "strict_positivity": pos.as_dict()}
        all_ok &= ok and cert.verdict == cmp.BOTH and pos.ok
        write_out(args, f"demo_{label}.csv", c.series.to_csv())
        plots[f"a={a}"] = c.series
    write_out(args, "demo.dat", plot_blocks(plots))
    spectrum = {"dirichlet": {"eigenvalues": es.eigenvalues}, "lambda1": float(es.eigenvalues[0]),
                "lambda1_exact": (5 - np.sqrt(13)) / 6}
    emit(args, report("demo", args, spectrum=spectrum, verdicts=verdicts, classification=classification,
                      meta={"u0": DEMO_U0, "T": DEMO_T, "dt": DEMO_DT}), "demo.json")
    return 0 if all_ok else 2


def cmd_props(args):
    res = suites.run_all(args.seed, quick=args.quick)
    ok = all(v["passed"] for v in res.values())
    emit(args, report("props", args, verdicts=res), "props.json")
    return 0 if ok else 2


COMMANDS = {"validate": cmd_validate, "eig": cmd_eig, "solve": cmd_solve, "steady": cmd_steady,
            "classify": cmd_classify, "demo": cmd_demo, "props": cmd_props}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", help="graph file ([vertices] / [edges] sections)")
    common.add_argument("--config", help="run configuration (INI style)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--tol", type=float, default=None, help="tolerance override")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    common.add_argument("--quiet", action="store_true", help="do not echo the JSON report")
    parser = argparse.ArgumentParser(prog="graphpde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "props":
            sp.add_argument("--quick", action="store_true", help="run reduced trial counts")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    needs_config = args.command in ("solve", "steady", "classify")
    try:
        if needs_config and not args.config:
            raise ConfigError(f"{args.command} needs --config")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
