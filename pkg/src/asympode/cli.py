"""Command-line front end.

    asympode analyze poincare --config ex2.toml --out run/
    asympode solve nonlinear3 --config zero.toml
    asympode transform unbounded --q "t^2" --r "1"
    asympode reproduce-example 2
    asympode report --out run/

Exit status is 0 iff every enabled check passes, 1 if some check fails and 2
on an error (a JSON error record goes to stderr and ``<out>/error.json``).
"""

from dataclasses import dataclass, field
import csv
import json
import math
import os
import sys
import traceback

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .expr import as_expr, parse_expr, ExprError
from .kernels import asymptotic_constants, cubic_roots, make_roots
from .rhs import CoefficientTable, hypothesis_report
from .solver import envelope, ode_residual, solve_fixed_point
from .oracle import integrate_nonlinear3
from .poincare import (PoincareProblem, asymptotic_report, fundamental_system,
                       levinson_data, root_cases)
from .unbounded import (UnboundedProblem, consistency_residual, derived_coefficients,
                        l1_hypothesis_check, s_of_t, transform_coefficients,
                        unbounded_fundamental_system)
from .examples import reproduce_example

MODES = {"nonlinear3": "nonlinear3", "nonlinear": "nonlinear3",
         "poincare4": "poincare4", "poincare": "poincare4",
         "unbounded4": "unbounded4", "unbounded": "unbounded4"}


class ConfigError(ValueError):
    pass


@dataclass
class ProblemConfig:
    mode: str
    t0: float = 0.0
    constants: dict = field(default_factory=dict)
    expressions: dict = field(default_factory=dict)
    table: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    out: str = "asympode-out"

    def validate(self):
        if self.mode not in ("nonlinear3", "poincare4", "unbounded4"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        c = self.constants
        if self.mode == "nonlinear3":
            if "b" not in c and "roots" not in c:
                raise ConfigError("nonlinear3 needs constants.b or constants.roots")
            CoefficientTable(self.table, self.params)
        elif self.mode == "poincare4":
            if len(c.get("a", ())) != 4:
                raise ConfigError("poincare4 needs constants.a = [a0, a1, a2, a3]")
        else:
            if "q" not in self.expressions:
                raise ConfigError("unbounded4 needs expressions.q")
        for k, v in self.expressions.items():
            try:
                parse_expr(str(v), self.params)
            except ExprError as exc:
                raise ConfigError(f"expression {k}: {exc}") from exc
        return self

    def opt(self, name, default=None):
        v = self.solver.get(name)
        return default if v is None else v


def load_config(path=None, mode=None, overrides=None):
    data = {}
    if path:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    m = mode or data.get("mode")
    if m is None:
        raise ConfigError("no mode given")
    if m not in MODES:
        raise ConfigError(f"unknown mode {m!r}")
    cfg = ProblemConfig(
        mode=MODES[m],
        t0=float(data.get("t0", data.get("problem", {}).get("t0", 0.0))),
        constants=dict(data.get("constants", {})),
        expressions={k: str(v) for k, v in data.get("expressions", {}).items()},
        table=dict(data.get("table", {})),
        params=dict(data.get("params", {})),
        solver=dict(data.get("solver", {})),
        out=data.get("output", {}).get("dir", "asympode-out"),
    )
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "out":
            cfg.out = v
        elif k == "t0":
            cfg.t0 = float(v)
        elif k in ("q", "r"):
            cfg.expressions[k] = v
        else:
            cfg.solver[k] = v
    return cfg.validate()


# -- output helpers ----------------------------------------------------------

class Run:
    """Collects checks and writes artifacts into one output directory."""

    def __init__(self, out):
        self.out = out
        os.makedirs(out, exist_ok=True)
        stale = os.path.join(out, "error.json")
        if os.path.exists(stale):
            os.remove(stale)
        self.checks = []
        self.lines = []

    def check(self, name, passed, value=""):
        self.checks.append((name, "pass" if passed else "fail", str(value)))

    def info(self, text):
        self.lines.append(text)

    def write_csv(self, name, header, rows):
        with open(os.path.join(self.out, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(x) for x in r])

    def finish(self):
        self.write_csv("summary.csv", ["check", "status", "value"], self.checks)
        text = self.lines + [""] + [f"{s.upper():4}  {n}  {v}" for n, s, v in self.checks]
        with open(os.path.join(self.out, "report.txt"), "w") as fh:
            fh.write("\n".join(text) + "\n")
        click.echo("\n".join(text))
        return 0 if all(s == "pass" for _, s, _ in self.checks) else 1


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


# -- pipelines ---------------------------------------------------------------

def _nonlinear_inputs(cfg):
    c = cfg.constants
    if "roots" in c:
        roots = make_roots(*sorted((float(x) for x in c["roots"]), reverse=True))
    else:
        roots = cubic_roots(*(float(x) for x in c["b"]))
    table = CoefficientTable(cfg.table, cfg.params)
    return roots, table


def _solve3(cfg, roots, table):
    tol = float(cfg.opt("tol", 1e-10))
    z, diag = solve_fixed_point(table, roots, cfg.t0, t_max=cfg.opt("tmax"), tol=tol,
                                max_iter=int(cfg.opt("max_iter", 200)),
                                nodes=int(cfg.opt("nodes", 40)), eta=float(cfg.opt("eta", 0.5)),
                                raise_on_failure=False)
    return z, diag, tol


def run_nonlinear3(cfg, run, analyze=True):
    roots, table = _nonlinear_inputs(cfg)
    beta = cfg.opt("beta", roots.default_beta())
    consts = asymptotic_constants(roots, beta)
    run.info(f"roots {roots.g1:.12g}, {roots.g2:.12g}, {roots.g3:.12g}  case {roots.case}")
    run.info(f"A = {consts.A:.10g}  A_hat = {consts.A_hat:.10g}  beta = {beta:.6g}  "
             f"sigma = {consts.sigma:.10g}  rho_max = {consts.rho_max:.10g}")
    z, diag, tol = _solve3(cfg, roots, table)
    run.write_csv("solution.csv", ["t", "z", "dz", "d2z"], zip(z.t, z.z, z.dz, z.d2z))
    run.info(f"iterations {diag.iterations}, max ratio {diag.max_ratio:.4g}, "
             f"self-residual {diag.residual:.3g}, invariance {diag.invariance}")
    for w in diag.warnings:
        run.info(f"warning: {w}")
    converged = bool(diag.diffs) and diag.diffs[-1] < tol
    run.check("fixed point converged", converged, f"{diag.iterations} iterations")
    run.check("contraction ratios < 1", diag.max_ratio < 1.0, f"{diag.max_ratio:.6g}")
    run.check("self-residual < 10 tol", diag.residual < 10 * tol, f"{diag.residual:.3g}")
    res = ode_residual(z, table, roots, window=(cfg.t0, diag.report_end))
    run.check("ODE residual < 1e-4", res < 1e-4, f"{res:.3g}")
    if not analyze:
        return
    hyp = hypothesis_report(table, roots, beta, cfg.t0, n=int(cfg.opt("report_points", 15)))
    run.info("hypotheses:")
    run.lines.extend("  " + s for s in hyp.lines())
    run.write_csv("hypothesis.csv", ["check", "status", "slope", "detail"],
                  [(c.name, c.status, c.slope, c.detail) for c in hyp.checks])
    for c in hyp.checks:
        run.check(f"hypothesis: {c.name}", c.status == "pass", c.status)
    # oracle restart from a mid-window state
    t1 = cfg.t0 + 0.25 * (diag.report_end - cfg.t0)
    span = min(5.0, diag.report_end - t1)
    if converged and span > 0:
        st = np.array(z(t1)).ravel()
        tr = integrate_nonlinear3(roots.b, table, st, (t1, t1 + span))
        tq = np.linspace(t1, t1 + span, 41)
        dev = float(np.max(np.abs(np.stack(z(tq), 1) - tr(tq))))
        run.check("oracle restart agreement < 1e-5", dev < 1e-5, f"{dev:.3g}")
    _, _, rep0 = envelope(table, roots, beta, 0.0, 1, z)
    rho = rep0.rho_effective
    if rho < consts.rho_max:
        phis, phi_lim, rep = envelope(table, roots, beta, rho, 20, z)
        run.write_csv("envelope.csv", ["t", "z_abs_sum", "bound"],
                      zip(z.t, z.pointwise(), phi_lim * rep.E))
        run.info(f"envelope: rho {rho:.4g}, Phi_limit {phi_lim:.10g}, max ratio {rep.max_ratio:.4g}"
                 + (" (lower-bound weight, window truncated)" if rep.truncated else ""))
        run.check("envelope domination", rep.holds, f"{rep.violations} violations")
    else:
        run.check("envelope rho within rho_max", False, f"rho {rho:.4g} >= {consts.rho_max:.4g}")


def _poincare_problem(cfg):
    c, e = cfg.constants, cfg.expressions
    r = tuple(e.get(f"r{j}", "0") for j in range(4))
    tags = {k: v for k, v in cfg.constants.items() if k.startswith("tag_")}
    tags = {k[4:]: v for k, v in tags.items()}
    return PoincareProblem(tuple(float(x) for x in c["a"]), r, t0=cfg.t0, tags=tags,
                           params=cfg.params)


def run_poincare4(cfg, run, analyze=True):
    prob = _poincare_problem(cfg)
    lams = prob.lams
    run.info("roots " + ", ".join(f"{x:.12g}" for x in lams) + "  cases " + " ".join(root_cases(lams)))
    run.check("characteristic roots real and simple", True, ", ".join(f"{x:.6g}" for x in lams))
    tol = float(cfg.opt("tol", 1e-10))
    sols = fundamental_system(prob, t_max=cfg.opt("tmax"), tol=tol,
                              nodes=int(cfg.opt("nodes", 40)), eta=float(cfg.opt("eta", 0.5)),
                              max_iter=int(cfg.opt("max_iter", 300)), raise_on_failure=False,
                              workers=int(cfg.opt("workers", 4)))
    for s in sols:
        d = s.diagnostics
        R = s.ratios()
        run.write_csv(f"root{s.i}.csv",
                      ["t", "z", "dz", "d2z", "log_y", "ratio1", "ratio2", "ratio3", "ratio4"],
                      zip(s.t, s.z.z, s.z.dz, s.z.d2z, s.log_y(), R[1], R[2], R[3], R[4]))
        ok = bool(d.diffs) and d.diffs[-1] < tol
        run.check(f"root {s.i}: fixed point converged", ok, f"{d.iterations} iterations")
        run.check(f"root {s.i}: contraction ratios < 1", d.max_ratio < 1.0, f"{d.max_ratio:.6g}")
    if not analyze:
        return
    data = levinson_data(lams, prob.a, float(cfg.opt("levinson_eta", 0.25)))
    run.write_csv("levinson.csv", ["i", "lambda", "pi", "upsilon", "sigma_const", "sigma_eta",
                                   "A_set_sum", "A_reduced", "F1_at_window_end"],
                  [(r.i, r.lam, r.pi, r.upsilon, *r.sigma_parts, r.A, r.A_reduced,
                    r.F_one(sols[0].t[-1], cfg.t0)) for r in data.roots])
    rep = asymptotic_report(prob, sols, window_end=cfg.opt("window_end"))
    run.write_csv("ratios.csv", ["i", "k", "end_deviation", "monotone_last_decade"],
                  [(c.i, c.k, c.end_value, int(c.monotone_last_decade)) for c in rep.curves])
    run.write_csv("wronskian.csv", ["t", "ratio"], zip(rep.wronskian_t, rep.wronskian_ratio))
    run.write_csv("envelopes.csv", list(rep.envelopes[0].keys()),
                  [list(e.values()) for e in rep.envelopes])
    for c in rep.curves:
        if c.k <= 2:
            run.check(f"root {c.i}: |y^({c.k})/y - lambda^{c.k}| monotone, end < 1e-2",
                      c.monotone_last_decade and c.end_value < 1e-2, f"{c.end_value:.3g}")
    w = rep.wronskian_end
    run.check("Wronskian ratio within 5e-2 of 1", abs(w - 1) <= 5e-2, f"{w:.6g}")
    for L in rep.levinson:
        run.info(f"root {L['i']}: int z = {L['int_z_end']:.6g}, drift vs -1/pi form "
                 f"{L['drift_minus_inv_pi']:.3g}, vs printed sign {L['drift_plus_inv_pi']:.3g}")


def _unbounded_problem(cfg):
    e = cfg.expressions
    return UnboundedProblem(e["q"], e.get("r", "1"), t0=cfg.t0 or 1.0, params=cfg.params)


def run_unbounded4(cfg, run, analyze=True):
    prob = _unbounded_problem(cfg)
    bat = l1_hypothesis_check(prob, cfg.opt("tmax"))
    run.write_csv("battery.csv", ["quantity", "l1_window", "l1_first_tenth", "growth", "status"],
                  [(i.name, i.l1_window, i.l1_decade, i.rel_growth, i.status) for i in bat.items])
    for i in bat.items:
        run.check(f"L1 battery: {i.name}", i.status == "pass", f"{i.l1_window:.6g}")
    run.check("q increasing", bat.q_increasing)
    run.check("q unbounded on window", bat.q_unbounded)
    ts = np.geomspace(prob.t0 + 1.0, min(bat.t_end, prob.t0 + 100.0), 12)
    cp = consistency_residual(prob, ts)
    cd = consistency_residual(prob, ts, coeffs=lambda t: derived_coefficients(prob, t))
    run.info(f"transformed-operator consistency: displayed r0..r3 {cp:.3g}, derived {cd:.3g}")
    run.check("derived transform consistent", cd < 1e-8, f"{cd:.3g}")
    if bat.ok:
        hs = unbounded_fundamental_system(prob, check=False)
        tt = np.geomspace(prob.t0 + 1.0, min(bat.t_end, prob.t0 + 50.0), 50)
        rows = []
        for h in hs:
            r1, r2, r3 = h.ratios(tt)
            rows.extend((h.i, x, a, b, c) for x, a, b, c in zip(tt, r1, r2, r3))
        run.write_csv("handles.csv", ["i", "t", "dy_over_y", "d2y_over_y", "d3y_over_y"], rows)


PIPELINES = {"nonlinear3": run_nonlinear3, "poincare4": run_poincare4, "unbounded4": run_unbounded4}


def _fail(exc, out, command):
    rec = {"error": type(exc).__name__, "message": str(exc), "command": command}
    diag = getattr(exc, "diagnostics", None)
    if diag is not None:
        rec["iterations"] = diag.iterations
        rec["max_ratio"] = diag.max_ratio
    if os.environ.get("ASYMPODE_TRACEBACK"):
        rec["traceback"] = traceback.format_exc()
    text = json.dumps(rec)
    click.echo(text, err=True)
    if out:
        try:
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "error.json"), "w") as fh:
                fh.write(text + "\n")
        except OSError:
            pass
    return 2


def _execute(command, mode, config, overrides, analyze):
    out = overrides.get("out")
    try:
        cfg = load_config(config, mode, overrides)
        out = cfg.out
        run = Run(cfg.out)
        PIPELINES[cfg.mode](cfg, run, analyze=analyze)
        code = run.finish()
    except Exception as exc:  # any module failure becomes an error record
        code = _fail(exc, out, command)
    sys.exit(code)


def solver_options(f):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="TOML problem file."),
        click.option("--beta", type=float, help="Envelope exponent."),
        click.option("--eta", type=float, help="Ball radius for the fixed point."),
        click.option("--tol", type=float, help="Fixed-point tolerance."),
        click.option("--tmax", type=float, help="Window end T_max."),
        click.option("--nodes", type=int, help="Grid nodes per unit of the fastest rate."),
        click.option("--t0", type=float, help="Initial time."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group()
def main():
    """Asymptotic integration of Poincare-type ODEs."""


@main.command()
@click.argument("mode")
@solver_options
def analyze(mode, config, **kw):
    """Hypothesis checks, solution, envelopes and asymptotic report."""
    _execute("analyze", mode, config, kw, analyze=True)


@main.command()
@click.argument("mode")
@solver_options
def solve(mode, config, **kw):
    """Solve only and write solution CSVs."""
    _execute("solve", mode, config, kw, analyze=False)


@main.command()
@click.argument("mode", type=click.Choice(["unbounded", "unbounded4"]))
@click.option("--q", "q", required=True, help="q(t) expression.")
@click.option("--r", "r", default="1", help="r(t) expression.")
@click.option("--t0", type=float, default=1.0)
@click.option("--tmax", type=float, default=20.0)
@click.option("--n", type=int, default=50, help="Number of sample points.")
@click.option("--out", type=click.Path(file_okay=False), default=None)
def transform(mode, q, r, t0, tmax, n, out):
    """Tabulate the transformed coefficients r0..r3 for q, r."""
    try:
        prob = UnboundedProblem(q, r, t0=t0)
        ts = np.linspace(t0, tmax, n)
        s = s_of_t(prob, ts)
        rows = []
        for k, t in enumerate(ts):
            rp = transform_coefficients(prob, t)
            rd = derived_coefficients(prob, t)
            rows.append((t, s[k], *rp, *rd))
        header = ["t", "s", "r0", "r1", "r2", "r3", "r0_derived", "r1_derived",
                  "r2_derived", "r3_derived"]
        if out:
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "transform.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows([[_cell(x) for x in row] for row in rows])
        click.echo(",".join(header))
        for row in rows:
            click.echo(",".join(f"{float(x):.12g}" for x in row))
    except Exception as exc:
        sys.exit(_fail(exc, out, "transform"))


@main.command("reproduce-example")
@click.argument("n", type=click.IntRange(1, 3))
@click.option("--out", type=click.Path(file_okay=False), default=None)
def reproduce_example_cmd(n, out):
    """Printed vs computed constants of example N (mismatches are flagged)."""
    try:
        rep = reproduce_example(n)
    except Exception as exc:
        sys.exit(_fail(exc, out, "reproduce-example"))
    click.echo(rep.text())
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, f"example{n}.csv"), "w") as fh:
            fh.write(rep.csv())
        with open(os.path.join(out, f"example{n}.txt"), "w") as fh:
            fh.write(rep.text() + "\n")


@main.command()
@click.option("--out", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory of a previous analyze/solve run.")
def report(out):
    """Re-print the summary of a previous run; exit 0 iff all checks passed."""
    path = os.path.join(out, "summary.csv")
    if not os.path.exists(path):
        err = os.path.join(out, "error.json")
        if os.path.exists(err):
            with open(err) as fh:
                click.echo(fh.read().strip(), err=True)
            sys.exit(2)
        sys.exit(_fail(FileNotFoundError(f"no summary.csv in {out}"), None, "report"))
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        click.echo(f"{r['status'].upper():4}  {r['check']}  {r['value']}")
    n_fail = sum(r["status"] != "pass" for r in rows)
    click.echo(f"{len(rows) - n_fail}/{len(rows)} checks pass")
    sys.exit(0 if n_fail == 0 else 1)


if __name__ == "__main__":
    main()
