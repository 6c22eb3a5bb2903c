"""Command-line driver: config ingestion, scenario dispatch and CSV output.

Subcommands: unsteady, steady, verify-identities, check-compat,
inequalities, convergence.  Configuration is a flat INI document with
sections [grid], [weights], [unsteady], [steady], [output]; every key
has a default, so a missing config file runs the desk-scale defaults.

Exit codes: 0 completed, 2 monitor failure (life span, blow-up,
divergence), 3 configuration error, 4 internal error.
"""

import argparse
import configparser
import os
import sys

import numpy as np

from .errors import (
    BlowUpError,
    ConfigurationError,
    DataError,
    IterationDivergenceError,
    LifeSpanExceeded,
    PrandtlLabError,
    StepError,
    UsageError,
)
from .grid import WeightParams, make_grid
from .initial_data import (
    build_u0_blend,
    build_unsteady_data,
    check_compat,
    validate_weights,
)
from .inequalities import KINDS, random_decaying_field, run_inequality_suite
from .monitors import MonitorConfig
from .unsteady import UnsteadyParams, heat_oracle, init_unsteady, run_unsteady, step_unsteady
from .good_unknowns import (
    residual_good_unknown_equation,
    verify_boundary_reduction_1,
    verify_quotient_identity,
)
from .steady import SteadyParams, _l2_weights, _profile_d1_matrix, compute_r0, run_steady
from .initial_data import _profile_d2_matrix, wall_derivative


DEFAULTS = {
    "grid": {"nx": "16", "ny": "201", "y_max": "12", "stretch": "0"},
    "weights": {"gamma": "2.0", "sigma": "3.0"},
    "unsteady": {"eps": "1e-3", "dt": "2e-3", "t_final": "0.05",
                 "s_order": "2", "amplitude": "0.05", "delta_bl": "0.02",
                 "kappa1": "0.25", "kappa2": "4.0"},
    "steady": {"theta_schedule": "1e-1,1e-2,1e-3,0", "dx": "1e-3",
               "l": "0.1", "m": "3", "sigma_tilde": "2.0", "kappa3": "",
               "picard_tol": "1e-9", "picard_max_iters": "40"},
    "output": {"dir": "out", "snapshot_every": "5", "csv_precision": "17"},
}

# lambda exponents used for the randomized inequality samples
INEQUALITY_LAMBDAS = {"hardy1": 0.7, "hardy2": -1.0, "trace": 0.0,
                      "sobolev_inf": 0.0, "morse": 0.5}

ENERGY_HEADER = ("t,E_total,E_w,E_rho,E_gu,E_linf,D_total,"
                 "min_w_sigma,rho_min,rho_max")
STEADY_HEADER = "x,X_total,Y_total,dyu_wall,r0_residual,phi_last"
INEQ_HEADER = "kind,sample_id,lhs,rhs,holds,empirical_constant"


class RunConfig:
    """Typed view of the INI sections with defaults filled in."""

    def __init__(self, sections):
        self.sections = sections

    def get(self, section, key, cast=float):
        raw = self.sections[section][key]
        if cast is float:
            return float(raw)
        if cast is int:
            return int(raw)
        return raw

    @property
    def weights(self):
        return WeightParams(self.get("weights", "gamma"),
                            self.get("weights", "sigma"))

    def make_grid(self):
        return make_grid(self.get("grid", "nx", int),
                         self.get("grid", "ny", int),
                         self.get("grid", "y_max"),
                         self.get("grid", "stretch"))

    def unsteady_params(self, data, eps=None):
        u = self.sections["unsteady"]
        return UnsteadyParams(eps=eps if eps is not None else float(u["eps"]),
                              dt=float(u["dt"]), t_final=float(u["t_final"]),
                              s_order=int(u["s_order"]),
                              rho_inf=data.rho_inf, u_inf=data.u_inf)

    def monitor_config(self):
        u = self.sections["unsteady"]
        return MonitorConfig(self.weights, float(u["delta_bl"]),
                             float(u["kappa1"]), float(u["kappa2"]),
                             s_max=int(u["s_order"]),
                             snapshot_every=self.get("output",
                                                     "snapshot_every", int))

    def steady_params(self):
        s = self.sections["steady"]
        sched = tuple(float(t) for t in s["theta_schedule"].split(","))
        kappa3 = float(s["kappa3"]) if s["kappa3"].strip() else None
        return SteadyParams(L=float(s["l"]), dx=float(s["dx"]),
                            theta_schedule=sched, m=int(s["m"]),
                            sigma_tilde=float(s["sigma_tilde"]),
                            kappa3=kappa3,
                            picard_tol=float(s["picard_tol"]),
                            picard_max_iters=int(s["picard_max_iters"]))


class ScenarioResult:
    def __init__(self, status, artifacts, summary, final_state=None):
        self.status = status
        self.artifacts = list(artifacts)
        self.summary = dict(summary)
        self.final_state = final_state


def parse_config(text):
    """RunConfig from an INI document; unknown sections or keys are
    rejected, as are inadmissible weight pairs."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config parse error: {exc}") from exc

    sections = {name: dict(vals) for name, vals in DEFAULTS.items()}
    for name in parser.sections():
        if name not in DEFAULTS:
            raise ConfigurationError(f"unknown config section [{name}]")
        for key, val in parser[name].items():
            if key in ("outer_flow", "u_outer", "pressure_gradient"):
                raise ConfigurationError(
                    f"key '{key}' not supported: the outer flow is a "
                    "constant (its Bernoulli relation is trivial)")
            if key not in DEFAULTS[name]:
                raise ConfigurationError(
                    f"unknown key '{key}' in section [{name}]")
            sections[name][key] = val

    cfg = RunConfig(sections)
    gamma, sigma = cfg.get("weights", "gamma"), cfg.get("weights", "sigma")
    if not validate_weights(gamma, sigma):
        raise ConfigurationError(
            f"inadmissible weights gamma = {gamma:g}, sigma = {sigma:g}: "
            "need gamma > 3/2 and gamma + 1/2 < sigma <= 2*gamma - 1")
    for name, key, lo in [("grid", "nx", 4), ("grid", "ny", 16),
                          ("output", "snapshot_every", 1),
                          ("output", "csv_precision", 1)]:
        if cfg.get(name, key, int) < lo:
            raise ConfigurationError(f"{key} must be at least {lo}")
    return cfg


def _fmt(value, precision):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"%.{precision}e" % float(value)


def write_outputs(rows, path, header, precision=17):
    """One CSV file: fixed header, fixed-precision scientific notation,
    newline-terminated, byte-reproducible."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v, precision) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _steady_1d_data(cfg):
    """Canonical builder data on the configured wall-normal nodes."""
    y = make_grid(4, cfg.get("grid", "ny", int), cfg.get("grid", "y_max"),
                  cfg.get("grid", "stretch")).y_nodes
    rho0 = 2.0 + 0.3 * np.exp(-y)
    return build_u0_blend(0.8, 2.0, 1.0, 5, y, rho0=rho0)


def scenario_unsteady(cfg, outdir, eps=None):
    grid = cfg.make_grid()
    mon = cfg.monitor_config()
    u = cfg.sections["unsteady"]
    data = build_unsteady_data(cfg.weights, mon.delta_bl, mon.kappa1,
                               mon.kappa2, float(u["amplitude"]), grid)
    params = cfg.unsteady_params(data, eps=eps)
    prec = cfg.get("output", "csv_precision", int)
    status, failure = "completed", None
    try:
        run = run_unsteady(init_unsteady(data.rho0, data.u0, params),
                           params, mon)
        status, failure = run.status, run.failure
        reports = run.reports
        final = run.snapshots[-1]
    except BlowUpError as exc:
        return ScenarioResult("blow_up", [], {"failure": str(exc)})

    rows = [(r.t, r.E_total, r.E_w_terms, r.E_rho_terms, r.E_goodunknown,
             r.E_linf, r.D_total, r.min_w_sigma, r.rho_min, r.rho_max)
            for r in reports]
    paths = [write_outputs(rows, os.path.join(outdir, "energy.csv"),
                           ENERGY_HEADER, prec)]
    prof = zip(grid.y_nodes, final.rho.values[0], final.u.values[0],
               final.w.values[0])
    paths.append(write_outputs(prof, os.path.join(outdir, "profiles.csv"),
                               "y,rho,u,w", prec))
    summary = {"status": status, "t0_empirical": run.t0_empirical,
               "snapshots": len(reports)}
    if failure is not None:
        summary["failure"] = str(failure)
    return ScenarioResult(status, paths, summary, final_state=final)


def scenario_steady(cfg, outdir):
    data = _steady_1d_data(cfg)
    params = cfg.steady_params()
    prec = cfg.get("output", "csv_precision", int)
    try:
        run = run_steady(data, params)
    except LifeSpanExceeded as exc:
        return ScenarioResult("life_span_exceeded", [],
                              {"failure": str(exc), "where": exc.where})
    except IterationDivergenceError as exc:
        return ScenarioResult("iteration_divergence", [],
                              {"failure": str(exc)})

    y = data.y
    D1 = _profile_d1_matrix(y)
    D2 = _profile_d2_matrix(y)
    wy = _l2_weights(y)
    theta_last = params.theta_schedule[-1]
    r0 = compute_r0(data.rho0, data.u0, y, theta_last)
    phi_last = run.diagnostics[-1].phi_series[-1]
    m = params.m
    rows = []
    for j, st in enumerate(run.slab):
        res = st.rho * (st.u + theta_last) ** 2 * st.dyq + D2 @ st.u - r0
        rows.append((st.x,
                     run.X_series[j - m] if j >= m else float("nan"),
                     run.Y_series[j - m] if j >= m else float("nan"),
                     wall_derivative(y, st.u, 1, 5),
                     float(np.sqrt(np.sum(res ** 2 * wy))),
                     phi_last))
    paths = [write_outputs(rows, os.path.join(outdir, "steady.csv"),
                           STEADY_HEADER, prec)]
    picard_rows = [(f"{d.theta:g}", k + 1, phi)
                   for d in run.diagnostics
                   for k, phi in enumerate(d.phi_series)]
    paths.append(write_outputs(picard_rows,
                               os.path.join(outdir, "picard.csv"),
                               "theta,k,phi", prec))
    last = run.slab[-1]
    prof = zip(y, last.rho, last.u, D1 @ last.u, last.q)
    paths.append(write_outputs(prof, os.path.join(outdir, "profiles.csv"),
                               "y,rho,u,w,q", prec))
    summary = {"status": "completed", "L_a": run.L_a,
               "lambda0": run.lambda0,
               "contraction_ratios": [d.contraction_ratio
                                      for d in run.diagnostics],
               "theta_distances": run.theta_distances}
    return ScenarioResult("completed", paths, summary)


def scenario_verify_identities(cfg, outdir):
    grid = cfg.make_grid()
    mon = cfg.monitor_config()
    u = cfg.sections["unsteady"]
    data = build_unsteady_data(cfg.weights, mon.delta_bl, mon.kappa1,
                               mon.kappa2, float(u["amplitude"]), grid)
    params = cfg.unsteady_params(data)
    s = params.s_order
    prec = cfg.get("output", "csv_precision", int)
    st = init_unsteady(data.rho0, data.u0, params)
    hist = [st]
    for _ in range(max(3, min(20, int(round(params.t_final / params.dt))))):
        st = step_unsteady(st, params)
        hist.append(st)
    rows = [("quotient_identity", s,
             verify_quotient_identity(hist[-1], s).residual_norm)]
    for which in ("wg", "rhog"):
        r = residual_good_unknown_equation(which, hist[-3:], params, s)
        rows.append((f"evolution_{which}", s, r.residual_norm))
    rows.append(("boundary_reduction", 0,
                 verify_boundary_reduction_1(hist[-1]).residual_norm))
    path = write_outputs(rows, os.path.join(outdir, "identities.csv"),
                         "check,s,residual_norm", prec)
    return ScenarioResult("completed", [path],
                          {"status": "completed",
                           "checks": {r[0]: r[2] for r in rows}})


def scenario_check_compat(cfg, outdir):
    data = _steady_1d_data(cfg)
    report = check_compat(data)
    prec = cfg.get("output", "csv_precision", int)
    rows = [(e.name.replace(",", ";"), e.value, e.threshold, e.passed)
            for e in report.entries]
    path = write_outputs(rows, os.path.join(outdir, "compat.csv"),
                         "name,value,threshold,pass", prec)
    return ScenarioResult("completed", [path],
                          {"status": "completed",
                           "overall_pass": report.overall_pass,
                           "overall_order_m": report.overall_order_m})


def scenario_inequalities(cfg, outdir, seed=0):
    rng = np.random.default_rng(seed)
    grid = make_grid(16, 129, 12, 0)
    prec = cfg.get("output", "csv_precision", int)
    rows = []
    all_hold = True
    for kind in KINDS:
        samples = [random_decaying_field(grid, rng) for _ in range(100)]
        for rep in run_inequality_suite(kind, samples,
                                        INEQUALITY_LAMBDAS[kind]):
            rows.append((rep.kind, rep.sample_id, rep.lhs, rep.rhs,
                         rep.holds, rep.empirical_constant))
            all_hold = all_hold and rep.holds
    path = write_outputs(rows, os.path.join(outdir, "inequality.csv"),
                         INEQ_HEADER, prec)
    return ScenarioResult("completed", [path],
                          {"status": "completed", "samples": len(rows),
                           "all_hold": all_hold})


def _final_state_distance(a, b):
    """Grid L2 distance between two final unsteady states (u and rho)."""
    du = a.u.values - b.u.values
    dr = a.rho.values - b.rho.values
    g = a.u.grid
    return float(np.sqrt(g.integrate(du ** 2) + g.integrate(dr ** 2)))


def convergence_study(cfg, axis, levels, outdir):
    """Geometric refinement along one axis; table of successive errors.

    h and dt refine against an oracle or a reference run; eps and theta
    are continuation axes whose successive-solution distances must
    shrink.
    """
    if levels < 3:
        raise UsageError("convergence study needs at least 3 levels")
    prec = cfg.get("output", "csv_precision", int)
    rows = []

    if axis == "h":
        errs = []
        ny0 = 51
        for lev in range(levels):
            ny = (ny0 - 1) * 2 ** lev + 1
            err = _heat_reduction_error(cfg, ny)
            order = (np.log2(errs[-1] / err) if errs else float("nan"))
            errs.append(err)
            rows.append((axis, lev, (cfg.get("grid", "y_max")) / (ny - 1),
                         err, order))
    elif axis == "dt":
        # halvings of dt0 divide t_final = 0.25 exactly at every level
        dt0 = 5e-3
        ref = _heat_reduction_final(cfg, 201, dt0 / 2 ** (levels + 2))
        errs = []
        for lev in range(levels):
            dt = dt0 / 2 ** lev
            sol = _heat_reduction_final(cfg, 201, dt)
            err = float(np.abs(sol - ref).max())
            order = (np.log2(errs[-1] / err) if errs else float("nan"))
            errs.append(err)
            rows.append((axis, lev, dt, err, order))
    elif axis == "eps":
        eps_levels = [1e-2 / 10 ** lev for lev in range(levels)]
        finals = []
        for eps in eps_levels:
            res = scenario_unsteady(cfg, os.path.join(outdir, f"eps_{eps:g}"),
                                    eps=eps)
            if res.status != "completed":
                raise StepError(f"eps = {eps:g} run ended in {res.status}")
            finals.append(res.final_state)
        dists = [_final_state_distance(a, b)
                 for a, b in zip(finals, finals[1:])]
        for lev, (eps, dist) in enumerate(zip(eps_levels[1:], dists)):
            order = (np.log10(dists[lev - 1] / dist) if lev else float("nan"))
            rows.append((axis, lev, eps, dist, order))
    elif axis == "theta":
        sched = tuple(1e-1 / 10 ** k for k in range(levels)) + (0.0,)
        params = cfg.steady_params()
        params.theta_schedule = sched
        run = run_steady(_steady_1d_data(cfg), params)
        for lev, dist in enumerate(run.theta_distances):
            order = (np.log10(run.theta_distances[lev - 1] / dist)
                     if lev else float("nan"))
            rows.append((axis, lev, sched[lev + 1], dist, order))
    else:
        raise UsageError(f"unknown convergence axis {axis!r}")

    path = write_outputs(rows, os.path.join(outdir, "convergence.csv"),
                         "axis,level,param,error,observed_order", prec)
    errors = [r[3] for r in rows]
    return ScenarioResult("completed", [path],
                          {"status": "completed", "axis": axis,
                           "errors": errors,
                           "monotone": all(b < a for a, b in
                                           zip(errors, errors[1:]))})


def _heat_reduction_data(cfg, ny):
    grid = make_grid(4, ny, cfg.get("grid", "y_max"), 0)
    base = build_u0_blend(0.8, 2.0, 1.0, 5, grid.y_nodes)
    return grid, base


def _heat_reduction_final(cfg, ny, dt, rho_c=2.0, t_final=0.25):
    from .grid import ScalarField

    grid, base = _heat_reduction_data(cfg, ny)
    u0 = ScalarField(grid, np.tile(base.u0, (4, 1)))
    rho0 = ScalarField(grid, np.full((4, ny), rho_c))
    params = UnsteadyParams(eps=cfg.get("unsteady", "eps"), dt=dt,
                            t_final=t_final, rho_inf=rho_c)
    st = init_unsteady(rho0, u0, params)
    for _ in range(int(round(t_final / dt))):
        st = step_unsteady(st, params)
    return st.u.values[0]

def _heat_reduction_error(cfg, ny, dt=2e-3, rho_c=2.0, t_final=0.25):
    grid, base = _heat_reduction_data(cfg, ny)
    sol = _heat_reduction_final(cfg, ny, dt, rho_c, t_final)
    ref = heat_oracle(rho_c, base.u0, grid.y_nodes, t_final, dt_main=dt)
    return float(np.abs(sol - ref).max())


def _load_config(path):
    if path is None:
        return parse_config("")
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config(fh.read())


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="prandtl-lab",
        description="Numerical laboratory for the 2D inhomogeneous "
                    "Prandtl boundary-layer equations")
    def add_common(p, suppress=False):
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        p.add_argument("--config", help="INI config file",
                       **(kw or {"default": None}))
        p.add_argument("--out", help="output directory",
                       **(kw or {"default": None}))
        p.add_argument("--seed", type=int,
                       help="seed for randomized samples",
                       **(kw or {"default": 0}))
        p.add_argument("--quiet", action="store_true",
                       **(kw or {"default": False}))

    add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("unsteady", "steady", "verify-identities", "check-compat",
                 "inequalities"):
        add_common(sub.add_parser(name), suppress=True)
    conv = sub.add_parser("convergence")
    add_common(conv, suppress=True)
    conv.add_argument("--axis", choices=("h", "dt", "eps", "theta"),
                      default="h")
    conv.add_argument("--levels", type=int, default=3)
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        outdir = args.out or cfg.get("output", "dir", str)
        if args.command == "unsteady":
            result = scenario_unsteady(cfg, outdir)
        elif args.command == "steady":
            result = scenario_steady(cfg, outdir)
        elif args.command == "verify-identities":
            result = scenario_verify_identities(cfg, outdir)
        elif args.command == "check-compat":
            result = scenario_check_compat(cfg, outdir)
        elif args.command == "inequalities":
            result = scenario_inequalities(cfg, outdir, seed=args.seed)
        else:
            result = convergence_study(cfg, args.axis, args.levels, outdir)
    except (ConfigurationError, UsageError, DataError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except (LifeSpanExceeded, BlowUpError, StepError,
            IterationDivergenceError) as exc:
        print(f"monitor failure: {exc}", file=sys.stderr)
        return 2
    except PrandtlLabError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4

    if not args.quiet:
        print(f"status: {result.status}")
        for key, val in result.summary.items():
            print(f"  {key}: {val}")
        for path in result.artifacts:
            print(f"  wrote {path}")
    if result.status != "completed":
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
