"""Command-line front end: ``jostscat <command> --potential spec.json --out dir``.

Every command writes its artifact into ``--out`` (created if needed).  CSV
files have a header row, comma separators and LF endings; JSON keeps the key
order in which the report is built.  Floats are written with 17 significant
digits so they round-trip exactly.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 hypothesis
violation (bound states present where the theory excludes them).
"""
import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import jost, nls, potential, propagator, scattering, spectral
from ._volterra import VolterraIterationError
from .numerics import GridError, MomentumGrid, SpatialGrid, inner, l2_norm

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_HYPOTHESIS = 0, 2, 3, 4

CONFIG_ERRORS = (potential.PotentialError, GridError, nls.NlsConfigError, FileNotFoundError,
                 KeyError, json.JSONDecodeError)
NUMERICAL_ERRORS = (jost.JostError, VolterraIterationError, spectral.BoundStateError,
                    nls.NlsOverflowError, scattering.HorizonError, scattering.ConventionError,
                    propagator.ResolutionError, ArithmeticError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


# -- serialization ------------------------------------------------------------

def fmt(v):
    """One CSV/JSON scalar: 17 significant digits for floats."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        text = format(v, ".17g")
        if not any(c in text for c in ".en"):
            text += ".0"
        return text
    return str(v)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def to_json_text(obj, indent=0):
    pad, inner_pad = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner_pad}{json.dumps(str(k))}: {to_json_text(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        obj = list(obj)
        if not obj:
            return "[]"
        return "[" + ", ".join(to_json_text(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, (complex, np.complexfloating)):
        return to_json_text([obj.real, obj.imag], indent)
    if obj is None:
        return "null"
    if isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    return fmt(obj)


def write_json(path, obj):
    Path(path).write_text(to_json_text(obj) + "\n", encoding="utf-8", newline="\n")


# -- configuration ------------------------------------------------------------

def bundled_fixtures():
    root = resources.files("jostscat") / "fixtures"
    return sorted(str(p) for p in root.iterdir() if p.name.endswith(".json"))


def _floats(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def load_config_potential(args):
    if not args.potential:
        raise ConfigError("--potential is required for this command")
    path = Path(args.potential)
    if not path.is_file():
        raise ConfigError(f"potential spec {path} does not exist")
    V = potential.load_potential(path)
    grid = V.grid
    if args.grid_n is not None or args.grid_xmax is not None:
        grid = SpatialGrid(args.grid_xmax if args.grid_xmax is not None else grid.x_max,
                           args.grid_n if args.grid_n is not None else grid.n)
        V = potential.build_potential(V, grid)
    return V


def out_dir(args):
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def default_field(grid):
    return np.exp(-grid.x ** 2 / 2).astype(complex)


# -- commands -------------------------------------------------------------------

def cmd_coeffs(args):
    V = load_config_potential(args)
    ks = np.linspace(args.kmin if args.kmin is not None else 0.05,
                     args.kmax if args.kmax is not None else 8.0, args.nk)
    c = jost.scattering_coefficients(V, ks)
    rows = [(k, T.real, T.imag, r1.real, r1.imag, r2.real, r2.imag, u)
            for k, T, r1, r2, u in zip(c.k, c.T, c.R1, c.R2, c.unitarity_defect)]
    write_csv(out_dir(args) / "coefficients.csv",
              ["k", "T_re", "T_im", "R1_re", "R1_im", "R2_re", "R2_im", "unitarity_defect"], rows)


def cmd_classify(args):
    V = load_config_potential(args)
    c = jost.classify(V)
    report = {"classification": c.classification, "a": c.a,
              "wronskian": c.wronskian, "threshold": c.threshold,
              "transmission_at_zero": jost.transmission_at_zero(c)}
    write_json(out_dir(args) / "classification.json", report)


def cmd_bound_states(args):
    V = load_config_potential(args)
    bs = spectral.find_bound_states(V)
    rows = [(i, b.beta, b.energy, b.norm_residual, b.eigen_residual) for i, b in enumerate(bs)]
    write_csv(out_dir(args) / "bound_states.csv",
              ["index", "beta", "energy", "norm_residual", "eigen_residual"], rows)


def _spectral(V, orthonormalize=False):
    return spectral.build_spectral_data(V, orthonormalize=orthonormalize)


def cmd_kernel(args):
    if args.t is None:
        raise ConfigError("kernel needs --t")
    V = load_config_potential(args)
    sd = _spectral(V)
    ks = propagator.kernel_continuous(args.t, sd, k_max=args.kmax or 8.0)
    rows = [(x, y, ks.values[i, j].real, ks.values[i, j].imag)
            for i, x in enumerate(ks.x) for j, y in enumerate(ks.y)]
    d = out_dir(args)
    write_csv(d / "kernel.csv", ["x", "y", "K_re", "K_im"], rows)
    write_json(d / "kernel_summary.json", {"t": ks.t, "sup_abs": ks.sup_abs,
                                           "scaled_sup": math.sqrt(ks.t) * ks.sup_abs})


def cmd_decay(args):
    if not args.times:
        raise ConfigError("decay needs --times")
    V = load_config_potential(args)
    sd = _spectral(V)
    rep = propagator.decay_scan(sd, _floats(args.times), k_max=args.kmax or 8.0)
    rows = list(zip(rep.times, rep.sup_abs, rep.scaled_sup))
    write_csv(out_dir(args) / "decay.csv", ["t", "sup_abs", "scaled_sup"], rows)


def _dump_field(path, grid, u):
    write_csv(path, ["x", "re", "im"], [(x, z.real, z.imag) for x, z in zip(grid.x, u)])


def cmd_evolve_linear(args):
    V = load_config_potential(args)
    sd = _spectral(V, orthonormalize=True)
    times = _floats(args.times) if args.times else [args.t if args.t is not None else 1.0]
    phi = default_field(V.grid)
    flow = nls.LinearFlow(sd)
    rows = []
    d = out_dir(args)
    for t in times:
        u = flow(phi, t)
        h, m = flow.quadratic_forms(u)
        rows.append((t, m, 0.5 * h, float(np.max(np.abs(u)))))
        if args.dump:
            _dump_field(d / f"field_t{fmt(t)}.csv", V.grid, u)
    write_csv(d / "trajectory.csv", ["t", "mass", "energy", "sup_abs"], rows)


def cmd_evolve_nls(args):
    V = load_config_potential(args)
    sd = _spectral(V, orthonormalize=True)
    t_end = args.t if args.t is not None else 1.0
    cfg = nls.NlsConfig(args.lam if args.lam is not None else 0.1, args.p, args.dt, (0.0, t_end))
    traj = nls.evolve_nls(default_field(V.grid), cfg, sd, record_every=args.record_every)
    d = out_dir(args)
    write_csv(d / "trajectory.csv", ["t", "mass", "energy", "sup_abs"],
              nls.trajectory_rows(traj))
    if args.dump:
        _dump_field(d / "field_final.csv", V.grid, traj.fields[-1])


def cmd_smatrix(args):
    if not args.k:
        raise ConfigError("smatrix needs --k")
    V = load_config_potential(args)
    if args.grid_n is None and args.grid_xmax is None:
        V = potential.build_potential(V, SpatialGrid(120.0, 2048))
    sd = _spectral(V, orthonormalize=True)
    ks = _floats(args.k)
    c = jost.scattering_coefficients(V, ks, classify_potential=False)
    rows = []
    for i, k in enumerate(ks):
        s = scattering.sl_matrix(k, sd)
        ref = np.array([[c.T[i], c.R1[i]], [c.R2[i], c.T[i]]])
        m = s.matrix
        rows.append((k, m[0, 0].real, m[0, 0].imag, m[0, 1].real, m[0, 1].imag,
                     m[1, 0].real, m[1, 0].imag, m[1, 1].real, m[1, 1].imag,
                     float(np.max(np.abs(m - ref)))))
    write_csv(out_dir(args) / "smatrix.csv",
              ["k", "S11_re", "S11_im", "S12_re", "S12_im", "S21_re", "S21_im",
               "S22_re", "S22_im", "defect_vs_jost"], rows)


def cmd_recover_lambda(args):
    if args.true_lambda is None:
        raise ConfigError("recover-lambda needs --true-lambda")
    V = load_config_potential(args)
    if args.grid_n is None and args.grid_xmax is None:
        V = potential.build_potential(V, SpatialGrid(80.0, 1024))
    sd = _spectral(V, orthonormalize=True)
    eps = _floats(args.eps) if args.eps else [0.2, 0.1, 0.05]
    cfg = nls.NlsConfig(args.true_lambda, args.p)
    rec = scattering.recover_lambda(default_field(V.grid), cfg, sd, epsilons=eps,
                                    horizon=args.horizon, with_born=True)
    write_json(out_dir(args) / "recover_lambda.json", rec.to_json())


# -- verify ---------------------------------------------------------------------

def _check(name, value, tol, results, compare="lt"):
    ok = bool(value < tol) if compare == "lt" else bool(value == tol)
    results[name] = {"passed": ok, "value": value, "tolerance": tol}


def _verify_potential(path, results):
    V = potential.load_potential(path)
    tag = Path(path).stem
    c = jost.scattering_coefficients(V, np.linspace(0.05, 8.0, 16), classify_potential=False)
    _check(f"{tag}.unitarity", float(np.max(c.unitarity_defect)), 1e-8, results)
    _check(f"{tag}.transmission_routes", float(np.max(np.abs(c.T - c.T_j2))), 1e-6, results)
    jd = jost.jost_data(V, c.k[::4], x=np.linspace(-5, 5, 41))
    rel = jost.verify_relations(jd, jost.ScatteringCoefficients(
        k=c.k[::4], T=c.T[::4], R1=c.R1[::4], R2=c.R2[::4], T_j2=c.T_j2[::4]))
    _check(f"{tag}.jost_relations", max(rel["relation_m1"], rel["relation_m2"]), 1e-6, results)
    cls = jost.classify(V)
    if cls.classification == "exceptional":
        t0 = jost.transmission_at_zero(cls)
        _check(f"{tag}.exceptional_t0_bounded", abs(t0), 1.0 + 1e-12, results)
    for b in spectral.find_bound_states(V):
        _check(f"{tag}.bound_state_norm", b.norm_residual, 1e-8, results)


def cmd_verify(args):
    results = {}
    paths = [args.potential] if args.potential else bundled_fixtures()
    for p in paths:
        _verify_potential(p, results)
    # closed-form Jost solution of -2 sech^2
    V = potential.build_potential(potential.poschl_teller(1))
    x = np.linspace(-10, 10, 81)
    ks = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    jd = jost.jost_data(V, ks, x=x)
    exact = (ks[:, None] + 1j * np.tanh(x)[None, :]) / (ks[:, None] + 1j)
    _check("closed_form.m1", float(np.max(np.abs(jd.m1 - exact))), 1e-6, results)
    bs = spectral.find_bound_states(V)
    _check("closed_form.bound_state_count", len(bs), 1, results, compare="eq")
    _check("closed_form.beta", abs(bs[0].beta - 1.0) if bs else 1.0, 1e-6, results)
    # classification
    g = SpatialGrid(20.0, 1024)
    for name, spec, want in [("zero", potential.zero(), "exceptional"),
                             ("square_well_1_1", potential.square_well(1.0, 1.0), "generic"),
                             ("resonant_well", potential.square_well((np.pi / 2) ** 2, 1.0),
                              "exceptional")]:
        got = jost.classify(potential.build_potential(spec, g)).classification
        results[f"classify.{name}"] = {"passed": got == want, "value": got, "tolerance": want}
    # free kernel and Parseval on a smooth repulsive potential
    t = np.array([0.5, 2.0, 8.0])
    amp = np.abs(propagator.free_kernel(t, 0.0, 3.0))
    _check("free_kernel.modulus", float(np.max(np.abs(amp * np.sqrt(4 * np.pi * t) - 1))),
           1e-14, results)
    Vg = potential.build_potential(potential.gaussian(0.3, 1.0), SpatialGrid(40.0, 512))
    sd = spectral.build_spectral_data(Vg)
    phi = np.exp(-(Vg.grid.x - 1.0) ** 2 / 2) * (1 + 0.3j * Vg.grid.x)
    _check("parseval.gaussian", spectral.parseval_defect(phi, sd), 1e-6, results)
    # linear scattering: S_V is the identity without nonlinearity
    sdo = spectral.build_spectral_data(Vg, orthonormalize=True)
    cfg0 = nls.NlsConfig(0.0, 5.0)
    phi0 = 0.1 * np.exp(-Vg.grid.x ** 2 / 2).astype(complex)
    out = scattering.nonlinear_S_V_fixed(phi0, cfg0, sdo, horizon=10.0).phi_plus
    _check("scattering.linear_identity", l2_norm(out - phi0, Vg.grid), 1e-8, results)
    # a boosted packet: the k = 0 cell is dropped for generic potentials (T(0) = 0)
    boosted = phi0 * np.exp(4j * Vg.grid.x)
    sl = scattering.linear_S(boosted, sdo)
    _check("scattering.linear_unitary",
           abs(l2_norm(sl, Vg.grid) - l2_norm(boosted, Vg.grid)), 1e-8, results)
    passed = all(r["passed"] for r in results.values())
    write_json(out_dir(args) / "verify.json", {"passed": passed, "checks": results})
    if not passed:
        raise ArithmeticError("verification suite failed: "
                              + ", ".join(k for k, r in results.items() if not r["passed"]))


COMMANDS = {
    "coeffs": cmd_coeffs, "classify": cmd_classify, "bound-states": cmd_bound_states,
    "kernel": cmd_kernel, "decay": cmd_decay, "evolve-linear": cmd_evolve_linear,
    "evolve-nls": cmd_evolve_nls, "smatrix": cmd_smatrix, "recover-lambda": cmd_recover_lambda,
    "verify": cmd_verify,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="jostscat", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--potential", help="potential spec JSON")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--grid-n", type=int, dest="grid_n")
    ap.add_argument("--grid-xmax", type=float, dest="grid_xmax")
    ap.add_argument("--kmax", type=float)
    ap.add_argument("--kmin", type=float)
    ap.add_argument("--nk", type=int, default=64, help="number of momenta for coeffs")
    ap.add_argument("--t", type=float)
    ap.add_argument("--times", help="comma-separated times")
    ap.add_argument("--lambda", type=float, dest="lam")
    ap.add_argument("--true-lambda", type=float, dest="true_lambda")
    ap.add_argument("--p", type=float, default=5.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--record-every", type=int, default=100, dest="record_every")
    ap.add_argument("--eps", help="comma-separated epsilons")
    ap.add_argument("--horizon", type=float, default=scattering.HORIZON)
    ap.add_argument("--k", help="comma-separated momenta for smatrix")
    ap.add_argument("--dump", action="store_true", help="also write field samples")
    return ap


def _error_report(args, kind, exc, code):
    report = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "defect", None) is not None:
        report["defect"] = exc.defect
    if getattr(exc, "residual", None) is not None:
        report["residual"] = exc.residual
    text = to_json_text(report)
    print(text, file=sys.stderr)
    try:
        write_json(out_dir(args) / "error.json", report)
    except OSError:
        pass
    return code


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        COMMANDS[args.command](args)
    except scattering.HypothesisViolation as exc:
        return _error_report(args, "hypothesis", exc, EXIT_HYPOTHESIS)
    except (ConfigError,) + CONFIG_ERRORS as exc:
        return _error_report(args, "config", exc, EXIT_CONFIG)
    except NUMERICAL_ERRORS as exc:
        return _error_report(args, "numerical", exc, EXIT_NUMERICAL)
    except ValueError as exc:
        return _error_report(args, "config", exc, EXIT_CONFIG)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
