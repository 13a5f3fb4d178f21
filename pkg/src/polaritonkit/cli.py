"""Command-line entry point.

    polaritonkit <subcommand> [--scenario FILE] [--out DIR] [--format csv|json] [--threads N]

Exit codes: 0 success, 1 invalid input, 2 numerical tolerance failure. Errors
are written to standard error as one JSON object; data go to standard output
or, with ``--out``, to files in that directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import dispersion, evolution, greens, hopfield, propagators, quasimode
from .errors import NumericalError, ValidationError
from .medium import Medium, load_medium, lorentz, map_from_dict, medium_from_dict

SCHEMA_VERSION = 1
SUBCOMMANDS = ("dispersion", "propagator", "sumrules", "green", "hopfield", "quasimode", "evolve", "verify")
COMMON_KEYS = {"version", "seed", "medium", "medium_file", "grid", "grid_file"}


class ToleranceFailure(NumericalError):
    pass


# --- scenario handling -----------------------------------------------------------

def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _float_list(v, field):
    vals = v if isinstance(v, list) else [v]
    if not vals or not all(_num(x) for x in vals):
        raise ValidationError("expected a number or a non-empty list of numbers", field=field)
    return [float(x) for x in vals]


def _grid_spec(v, field):
    """Either a list of numbers or {start, stop, num}."""
    if isinstance(v, dict):
        extra = set(v) - {"start", "stop", "num"}
        if extra:
            raise ValidationError(f"unknown field(s) {sorted(extra)}", field=f"{field}.{sorted(extra)[0]}")
        for k in ("start", "stop", "num"):
            if not _num(v.get(k)):
                raise ValidationError(f"{k} must be a number", field=f"{field}.{k}")
        if int(v["num"]) < 1:
            raise ValidationError("num must be >= 1", field=f"{field}.num")
        return np.linspace(float(v["start"]), float(v["stop"]), int(v["num"]))
    return np.array(_float_list(v, field))


def _complex(v, field):
    if _num(v):
        return complex(float(v))
    if isinstance(v, list) and len(v) == 2 and all(_num(x) for x in v):
        return complex(float(v[0]), float(v[1]))
    raise ValidationError("expected a number or [re, im]", field=field)


def _block(scn, name, spec):
    """Validate a subcommand block against ``spec`` (key -> default) and fill defaults."""
    blk = scn.get(name, {})
    if not isinstance(blk, dict):
        raise ValidationError("parameter block must be an object", field=name)
    extra = set(blk) - set(spec)
    if extra:
        raise ValidationError(f"unknown field(s) {sorted(extra)}", field=f"{name}.{sorted(extra)[0]}")
    out = dict(spec)
    out.update(blk)
    return out


def load_scenario(path):
    if path is None:
        return {"version": SCHEMA_VERSION}
    try:
        with open(path) as fh:
            scn = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read scenario: {exc.strerror}", field="scenario") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario is not valid JSON: {exc}", field="scenario") from None
    if not isinstance(scn, dict):
        raise ValidationError("scenario must be a JSON object", field="scenario")
    extra = set(scn) - COMMON_KEYS - set(SUBCOMMANDS)
    if extra:
        raise ValidationError(f"unknown scenario field(s) {sorted(extra)}", field=sorted(extra)[0])
    if scn.get("version") != SCHEMA_VERSION:
        raise ValidationError(f"scenario version must be {SCHEMA_VERSION}", field="version")
    if "seed" in scn and (not isinstance(scn["seed"], int) or isinstance(scn["seed"], bool)):
        raise ValidationError("seed must be an integer", field="seed")
    base = os.path.dirname(os.path.abspath(path))
    for key in ("medium_file", "grid_file"):
        if key in scn:
            if not isinstance(scn[key], str):
                raise ValidationError("must be a path string", field=key)
            scn[key] = os.path.join(base, scn[key])
    return scn


def scenario_medium(scn, default=None) -> Medium:
    if "medium" in scn and "medium_file" in scn:
        raise ValidationError("give either medium or medium_file", field="medium_file")
    if "medium" in scn:
        return medium_from_dict(scn["medium"], "medium")
    if "medium_file" in scn:
        try:
            return load_medium(scn["medium_file"])
        except OSError as exc:
            raise ValidationError(f"cannot read medium file: {exc.strerror}", field="medium_file") from None
    if default is not None:
        return default
    raise ValidationError("a medium is required", field="medium")


def scenario_grid(scn):
    if "grid" in scn:
        return map_from_dict(scn["grid"])
    if "grid_file" in scn:
        try:
            with open(scn["grid_file"]) as fh:
                return map_from_dict(json.load(fh))
        except OSError as exc:
            raise ValidationError(f"cannot read grid file: {exc.strerror}", field="grid_file") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"grid file is not valid JSON: {exc}", field="grid_file") from None
    return None


# --- output --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def render_table(columns, rows, fmt):
    if fmt == "json":
        return json.dumps([_jsonable(dict(zip(columns, r))) for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


class Output:
    def __init__(self, out_dir, fmt):
        self.out_dir = out_dir
        self.fmt = fmt
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)

    def table(self, name, columns, rows, primary=True):
        text = render_table(columns, rows, self.fmt)
        self._emit(f"{name}.{self.fmt}", text, primary)

    def document(self, name, obj, primary=False):
        text = json.dumps(_jsonable(obj), indent=1) + "\n"
        self._emit(f"{name}.json", text, primary)

    def _emit(self, filename, text, primary):
        if self.out_dir is None:
            if primary:
                sys.stdout.write(text)
            return
        with open(os.path.join(self.out_dir, filename), "w") as fh:
            fh.write(text)


def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- subcommands -----------------------------------------------------------------

ROOT_COLUMNS = ["k", "re_Omega", "im_Omega", "re_D", "im_D", "family", "m"]


def cmd_dispersion(scn, out, args):
    med = scenario_medium(scn)
    p = _block(scn, "dispersion", {"omega_alpha": [0.5, 1.0, 2.0], "longitudinal": True})
    ks = np.sort(_grid_spec(p["omega_alpha"], "dispersion.omega_alpha"))
    per_k = _pmap(lambda k: dispersion.transverse_roots(med, float(k)), list(ks), args.threads)
    rows = []
    for k, roots in zip(ks, per_k):
        rows += [[float(k), r.omega.real, r.omega.imag, r.D.real, r.D.imag, r.family, r.m] for r in roots]
    if p["longitudinal"]:
        rows += [["", r.omega.real, r.omega.imag, r.D.real, r.D.imag, r.family, r.m]
                 for r in dispersion.longitudinal_roots(med)]
    out.table("dispersion", ROOT_COLUMNS, rows)


def cmd_propagator(scn, out, args):
    med = scenario_medium(scn)
    p = _block(scn, "propagator", {"omega_alpha": 1.0, "tau": {"start": 0.0, "stop": 20.0, "num": 201},
                                   "fft_size": 2**20})
    wa = _float_list(p["omega_alpha"], "propagator.omega_alpha")[0]
    tau = _grid_spec(p["tau"], "propagator.tau")
    if not isinstance(p["fft_size"], int) or p["fft_size"] < 1024:
        raise ValidationError("fft_size must be an integer >= 1024", field="propagator.fft_size")
    roots = dispersion.transverse_roots(med, wa)
    h = propagators.h_residue(roots, wa, tau)
    u = propagators.u_residue(roots, wa, tau, check=False)
    if med.is_vacuum:
        hn = h.copy()
    else:
        hn = propagators.h_numeric(med, wa, tau, n=p["fft_size"]).values
    rows = [[t, a, b, c, abs(a - b)] for t, a, b, c in zip(tau, h, hn, u)]
    out.table("propagator", ["tau", "H_residue", "H_numeric", "U_residue", "abs_err"], rows)


def _read_roots(path):
    try:
        with open(path) as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(ROOT_COLUMNS) - set(reader.fieldnames):
                raise ValidationError(f"roots file needs columns {ROOT_COLUMNS}", field="sumrules.roots_file")
            rows = list(reader)
    except OSError as exc:
        raise ValidationError(f"cannot read roots file: {exc.strerror}", field="sumrules.roots_file") from None
    groups = {}
    for i, r in enumerate(rows):
        if r["family"] != "transverse":
            continue
        try:
            k = float(r["k"])
            z = complex(float(r["re_Omega"]), float(r["im_Omega"]))
            D = complex(float(r["re_D"]), float(r["im_D"]))
            m = int(r["m"])
        except ValueError:
            raise ValidationError("non-numeric entry in roots file", field=f"sumrules.roots_file[{i}]") from None
        groups.setdefault(k, []).append(dispersion.PolaritonRoot(z, D, "transverse", m, k))
    return groups


def cmd_sumrules(scn, out, args):
    p = _block(scn, "sumrules", {"omega_alpha": [0.5, 1.0, 2.0], "roots_file": None, "tol": 1e-8})
    if p["roots_file"] is not None:
        if not isinstance(p["roots_file"], str):
            raise ValidationError("roots_file must be a path", field="sumrules.roots_file")
        path = p["roots_file"]
        if not os.path.isabs(path) and args.scenario:
            path = os.path.join(os.path.dirname(os.path.abspath(args.scenario)), path)
        groups = _read_roots(path)
    else:
        med = scenario_medium(scn)
        ks = _grid_spec(p["omega_alpha"], "sumrules.omega_alpha")
        groups = dict(zip(ks, _pmap(lambda k: dispersion.transverse_roots(med, float(k)), list(ks), args.threads)))
    rows, failed = [], []
    for k in sorted(groups):
        roots = groups[k]
        im = propagators.sum_rule_im(roots, k)
        re = propagators.sum_rule_re(roots, k)
        ok = abs(im) <= p["tol"] and abs(re - 1) <= p["tol"]
        rows.append([k, im, re, len(roots), ok])
        if not ok:
            failed.append({"omega_alpha": k, "im_sum": im, "re_sum": re, "n_roots": len(roots)})
    out.table("sumrules", ["omega_alpha", "im_sum", "re_sum", "n_roots", "pass"], rows)
    if failed:
        raise ToleranceFailure("sum rules violated: the root set is incomplete", {"failures": failed})


def cmd_green(scn, out, args):
    p = _block(scn, "green", {"omega": [1.0, 0.1], "pairs": [[[0, 0, 0], [1, 0, 0]]],
                              "components": ["xx", "xy", "xz", "yx", "yy", "yz", "zx", "zy", "zz"]})
    omegas = p["omega"] if isinstance(p["omega"], list) and p["omega"] and isinstance(p["omega"][0], list) \
        else [p["omega"]]
    omegas = [_complex(w, f"green.omega[{i}]") for i, w in enumerate(omegas)]
    pairs = p["pairs"]
    if not isinstance(pairs, list) or not pairs:
        raise ValidationError("pairs must be a non-empty list of [x, y]", field="green.pairs")
    pts = []
    for i, pr in enumerate(pairs):
        try:
            x, y = np.asarray(pr[0], dtype=float), np.asarray(pr[1], dtype=float)
            if x.shape != (3,) or y.shape != (3,):
                raise ValueError
        except (ValueError, TypeError, IndexError):
            raise ValidationError("each pair must be [[x,y,z], [x,y,z]]", field=f"green.pairs[{i}]") from None
        pts.append((x, y))
    comp_idx = []
    for i, c in enumerate(p["components"]):
        if not (isinstance(c, str) and len(c) == 2 and set(c) <= set("xyz")):
            raise ValidationError("components look like 'xy'", field=f"green.components[{i}]")
        comp_idx.append(("xyz".index(c[0]), "xyz".index(c[1])))
    smap = scenario_grid(scn)
    med = None if smap is not None else scenario_medium(scn)

    def solve(w):
        if smap is None:
            return [greens.g_dyadic_homogeneous(med, x, y, w).tensor for x, y in pts]
        op = greens.lippmann_schwinger_solve(smap, smap.background, w)
        return [op(x, y) for x, y in pts]

    results = _pmap(solve, omegas, args.threads)
    rows = []
    for w, vals in zip(omegas, results):
        for n, ((x, y), G) in enumerate(zip(pts, vals)):
            R = float(np.linalg.norm(x - y))
            for (a, b), name in zip(comp_idx, p["components"]):
                rows.append([w.real, w.imag, n, R, name, G[a, b].real, G[a, b].imag])
    out.table("green", ["re_omega", "im_omega", "pair", "separation", "component", "re", "im"], rows)


def cmd_hopfield(scn, out, args):
    p = _block(scn, "hopfield", {"omega0": 1.0, "omegap": 1.0,
                                 "omega_alpha": {"start": 0.1, "stop": 3.0, "num": 30}, "n_states": 100})
    for k in ("omega0", "omegap"):
        if not _num(p[k]):
            raise ValidationError("must be a number", field=f"hopfield.{k}")
    try:
        hm = hopfield.HopfieldMedium(float(p["omega0"]), float(p["omegap"]))
    except ValidationError as exc:
        raise ValidationError(str(exc), field=f"hopfield.{exc.field}") from None
    wa = _grid_spec(p["omega_alpha"], "hopfield.omega_alpha")
    up, lo, wl = hopfield.hopfield_frequencies(wa, hm)
    out.table("hopfield", ["omega_alpha", "Omega_plus", "Omega_minus", "omega_L"],
              [[a, b, c, wl] for a, b, c in zip(wa, up, lo)])
    rng = np.random.default_rng(scn.get("seed", 0))
    n = int(p["n_states"])
    devs = []
    for _ in range(n):
        F = rng.standard_normal((wa.size, 4))
        Lg = rng.standard_normal((wa.size, 2))
        amps = hopfield.hopfield_transform(F, wa, hm, Lg)
        devs.append(hopfield.hamiltonian_diagonal(amps, F, wa, hm, Lg)[2])
    report = {"omega0": hm.omega0, "omegap": hm.omegap, "omega_L": wl, "n_states": n,
              "max_energy_deviation": max(devs) if devs else 0.0,
              "max_secular_residual": float(max(hopfield.secular_residual(up, wa, hm).max(),
                                                hopfield.secular_residual(lo, wa, hm).max()))}
    out.document("hopfield_energy", report)


def cmd_quasimode(scn, out, args):
    med = scenario_medium(scn)
    p = _block(scn, "quasimode", {"omega_alpha": [1.0], "width_factor": 1.0, "shape": "hard",
                                  "longitudinal": True})
    ks = np.sort(_grid_spec(p["omega_alpha"], "quasimode.omega_alpha"))
    per_k = _pmap(lambda k: quasimode.transverse_quasimodes(med, float(k), p["width_factor"], p["shape"]),
                  list(ks), args.threads)
    rows = []
    for k, res in zip(ks, per_k):
        rows += [[float(k), f"transverse:{r.branch}", r.root.real, r.integral, r.target, r.rel_err] for r in res]
    if p["longitudinal"]:
        rows += [["", f"longitudinal:{r.branch}", r.root.real, r.integral, r.target, r.rel_err]
                 for r in quasimode.longitudinal_quasimodes(med, p["width_factor"], p["shape"])]
    out.table("quasimode", ["omega_alpha", "branch", "Omega", "integral", "target", "rel_err"], rows)


def _initial_state(sysm, init, seed):
    spec = {"q": None, "qdot": None, "packet": None, "bath_energy": 0.0}
    extra = set(init) - set(spec)
    if extra:
        raise ValidationError(f"unknown field(s) {sorted(extra)}", field=f"evolve.initial.{sorted(extra)[0]}")
    z = np.zeros(2 * sysm.n)
    for key in ("q", "qdot"):
        if init.get(key) is not None:
            v = _float_list(init[key], f"evolve.initial.{key}")
            if len(v) != sysm.M:
                raise ValidationError(f"needs {sysm.M} entries", field=f"evolve.initial.{key}")
            z += sysm.pack(**{key: v})
    if init.get("packet") is not None:
        pk = init["packet"]
        keys = {"k0", "width", "center", "amplitude"}
        if not isinstance(pk, dict) or set(pk) - keys or not {"k0", "width", "center"} <= set(pk):
            raise ValidationError("packet needs k0, width, center (amplitude optional)", field="evolve.initial.packet")
        z += evolution.wave_packet_state(sysm, pk["k0"], pk["width"], pk["center"], pk.get("amplitude", 1.0))
    if init.get("bath_energy"):
        z += evolution.thermal_bath_state(sysm, seed, float(init["bath_energy"]))
    return z


def cmd_evolve(scn, out, args):
    p = _block(scn, "evolve", {"basis": {"L": 6.283185307179586, "k_max": 2.0, "axis": 2, "polarizations": [1]},
                               "n_lines": 200, "omega_cut": None, "initial": {"q": None},
                               "integrator": {"method": "order8", "dt": 0.025, "T": 50.0, "stride": 40},
                               "probes": []})
    b = p["basis"]
    if not isinstance(b, dict) or set(b) - {"L", "k_max", "axis", "polarizations"}:
        raise ValidationError("basis takes L, k_max, axis, polarizations", field="evolve.basis")
    basis = greens.BoxModeBasis(b.get("L", 2 * np.pi), b.get("k_max", 2.0), b.get("axis", 2),
                                tuple(b.get("polarizations", [1])))
    smap = scenario_grid(scn)
    n_lines = p["n_lines"]
    if not isinstance(n_lines, int) or n_lines < 1:
        raise ValidationError("n_lines must be a positive integer", field="evolve.n_lines")
    if smap is not None:
        sysm = evolution.assemble_map(smap, basis, n_lines, p["omega_cut"])
    else:
        sysm = evolution.assemble_homogeneous(scenario_medium(scn), basis, n_lines, p["omega_cut"])
    init = p["initial"]
    if not isinstance(init, dict):
        raise ValidationError("initial must be an object", field="evolve.initial")
    z0 = _initial_state(sysm, init, scn.get("seed", 0))
    ig = p["integrator"]
    if not isinstance(ig, dict) or set(ig) - {"method", "dt", "T", "stride", "energy_bound"}:
        raise ValidationError("integrator takes method, dt, T, stride, energy_bound", field="evolve.integrator")
    for k in ("dt", "T"):
        if not _num(ig.get(k)) or ig[k] <= 0:
            raise ValidationError("must be a positive number", field=f"evolve.integrator.{k}")
    traj = evolution.integrate(sysm, z0, float(ig["T"]), float(ig["dt"]), ig.get("method", "order8"),
                               int(ig.get("stride", 1)), ig.get("energy_bound"))
    rep = evolution.energy_report(traj)
    probes = np.asarray(p["probes"], dtype=float).reshape(-1, 3)
    cols = ["t", "energy", "electromagnetic", "material"] + [f"q{m}" for m in range(sysm.M)]
    data = [traj.t, rep.total, rep.electromagnetic, rep.material] + [traj.q[:, m] for m in range(sysm.M)]
    if probes.size:
        E = evolution.probe_field(sysm, traj.z, probes)
        for i in range(probes.shape[0]):
            for c, name in enumerate("xyz"):
                cols.append(f"E{name}_probe{i}")
                data.append(E[:, i, c])
    out.table("trajectory", cols, list(zip(*data)))
    doc = rep.to_dict()
    doc.update({"method": traj.method, "dt": traj.dt, "n_modes": sysm.M, "n_sites": sysm.S,
                "n_lines": sysm.N})
    out.document("energy_report", doc)


# --- verify -------------------------------------------------------------------

def _check(name, value, tol, relation="<"):
    ok = value < tol if relation == "<" else value >= tol
    return {"check": name, "value": float(value), "tolerance": float(tol), "relation": relation, "pass": bool(ok)}


def verify_checks(med: Medium, quick=True):
    """Invariant suite; returns a list of check records."""
    out = []
    for wa in (0.5, 1.0, 2.0):
        roots = dispersion.transverse_roots(med, wa)
        out.append(_check(f"sumrule_im[{wa}]", abs(propagators.sum_rule_im(roots, wa)), 1e-8))
        out.append(_check(f"sumrule_re[{wa}]", abs(propagators.sum_rule_re(roots, wa) - 1), 1e-8))
    roots = dispersion.transverse_roots(med, 1.0)
    tau = np.linspace(0.05, 20.0, 200)
    if med.is_lossy:
        hn = propagators.h_numeric(med, 1.0, tau, n=2**18 if quick else 2**20)
        out.append(_check("propagator_fft", np.max(np.abs(propagators.h_residue(roots, 1.0, tau) - hn.values)), 1e-6))
    out.append(_check("dU_at_0", abs(propagators.du_residue(roots, 1.0, [0.0])[0] - 1), 1e-8))
    if med.is_passive:
        rect = dispersion.default_transverse_rectangle(med, 1.0)
        out.append(_check("upper_half_zeros",
                          dispersion.upper_half_zero_count(med, 1.0, 4 * rect.re_max), 0.5))
    hm = hopfield.HopfieldMedium(1.0, 1.0)
    up, lo, _ = hopfield.hopfield_frequencies(1.0, hm)
    out.append(_check("hopfield_closed_form", max(abs(up**2 - (3 + 5**0.5) / 2), abs(lo**2 - (3 - 5**0.5) / 2)), 1e-12))
    rng = np.random.default_rng(0)
    F = rng.standard_normal((20, 4))
    wa = rng.uniform(0.2, 3.0, 20)
    amps = hopfield.hopfield_transform(F, wa, hm)
    out.append(_check("hopfield_energy", hopfield.hamiltonian_diagonal(amps, F, wa, hm)[2], 1e-10))
    L = greens.depolarization_dyad(greens.Sphere(1.0))
    out.append(_check("sphere_depolarization", np.max(np.abs(L - np.eye(3) / 3)), 1e-10))
    weak = lorentz(1.0, 1.0, 1e-4)
    q = quasimode.transverse_quasimodes(weak, 1.0)[0]
    out.append(_check("quasimode_transverse", q.rel_err, 0.01))
    sysm = evolution.assemble_homogeneous(lorentz(1.0, 1.0, 0.1), [1.0], 100 if quick else 400)
    out.append(_check("symplectic_exact", evolution.symplectic_form_check(sysm, 50.0, method="exact"), 1e-8))
    traj = evolution.integrate(sysm, sysm.pack(q=[1.0]), 20.0 if quick else 200.0, 0.025, "order8", stride=20)
    out.append(_check("energy_drift", traj.energy_drift(), 1e-8))
    out.append(_check("time_reversal", evolution.time_reversal_check(traj), 1e-7))
    if med.is_lossy:
        out.append(_check("anticausal_kernel", evolution.kernel_reversal_check(med, 1.0, n=2**16), 1e-9))
    return out


def cmd_verify(scn, out, args):
    med = scenario_medium(scn, default=lorentz(1.0, 1.0, 0.1))
    t0 = time.perf_counter()
    checks = verify_checks(med, quick=args.quick)
    rows = [[c["check"], c["value"], c["tolerance"], c["relation"], c["pass"]] for c in checks]
    out.table("verify", ["check", "value", "tolerance", "relation", "pass"], rows)
    failed = [c for c in checks if not c["pass"]]
    print(json.dumps({"checks": len(checks), "failed": len(failed),
                      "seconds": round(time.perf_counter() - t0, 3)}), file=sys.stderr)
    if failed:
        raise ToleranceFailure("invariant checks failed", {"failures": failed})


COMMANDS = {
    "dispersion": cmd_dispersion, "propagator": cmd_propagator, "sumrules": cmd_sumrules,
    "green": cmd_green, "hopfield": cmd_hopfield, "quasimode": cmd_quasimode,
    "evolve": cmd_evolve, "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="polaritonkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", help="scenario JSON file")
        sp.add_argument("--out", help="output directory (default: standard output)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--threads", type=int, default=1)
        if name == "verify":
            sp.add_argument("--quick", action="store_true", help="reduced-size checks")
    return parser


def _error(kind, exc, extra=None):
    doc = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if extra:
        doc.update(extra)
    print(json.dumps(_jsonable(doc)), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    if args.threads < 1:
        _error("validation", ValidationError("threads must be >= 1"), {"field": "threads"})
        return 1
    try:
        scn = load_scenario(args.scenario)
        COMMANDS[args.command](scn, Output(args.out, args.format), args)
    except ValidationError as exc:
        _error("validation", exc, {"field": exc.field})
        return 1
    except NumericalError as exc:
        _error("numerical", exc, {"details": exc.details})
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
