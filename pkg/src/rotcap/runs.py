"""Experiment drivers: single runs, the epsilon sweep, analysis passes.

Every driver is callable from Python with in-memory results, and each can
also persist a run directory (time series, snapshots, a manifest with
content hashes) for the command-line entry points. Sweep members execute
independently; a member abort from vacuum or a CFL violation is recorded
and the sweep continues with the rest.
"""

from __future__ import annotations

import datetime
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagio, lp, nsk, qg, zygmund
from .config import eps_values
from .errors import CflError, ConfigError, SolverError, VacuumError
from .grid import (
    Grid,
    SpectralField,
    VecField,
    field_from_function,
    l2_norm,
    linf_norm,
    vertical_mean,
    zero_field,
)

CODE_VERSION = "0.1.0"

NSK_SERIES_COLUMNS = (
    "t",
    "e_internal", "e_cold", "e_kinetic", "e_capillary", "e_total",
    "diss_work", "diss_doubled",
    "bd_value", "bd_rate",
    "mass", "coriolis_work", "parity",
    "rho_dev_l2", "rho_dev_linf", "umax",
    "kr_div", "kr_v3", "kr_fluct", "kr_geo", "kr_transport",
)

QG_SERIES_COLUMNS = ("t", "energy", "umax")


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def worker_count():
    """Sweep parallelism, overridable through ROTCAP_WORKERS."""
    raw = os.environ.get("ROTCAP_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"ROTCAP_WORKERS must be an integer, got {raw!r}",
                          "ROTCAP_WORKERS")
    return max(1, n)


# -- configured object construction -----------------------------------------------


def build_grid(cfg):
    g = cfg["grid"]
    return Grid(g["nx"], g["ny"], g["nz"], dealias_fraction=g["dealias"])


def build_grid_h(cfg):
    g = cfg["grid"]
    return Grid(g["nx"], g["ny"], 1, dealias_fraction=g["dealias"])


def build_rotation(cfg):
    p = cfg["physics"]
    if p["rotation"] == "constant":
        return nsk.constant_rotation(p["rotation_value"])
    return nsk.smooth_nondegenerate_rotation()


def build_pressure(cfg):
    return nsk.PressureLaw(cfg["physics"]["gamma"])


def sim_params(cfg, eps):
    s = cfg["scheme"]
    return nsk.SimParams(
        eps=eps,
        nu=cfg["physics"]["nu"],
        dt=s["dt"],
        scheme=s["integrator"],
        rho_min=s["rho_min"],
        theta=s["theta"],
    )


# -- initial data ----------------------------------------------------------------------


def preset_datum(grid):
    """Fixed smooth ill-prepared datum: vertical structure, nonzero divergence.

    r0 mixes a column mode, a genuinely three-dimensional mode and a tilted
    horizontal mode; u0 has a rotational horizontal part plus a compressible
    correction and a parity-respecting vertical component, so none of the
    kernel constraints hold at t = 0.
    """
    r0 = field_from_function(
        grid,
        lambda a, b, c: 0.5 * np.cos(a)
        + 0.4 * np.cos(b) * np.cos(np.pi * c)
        + 0.25 * np.sin(a + b),
    )
    u1 = field_from_function(
        grid, lambda a, b, c: 0.3 * np.sin(b) + 0.1 * np.cos(a) + 0.0 * c
    )
    u2 = field_from_function(grid, lambda a, b, c: 0.3 * np.sin(a) + 0.0 * (b + c))
    u3 = field_from_function(
        grid, lambda a, b, c: 0.12 * np.sin(np.pi * c) * np.cos(a) + 0.0 * b
    )
    return r0, VecField(u1, u2, u3)


def qg_datum(cfg, grid_h, rotation):
    """Initial scalar for a standalone limit run, per the experiment block."""
    kind = cfg["experiment"]["datum"]
    if kind == "rest":
        return zero_field(grid_h)
    if kind == "single_mode":
        k1, k2 = cfg["experiment"]["mode"]
        amp = cfg["experiment"]["amplitude"]
        return field_from_function(
            grid_h, lambda a, b, c: amp * np.cos(k1 * a + k2 * b) + 0.0 * c
        )
    grid3 = build_grid(cfg)
    r0, u0 = preset_datum(grid3)
    axis = "constant" if rotation.is_constant else cfg["qg"]["axis"]
    return qg.reconstruct_limit_datum(r0, u0, rotation, axis)


# -- finite-eps simulation ------------------------------------------------------------


@dataclass
class NskRunResult:
    eps: float
    ok: bool
    abort_reason: str = ""
    series: dict = field(default_factory=dict)
    times: np.ndarray = None
    mean_r: list = field(default_factory=list)  # 2d fields at sample times
    ledger: object = None
    sup_rho_dev: float = float("nan")
    geo_final: float = float("nan")
    final_state: object = None
    wall_seconds: float = 0.0


def _nsk_sample(state, eps, nu, pressure, rotation):
    en = nsk.classical_energy(state, eps, pressure)
    dr = nsk.dissipation_rate(state, nu)
    bd = nsk.bd_entropy(state, nu)
    u = state.velocity(dealias=False)
    r_eps = (state.rho - 1.0) * (1.0 / eps)
    kr = qg.kernel_residual(r_eps, u, rotation)
    dev = state.rho - 1.0
    row = {
        "t": state.t,
        "e_internal": en["internal"],
        "e_cold": en["cold"],
        "e_kinetic": en["kinetic"],
        "e_capillary": en["capillary"],
        "e_total": en["total"],
        "diss_work": dr["work_form"],
        "diss_doubled": dr["doubled_form"],
        "bd_value": bd["value"],
        "bd_rate": nsk.bd_dissipation_rate(state, eps, nu, pressure),
        "mass": nsk.mass(state),
        "coriolis_work": nsk.coriolis_work(state, rotation, eps),
        "parity": state.parity_defect(),
        "rho_dev_l2": l2_norm(dev),
        "rho_dev_linf": linf_norm(dev),
        "umax": max(linf_norm(ui) for ui in u),
        "kr_div": kr["div_h"],
        "kr_v3": kr["vertical_component"],
        "kr_fluct": kr["vertical_fluctuation"],
        "kr_geo": kr["geostrophic_balance"],
        "kr_transport": kr["transport_compat"],
    }
    return row, vertical_mean(r_eps)


def simulate_nsk(cfg, eps, outdir=None):
    """Advance the finite-eps system to t_final, sampling diagnostics.

    Aborts (vacuum, CFL, solver) are caught and reported in the result, not
    raised, so sweep members cannot take each other down.
    """
    t0 = time.perf_counter()
    grid = build_grid(cfg)
    rotation = build_rotation(cfg)
    pressure = build_pressure(cfg)
    params = sim_params(cfg, eps)
    every = cfg["experiment"]["sample_every"]
    nsteps = int(round(cfg["scheme"]["t_final"] / params.dt))

    result = NskRunResult(eps=eps, ok=True)
    if cfg["experiment"]["datum"] == "rest":
        state = nsk.NskState(
            field_from_function(grid, lambda a, b, c: 1.0 + 0.0 * (a + b + c)),
            VecField(zero_field(grid), zero_field(grid), zero_field(grid)),
            0.0,
        )
    else:
        r0, u0 = preset_datum(grid)
        state = nsk.init_ill_prepared(r0, u0, eps, rho_min=params.rho_min)

    stepper = nsk.make_stepper(grid, params, rotation, pressure)
    rows = []
    try:
        row, mr = _nsk_sample(state, eps, params.nu, pressure, rotation)
        rows.append(row)
        result.mean_r.append(mr)
        for n in range(1, nsteps + 1):
            state = nsk.step(state, params, rotation, pressure, stepper)
            if n % every == 0 or n == nsteps:
                row, mr = _nsk_sample(state, eps, params.nu, pressure, rotation)
                rows.append(row)
                result.mean_r.append(mr)
    except (VacuumError, CflError, SolverError) as exc:
        result.ok = False
        result.abort_reason = f"{type(exc).__name__}: {exc}"

    result.series = {c: np.array([r[c] for r in rows]) for c in NSK_SERIES_COLUMNS}
    result.times = result.series["t"]
    result.final_state = state
    if result.ok and len(rows) >= 2:
        result.ledger = nsk.energy_ledger(
            result.series["t"],
            result.series["e_total"],
            result.series["diss_work"],
            result.series["bd_value"],
            result.series["bd_rate"],
        )
        result.sup_rho_dev = float(result.series["rho_dev_l2"].max())
        result.geo_final = float(result.series["kr_geo"][-1])
    result.wall_seconds = time.perf_counter() - t0

    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        spath = os.path.join(outdir, "series.csv")
        if os.path.exists(spath):
            os.remove(spath)
        for r in rows:
            diagio.append_series(spath, NSK_SERIES_COLUMNS, r)
        stack = np.stack([f.values[:, :, 0] for f in result.mean_r])
        diagio.write_snapshot(
            os.path.join(outdir, "mean_r.snap"),
            {"times": result.times, "mean_r": stack},
            meta={"eps": eps, "nx": grid.nx, "ny": grid.ny},
        )
        diagio.write_snapshot(
            os.path.join(outdir, "final_state.snap"),
            {
                "rho": state.rho.values,
                "m1": state.m[0].values,
                "m2": state.m[1].values,
                "m3": state.m[2].values,
            },
            meta={"t": state.t, "eps": eps},
        )
    return result


# -- limit simulation -------------------------------------------------------------------


@dataclass
class QgRunResult:
    axis: str
    ok: bool
    abort_reason: str = ""
    series: dict = field(default_factory=dict)
    times: np.ndarray = None
    traj: list = field(default_factory=list)
    final_r: object = None
    closed_form_error: float = float("nan")
    wall_seconds: float = 0.0


def simulate_qg(cfg, axis=None, outdir=None, datum=None, collect_traj=False):
    """Advance a limit equation to t_final on the horizontal grid.

    With a constant axis and a single-mode datum the result is compared
    against the closed-form decay of that mode, and the relative mismatch
    is reported per step.
    """
    t0 = time.perf_counter()
    axis = axis or cfg["qg"]["axis"]
    grid_h = build_grid_h(cfg)
    rotation = build_rotation(cfg)
    if axis == "constant" and not rotation.is_constant:
        rotation = nsk.constant_rotation(rotation.mean(grid_h))
    nu = cfg["physics"]["nu"]
    dt = cfg["scheme"]["dt"]
    every = cfg["experiment"]["sample_every"]
    nsteps = int(round(cfg["scheme"]["t_final"] / dt))

    r = datum if datum is not None else qg_datum(cfg, grid_h, rotation)
    state = qg.QgState(r.dealias(), 0.0)
    result = QgRunResult(axis=axis, ok=True)

    single = cfg["experiment"]["datum"] == "single_mode" and datum is None
    if single and axis == "constant":
        k1, k2 = cfg["experiment"]["mode"]
        kk = float(k1**2 + k2**2)
        rate = 0.5 * nu * kk**2 * (1.0 + kk) / (1.0 + kk + kk**2)
        c0 = state.r.coeffs.copy()
    else:
        rate = None

    def energy(rf):
        if axis == "constant":
            return qg.qg_energy_const(rf)
        return qg.qg_energy_var(rf, rotation)

    rows = [{"t": 0.0, "energy": energy(state.r), "umax": _qg_umax(state.r, rotation, axis)}]
    if collect_traj:
        result.traj.append(state.r)
    mismatch = 0.0
    try:
        for n in range(1, nsteps + 1):
            qg.check_cfl_qg(state.r, dt)
            if axis == "constant":
                state = qg.qg_step_const(state, nu, dt)
            else:
                state = qg.qg_step_var(state, rotation, nu, dt)
            if rate is not None:
                expect = c0 * np.exp(-rate * state.t)
                scale = float(np.abs(expect).max())
                err = float(np.abs(state.r.coeffs - expect).max()) / max(scale, 1e-300)
                mismatch = max(mismatch, err)
            if n % every == 0 or n == nsteps:
                rows.append({
                    "t": state.t,
                    "energy": energy(state.r),
                    "umax": _qg_umax(state.r, rotation, axis),
                })
                if collect_traj:
                    result.traj.append(state.r)
    except (CflError, SolverError) as exc:
        result.ok = False
        result.abort_reason = f"{type(exc).__name__}: {exc}"

    result.series = {c: np.array([r[c] for r in rows]) for c in QG_SERIES_COLUMNS}
    result.times = result.series["t"]
    result.final_r = state.r
    result.closed_form_error = mismatch if rate is not None else float("nan")
    result.wall_seconds = time.perf_counter() - t0

    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        spath = os.path.join(outdir, "series.csv")
        if os.path.exists(spath):
            os.remove(spath)
        for row in rows:
            diagio.append_series(spath, QG_SERIES_COLUMNS, row)
        diagio.write_snapshot(
            os.path.join(outdir, "final_r.snap"),
            {"r": state.r.values[:, :, 0]},
            meta={"t": state.t, "axis": axis},
        )
        if collect_traj:
            stack = np.stack([f.values[:, :, 0] for f in result.traj])
            diagio.write_snapshot(
                os.path.join(outdir, "traj.snap"),
                {"times": result.times, "r": stack},
                meta={"axis": axis},
            )
    return result


def _qg_umax(r, rotation, axis):
    from .grid import perp_grad

    X = qg.x_of(r)
    pg = perp_grad(X)
    if axis == "variable":
        cinv = qg._cinv_field(r.grid, rotation)
        return max(linf_norm((cinv * pg[0]).dealias()),
                   linf_norm((cinv * pg[1]).dealias()))
    return max(linf_norm(pg[0]), linf_norm(pg[1]))


# -- the epsilon sweep -----------------------------------------------------------------


def _member_window(cfg, eps, nsamples):
    w = cfg["experiment"]["window"]
    if w == 0:
        sample_dt = cfg["scheme"]["dt"] * cfg["experiment"]["sample_every"]
        w = int(round(10.0 * 2.0 * np.pi * eps / sample_dt))
    return int(np.clip(w, 1, max(1, nsamples // 3)))


def run_sweep(cfg, outdir):
    """Run simulate-nsk per eps plus the matching limit solve, then aggregate.

    Produces per-member run directories, a limit run directory, a summary
    dict (also written as summary.json) and a manifest indexing every output
    with its SHA-256.
    """
    eps_list = eps_values(cfg)
    if len(eps_list) < 3:
        raise ConfigError("a sweep needs at least 3 eps values", "physics.eps")
    os.makedirs(outdir, exist_ok=True)
    started = _now()
    t0 = time.perf_counter()

    rotation = build_rotation(cfg)
    axis = "constant" if rotation.is_constant else "variable"

    def member(e):
        return simulate_nsk(cfg, e, os.path.join(outdir, f"member_eps_{e:g}"))

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(member, eps_list))
    else:
        members = [member(e) for e in eps_list]

    grid3 = build_grid(cfg)
    r0, u0 = preset_datum(grid3)
    datum = qg.reconstruct_limit_datum(r0, u0, rotation, axis)
    limit = simulate_qg(cfg, axis=axis, outdir=os.path.join(outdir, "limit"),
                        datum=datum, collect_traj=True)

    summary = {
        "axis": axis,
        "eps": eps_list,
        "members": {},
        "checks": {},
        "complete": all(m.ok for m in members) and limit.ok,
    }

    # wall times go in the manifest only: summary.json is content-hashed and
    # must be identical across reruns of the same config
    for m in members:
        entry = {
            "ok": m.ok,
            "abort_reason": m.abort_reason,
        }
        if m.ok:
            s = m.series
            entry.update({
                "ledger_energy_ok": bool(m.ledger.energy_ok),
                "ledger_bd_ok": bool(m.ledger.bd_ok),
                "energy_residual_signed": m.ledger.energy_residual_signed,
                "bd_constant": m.ledger.bd_constant,
                "mass_drift": float(np.abs(s["mass"] - s["mass"][0]).max()
                                    / abs(s["mass"][0])),
                "coriolis_work_max": float(np.abs(s["coriolis_work"]).max()),
                "parity_max": float(s["parity"].max()),
                "sup_rho_dev_l2": m.sup_rho_dev,
                "geo_residual_final": m.geo_final,
            })
        summary["members"][f"{m.eps:g}"] = entry

    good = [m for m in members if m.ok]
    checks = summary["checks"]

    if len(good) >= 3:
        pairs = [(m.eps, m.sup_rho_dev) for m in good]
        if all(y > 0 for _x, y in pairs):
            fit = diagio.slope_fit(pairs)
            checks["rho_dev_slope"] = {
                "value": fit.slope,
                "target": 1.0,
                "tol": 0.2,
                "passed": bool(abs(fit.slope - 1.0) <= 0.2),
            }
        else:
            checks["rho_dev_slope"] = {
                "value": 0.0, "target": 1.0, "tol": 0.2,
                "passed": True, "note": "rest data, all deviations zero",
            }

        geo = [m.geo_final for m in good]  # eps decreasing along the list
        if max(geo) == 0.0:
            mono = True
        else:
            mono = all(geo[i + 1] <= 1.5 * geo[i] for i in range(len(geo) - 1))
        checks["geo_residual_trend"] = {
            "values": geo,
            "passed": bool(mono),
        }

    if limit.ok and good:
        fc_avgs = {}
        for m in good:
            rep = diagio.filtered_compare(
                m.times, m.mean_r, limit.times, limit.traj,
                filter_level=cfg["experiment"]["filter_level"],
                window=_member_window(cfg, m.eps, m.times.size),
            )
            fc_avgs[f"{m.eps:g}"] = rep.smoothed_time_average
            summary["members"][f"{m.eps:g}"]["filtered_distance"] = {
                "raw_time_average": rep.raw_time_average,
                "smoothed_time_average": rep.smoothed_time_average,
                "window": rep.window,
            }
        vals = [fc_avgs[f"{m.eps:g}"] for m in good]
        if len(vals) >= 2:
            checks["filtered_compare_trend"] = {
                "values": vals,
                "passed": bool(vals[-1] < vals[0] or max(vals) == 0.0),
            }

    checks["ledgers"] = {
        "passed": bool(good) and all(m.ledger.passed() for m in good),
    }
    summary["passed"] = bool(
        summary["complete"] and all(c.get("passed", False) for c in checks.values())
    )

    import json

    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    manifest = diagio.RunManifest(
        config=cfg,
        code_version=CODE_VERSION,
        seed=cfg["seed"],
        started=started,
        finished=_now(),
        wall_seconds=time.perf_counter() - t0,
        notes={
            "axis": axis,
            "passed": summary["passed"],
            "member_wall_seconds": {
                f"{m.eps:g}": round(m.wall_seconds, 3) for m in members
            },
            "limit_wall_seconds": round(limit.wall_seconds, 3),
        },
    )
    for root, _dirs, files in os.walk(outdir):
        for name in sorted(files):
            if name == "manifest.json":
                continue
            rel = os.path.relpath(os.path.join(root, name), outdir)
            manifest.add_output(outdir, rel)
    manifest.write(os.path.join(outdir, "manifest.json"))
    return summary, manifest


# -- analysis passes -------------------------------------------------------------------


def lp_analysis(outdir=None):
    """Partition and reconstruction defects plus block energies, small grids."""
    rows = []
    for label, grid in (
        ("1d_256", Grid(256)),
        ("2d_64", Grid(64, 64)),
        ("3d_32x8", Grid(32, 32, 8)),
    ):
        corpus = zygmund.corpus(grid)
        defect = lp.partition_defect(grid)
        for name, f in corpus.items():
            energies = lp.block_energies(f)
            rows.append({
                "grid": label,
                "field": name,
                "partition_defect": defect,
                "reconstruction_defect": lp.reconstruction_defect(f),
                "block_l2_max": max(energies.values()) if energies else 0.0,
            })
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        path = os.path.join(outdir, "lp_report.csv")
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    worst = max(max(r["partition_defect"], r["reconstruction_defect"]) for r in rows)
    return rows, worst


def commutator_suite(outdir=None, seed=1234):
    """Decay-rate verification on the built-in corpus; returns report rows.

    The 1024-point line keeps the full lambda ladder 4..256 resolvable: the
    transition band of the largest cutoff must sit inside the retained
    spectrum, or the commutator degenerates to zero.
    """
    grid = Grid(1024)
    corpus = zygmund.corpus(grid)
    mu_log = zygmund.log_modulus()

    reports = [
        ("tent", zygmund.verify_commutator_decay(corpus["tent"], "lipschitz", seed=seed)),
        ("mode_1", zygmund.verify_commutator_decay(corpus["mode_1"], "lipschitz", seed=seed)),
        ("constant", zygmund.verify_commutator_decay(corpus["constant"], "const", seed=seed)),
        # the Weierstrass member must carry detail below 1/max(lambda), so
        # its truncation level matches the top of the ladder
        ("weierstrass_8", zygmund.verify_commutator_decay(
            corpus["weierstrass_8"], "zygmund", mu=zygmund.linear_modulus(), seed=seed)),
        ("weierstrass_8_log", zygmund.verify_commutator_decay(
            corpus["weierstrass_8"], "cmu", mu=mu_log, seed=seed)),
        ("tent_mixed", zygmund.verify_commutator_decay(
            corpus["tent"], "mixed", p=(1.0, 2.0), seed=seed)),
    ]

    rows = []
    for name, rep in reports:
        rows.append({
            "field": name,
            "regularity": rep.regularity,
            "p_in": rep.p_in,
            "p_out": rep.p_out,
            "fitted_slope": rep.fitted_slope,
            "constant_spread": rep.constant_spread(),
            "passed": "" if rep.passed is None else str(bool(rep.passed)),
        })
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        import csv

        with open(os.path.join(outdir, "commutator_rates.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    ok = all(rep.passed for _n, rep in reports if rep.passed is not None)
    return rows, ok


def reconstruct_datum_run(cfg, outdir):
    """Compute and persist the limit datum for the configured rotation."""
    grid3 = build_grid(cfg)
    rotation = build_rotation(cfg)
    axis = "constant" if rotation.is_constant else cfg["qg"]["axis"]
    r0, u0 = preset_datum(grid3)
    datum = qg.reconstruct_limit_datum(r0, u0, rotation, axis)
    os.makedirs(outdir, exist_ok=True)
    diagio.write_snapshot(
        os.path.join(outdir, "datum.snap"),
        {"r": datum.values[:, :, 0]},
        meta={"axis": axis, "l2": l2_norm(datum)},
    )
    return {"axis": axis, "l2": l2_norm(datum), "linf": linf_norm(datum)}


def diagnose_run(run_dir):
    """Re-hash a finished run directory against its manifest and re-check
    the energy ledger from the stored series. Returns (ok, messages)."""
    mpath = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(mpath):
        return False, [f"no manifest at {mpath}"]
    manifest = diagio.read_manifest(mpath)
    msgs = []
    ok = True
    for rel, entry in sorted(manifest["outputs"].items()):
        full = os.path.join(run_dir, rel)
        if not os.path.exists(full):
            ok = False
            msgs.append(f"missing output {rel}")
            continue
        digest = diagio.sha256_file(full)
        if digest != entry["sha256"]:
            ok = False
            msgs.append(f"hash mismatch for {rel}")
    msgs.append(f"{len(manifest['outputs'])} outputs checked")

    for rel in sorted(manifest["outputs"]):
        if rel.endswith("series.csv") and "member" in rel:
            series = diagio.read_series(os.path.join(run_dir, rel))
            if series["t"].size < 2:
                continue
            ledger = nsk.energy_ledger(
                series["t"], series["e_total"], series["diss_work"],
                series["bd_value"], series["bd_rate"],
            )
            tag = "ok" if ledger.passed() else "VIOLATED"
            msgs.append(f"{rel}: ledger {tag} "
                        f"(energy residual {ledger.energy_residual_signed:+.2e})")
            ok = ok and ledger.passed()
    return ok, msgs
