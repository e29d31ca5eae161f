"""
Command-line pipelines: simulate -> trace -> monitor -> lambda -> scaling
-> report.

    axieuler simulate --config cfg.json [--out DIR]
    axieuler trace    --config cfg.json --snapshots DIR [--out DIR]
    axieuler monitor  --config cfg.json --snapshots DIR [--out DIR]
    axieuler lambda   --config cfg.json [--snapshots DIR] [--out DIR]
    axieuler scaling  --config cfg.json --series CSV [--out DIR]
    axieuler report   --run DIR [--out DIR]

Exit codes: 0 success, 2 configuration/validation error, 3 runtime error.
Each run directory gets a manifest (config echo plus content hashes of
every output) so reruns are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .fields import AxiEulerError, NormSpec, vorticity, weighted_norm
from .euler import analytic_flow, kinetic_energy, run as run_flow
from .io import (
    ConfigError,
    FormatError,
    RunConfig,
    load_config,
    load_snapshot_dir,
    read_csv_numeric,
    write_csv,
    write_manifest,
    write_snapshot,
)


def _out_dir(args, config: RunConfig, default: str) -> Path:
    out = args.out or config.out_dir or default
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _initial_state(config: RunConfig):
    return analytic_flow(config.flow_name, config.grid, **config.flow_params)


def _pick_dt(config: RunConfig, state) -> float:
    if config.dt is not None:
        return config.dt
    g = config.grid
    speed = max(state.max_speed(), np.abs(state.u.utheta.values).max(), 1e-6)
    return config.solver.cfl * min(g.dr, g.dz) / speed


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config, "run_simulate")
    state = _initial_state(config)
    dt = _pick_dt(config, state)
    rows = []
    counter = [0]

    def diag_row(s):
        rows.append((s.t, kinetic_energy(s),
                     weighted_norm(s.gamma, NormSpec(np.inf)),
                     weighted_norm(s.gamma, NormSpec(2.0)),
                     weighted_norm(
                         type(s.u).from_arrays(s.grid, *(f.values for f in
                                                         vorticity(s.u))),
                         NormSpec(np.inf))))

    def callback(s):
        diag_row(s)
        if counter[0] % config.snapshot_stride == 0:
            write_snapshot(out / f"snapshot_{counter[0]:06d}.axeu", s)
        counter[0] += 1

    final = run_flow(state, config.solver, config.t_final, dt,
                     callback=callback)
    if (counter[0] - 1) % config.snapshot_stride != 0:
        write_snapshot(out / f"snapshot_{counter[0] - 1:06d}.axeu", final)
    write_csv(out / "diagnostics.csv", "diagnostics", rows)
    write_manifest(out, config.raw)
    print(f"simulate: t={final.t:g}, {counter[0]} steps, output in {out}")
    return 0


def _provider_from_args(args, config: RunConfig):
    from .providers import SnapshotProvider
    states = load_snapshot_dir(args.snapshots)
    return SnapshotProvider(states), states


def cmd_trace(args) -> int:
    from .bichar import beta_sigma, conserved_audit, ensemble_seeds, \
        integrate_bundle, make_bundle

    config = load_config(args.config)
    out = _out_dir(args, config, "run_trace")
    provider, states = _provider_from_args(args, config)
    sigma = args.sigma if args.sigma is not None else config.sigma_list[0]
    T = args.T if args.T is not None else min(config.t_final,
                                              provider.t_max)
    if not provider.steady and T > provider.t_max + 1e-12:
        raise ConfigError(
            f"snapshots cover [0, {provider.t_max:g}], requested T={T:g}")
    ens = config.ensemble
    seeds = ensemble_seeds(config.grid, ens["n_x"], ens["n_xi"], sigma,
                           r_min_seed=ens["r_min_seed"])
    res = beta_sigma(seeds, provider, sigma, T, dt=ens["dt"],
                     record_every=ens["record_every"])
    rows = [(t, b, br, res.argmax_position[0], res.argmax_position[1],
             float(res.reflections))
            for t, b, br in zip(res.times, res.series, res.running)]
    write_csv(out / "beta.csv", "growth_beta", rows)

    # Conservation audit along the arg-max seed plus a small frame bundle.
    seed = res.argmax_seed
    bundle = make_bundle([seed], provider=provider, with_omega=True,
                         with_volume_frame=True)
    recs = integrate_bundle(bundle, provider, T, ens["dt"],
                            record_every=ens["record_every"])
    audit = conserved_audit(recs)
    traj_rows = []
    for rec in recs:
        bdotxi = abs(rec.b[0, 0] * rec.xi[0, 0] + rec.b[0, 2] * rec.xi[0, 1])
        rbt0 = recs[0].pos[0, 0] * recs[0].b[0, 1]
        rbt = rec.pos[0, 0] * rec.b[0, 1]
        slack = audit.details.get("xi_lower_slack", 0.0)
        traj_rows.append((rec.t, rec.pos[0, 0], rec.pos[0, 1],
                          rec.xi[0, 0], rec.xi[0, 1], rec.b[0, 0],
                          rec.b[0, 1], rec.b[0, 2], bdotxi,
                          abs(rbt - rbt0) / max(abs(rbt0), 1e-300), slack))
    write_csv(out / "trajectory_argmax.csv", "trajectory", traj_rows)
    write_manifest(out, config.raw)
    print(f"trace: beta_sigma({sigma:g}, T={T:g}) >= {res.value:.6g} "
          f"(argmax at r={res.argmax_position[0]:.3g}, "
          f"z={res.argmax_position[1]:.3g}); worst audit drift "
          f"{audit.worst():.3e}; output in {out}")
    return 0


def cmd_monitor(args) -> int:
    from .criteria import (CriterionLedger, CriterionParams, accumulate,
                           bkm_toroidal_integrand, generalized_integrand)

    config = load_config(args.config)
    out = _out_dir(args, config, "run_monitor")
    crit = config.diagnostics.get("criterion", {})
    a = args.a if args.a is not None else crit.get("a", 0.5)
    b = args.b if args.b is not None else crit.get("b", 0.5)
    try:
        params = CriterionParams(a=a, b=b, s=crit.get("s", 4.0),
                                 q=crit.get("q"))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    states = load_snapshot_dir(args.snapshots)
    ledger = CriterionLedger()
    for st in states:
        wr, _, wz = vorticity(st.u)
        bkm = bkm_toroidal_integrand(wr, wz)
        ir, iz = generalized_integrand(wr, wz, params)
        ledger = accumulate(ledger, st.t, bkm, ir, iz)
    rows = [(t, bk, gr, gz, ru, ledger.verdict())
            for t, bk, gr, gz, ru in zip(ledger.times, ledger.bkm,
                                         ledger.gen_r, ledger.gen_z,
                                         ledger.running)]
    write_csv(out / "criterion.csv", "criterion_ledger", rows)
    write_manifest(out, config.raw)
    print(f"monitor: a={a:g} b={b:g} theta={params.theta:g} "
          f"(swirl integrability bound q < {params.q_bound:g}); "
          f"{ledger.verdict()}; output in {out}")
    return 0


def cmd_lambda(args) -> int:
    from .bichar import beta_sigma, ensemble_seeds
    from .linstab import build_wkb, lambda_estimate, make_wkb_data
    from .providers import SnapshotProvider

    config = load_config(args.config)
    out = _out_dir(args, config, "run_lambda")
    p = args.p if args.p is not None else config.p_list[0]
    sigma = args.sigma if args.sigma is not None else config.sigma_list[0]
    spec = NormSpec(p, sigma, "three_d")
    if not spec.sigma_in_growth_window():
        raise ConfigError(
            f"sigma={sigma} outside (-2/p', 2/p) for p={p}")
    if args.snapshots:
        provider, _ = _provider_from_args(args, config)
    else:
        state = _initial_state(config)
        from .euler import run as _run
        states = [state]
        dt0 = _pick_dt(config, state)
        _run(state, config.solver, config.t_final, dt0,
             callback=lambda s: states.append(s) if s.t > states[-1].t
             else None)
        kept = states[::config.snapshot_stride]
        if kept[-1].t < states[-1].t:
            kept.append(states[-1])
        provider = SnapshotProvider(kept)
    T = args.T if args.T is not None else min(config.t_final, provider.t_max)
    ens = config.ensemble
    seeds = ensemble_seeds(config.grid, ens["n_x"], ens["n_xi"], sigma,
                           r_min_seed=ens["r_min_seed"])
    beta = beta_sigma(seeds, provider, sigma, T, dt=ens["dt"],
                      record_every=ens["record_every"])

    g = config.grid
    delta = config.wkb["delta"] or 10 * g.dr
    seed = beta.argmax_seed
    b_dir = seed.b0 / np.linalg.norm(seed.b0)
    initial_set = []
    for eps in config.wkb["eps"]:
        data = make_wkb_data(g, tuple(seed.x0), seed.xi0, b_dir, sigma, eps,
                             delta, spec)
        initial_set.append(build_wkb(data, g))
    dt_lin = args.dt if args.dt is not None else _pick_dt(
        config, _initial_state(config)) * 0.5
    lam = lambda_estimate(provider, spec, initial_set, T, dt_lin)
    t_lam, ratio = lam.series()
    write_csv(out / "lambda.csv", "growth_lambda", list(zip(t_lam, ratio)))
    for i, m in enumerate(lam.members):
        write_csv(out / f"growth_member_{i:02d}.csv", "growth_member",
                  list(zip(m.times, m.norms / m.norms[0], m.norms)))
    beta_on_t = np.interp(t_lam, beta.times, beta.running)
    rows = [(t, bb, ll, ll * 1.05 - bb)
            for t, bb, ll in zip(t_lam, beta_on_t, ratio)]
    write_csv(out / "beta_lambda.csv", "beta_lambda", rows)
    margin = lam.value * 1.05 - beta.value
    write_manifest(out, config.raw)
    verdict = "pass" if beta.value <= lam.value * 1.05 else "fail"
    print(f"lambda: beta={beta.value:.6g} lambda>={lam.value:.6g} "
          f"margin={margin:.3g} [{verdict}]; output in {out}")
    return 0


def cmd_scaling(args) -> int:
    from .selfsim import (ScalingParams, blowup_fit, lambda_scaled,
                          threshold_corollary, threshold_luo_hou)

    config = load_config(args.config)
    out = _out_dir(args, config, "run_scaling")
    sc = config.scaling
    if not sc:
        raise ConfigError(f"{args.config}: scaling section missing")
    params = ScalingParams(alpha=sc.get("alpha", 1.0),
                           beta=sc.get("beta", 1.0),
                           t_star=sc.get("t_star", 1.0),
                           p=sc.get("p", 2.0),
                           center_path=tuple(sc.get("center", (0.0, 0.0))))
    try:
        cols, data = read_csv_numeric(args.series, "growth_lambda")
    except FormatError as e:
        raise ConfigError(str(e)) from e
    t = data[:, 0]
    lam = data[:, 1]
    if np.any(t >= params.t_star):
        bad = int(np.argmax(t >= params.t_star))
        raise ConfigError(
            f"{args.series}: row {bad + 3}: t={t[bad]:g} not below "
            f"t_star={params.t_star:g}")
    Lam = lambda_scaled(t, lam, params)
    thr = float(threshold_corollary(params.p))
    ratio = params.ratio()
    verdict = ("amplifying-regime" if ratio < thr else "stable-regime")
    prof = sc.get("profile_inf_norm", 0.0)
    rows = [(tt, ll, LL, prof, thr, verdict) for tt, ll, LL in
            zip(t, lam, Lam)]
    write_csv(out / "scaling.csv", "scaling", rows)
    fit = blowup_fit(t, lam)
    write_manifest(out, config.raw)
    lh = float(threshold_luo_hou(params.p))
    print(f"scaling: alpha/beta={ratio:g} vs threshold {thr:g} "
          f"[{verdict}]; balance threshold beta > {lh:g}; "
          f"fit status {fit.status}; output in {out}")
    return 0


def cmd_report(args) -> int:
    from .report import render_run
    figures = render_run(Path(args.run), Path(args.out) if args.out else None)
    print(f"report: wrote {len(figures)} figure(s)")
    for f in figures:
        print(f"  {f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="axieuler",
        description="Axisymmetric Euler laboratory: simulation, amplitude "
                    "tracing, criterion monitoring, growth estimation, and "
                    "scaling diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra):
        p = sub.add_parser(name)
        p.set_defaults(fn=fn)
        if extra.get("config", True):
            p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        return p

    add("simulate", cmd_simulate)
    p = add("trace", cmd_trace)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--T", type=float, default=None)
    p = add("monitor", cmd_monitor)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p = add("lambda", cmd_lambda)
    p.add_argument("--snapshots", default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p = add("scaling", cmd_scaling)
    p.add_argument("--series", required=True)
    p = sub.add_parser("report")
    p.set_defaults(fn=cmd_report)
    p.add_argument("--run", required=True)
    p.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (AxiEulerError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
