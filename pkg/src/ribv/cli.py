"""Batch entry points: solve, sweep, reparam, check-gronwall, selftest.

Every output file is byte-deterministic: floats are written with
shortest round-trip repr and all iteration orders are fixed, so a
config (plus seed, where randomness is involved) pins the bytes.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import RunConfig
from .constitutive import energy, energy_gradients
from .discretization import Grid, State, initial_state, \
    nonlocal_double_sum, tensor_norm
from .dissipation import (
    dist_r,
    norm_p_l1,
    norm_p_l2,
    norm_u_h1,
    prox_plastic,
)
from .driver import Trajectory, run_viscous
from .gronwall import (
    GronwallInstance,
    check_gronwall_affine,
    check_gronwall_classic,
    check_gronwall_viscous,
    viscous_hypotheses,
)
from .problems import ramp_loading
from .reparam import (
    bv_sweep,
    detect_jumps,
    recover_switching,
    reparam_ed,
    reparam_standard,
)

CSV_COLUMNS = ("step", "t", "s_std", "s_ed", "E_mu", "N_value", "power",
               "balance_residual", "min_z", "dual_u", "dist_z", "dist_p",
               "dnu", "dstar", "norm_u_H1", "norm_p_L1", "norm_p_L2",
               "norm_e_L2", "iterations", "accepted")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _write_kv(path, pairs):
    _write_lines(path, [f"{k} = {_fmt(v) if not isinstance(v, str) else v}"
                        for k, v in pairs])


def trajectory_rows(traj: Trajectory, ops, ptraj_std, ptraj_ed):
    """Assemble the fixed-order per-step diagnostic rows."""
    from .discretization import eval_loading, total_strain

    rows = []
    for k in range(len(traj.times)):
        st = traj.states[k]
        dd = traj.dual_diag[k]
        w, _, _, _ = eval_loading(traj.loading, traj.times[k])
        e = total_strain(ops.B, st, w)
        rows.append((
            k, traj.times[k], ptraj_std.s[k], ptraj_ed.s[k],
            traj.E_mu[k], traj.N_value[k], traj.power[k],
            traj.balance_residual_cum[k], float(st.z.min()),
            dd.dual_u, dd.dist_z, dd.dist_p, traj.dnu[k], dd.d_nu_star,
            norm_u_h1(ops, st.u), norm_p_l1(ops.grid, st.p),
            norm_p_l2(ops.grid, st.p), norm_p_l2(ops.grid, e),
            int(traj.iterations[k]), bool(traj.accepted[k]),
        ))
    return rows


def write_trajectory_csv(path, rows):
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    _write_lines(path, lines)


def _solve_from_config(cfg: RunConfig):
    grid, mat, ops, ep, loading, init = cfg.build()
    traj = run_viscous(ops, mat, ep, loading, init,
                       n_steps=cfg.n_steps, tol_stat=cfg.tol_stat,
                       max_iter=cfg.max_iter)
    return grid, mat, ops, ep, loading, traj


def cmd_solve(cfg: RunConfig, out_dir: str) -> int:
    _, _, ops, ep, _, traj = _solve_from_config(cfg)
    ptraj_std = reparam_standard(traj, ops)
    ptraj_ed = reparam_ed(traj, ops, ed_dnu_args=cfg.ed_dnu_args)
    rows = trajectory_rows(traj, ops, ptraj_std, ptraj_ed)
    write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), rows)
    _write_kv(os.path.join(out_dir, "summary.txt"), [
        ("command", "solve"),
        ("eps", ep.eps), ("nu", ep.nu), ("mu", ep.mu),
        ("n_steps", traj.n_steps), ("t_final", ep.t_final),
        ("aborted_at", -1 if traj.aborted_at is None else traj.aborted_at),
        ("z_floor_hit", traj.z_floor_hit),
        ("final_energy", traj.E_mu[-1]),
        ("max_balance_residual", float(traj.balance_residual_cum.max())),
        ("min_z", float(min(st.z.min() for st in traj.states))),
        ("total_length_std", float(ptraj_std.s[-1])),
        ("total_length_ed", float(ptraj_ed.s[-1])),
        ("total_iterations", int(traj.iterations.sum())),
    ])
    return 0 if traj.aborted_at is None else 1


def cmd_reparam(cfg: RunConfig, out_dir: str) -> int:
    _, _, ops, ep, _, traj = _solve_from_config(cfg)
    p_std = reparam_standard(traj, ops)
    p_ed = reparam_ed(traj, ops, ed_dnu_args=cfg.ed_dnu_args)
    lams, resid = recover_switching(p_std, ops)
    header = ("step,s_std,s_ed,t,t_rate_std,t_rate_ed,norm_std,norm_ed,"
              "jump_std,jump_ed,lambda,switch_residual")
    lines = [header]
    for k in range(p_std.n_knots):
        jump_s = bool(k > 0 and p_std.t_rate[k] < cfg.tol_jump)
        jump_e = bool(k > 0 and p_ed.t_rate[k] < cfg.tol_jump)
        lines.append(",".join(_fmt(x) for x in (
            k, p_std.s[k], p_ed.s[k], p_std.t[k], p_std.t_rate[k],
            p_ed.t_rate[k], p_std.normalization[k], p_ed.normalization[k],
            jump_s, jump_e, lams[k], resid[k])))
    _write_lines(os.path.join(out_dir, "reparam.csv"), lines)

    jumps_std = detect_jumps(p_std, cfg.tol_jump)
    jumps_ed = detect_jumps(p_ed, cfg.tol_jump)
    dev_std = float(np.abs(p_std.normalization[1:] - 1.0).max()) \
        if p_std.n_knots > 1 else 0.0
    dev_ed = float(np.abs(p_ed.normalization[1:] - 1.0).max()) \
        if p_ed.n_knots > 1 else 0.0
    _write_kv(os.path.join(out_dir, "summary.txt"), [
        ("command", "reparam"),
        ("eps", ep.eps), ("nu", ep.nu), ("mu", ep.mu),
        ("n_steps", traj.n_steps),
        ("total_length_std", float(p_std.s[-1])),
        ("total_length_ed", float(p_ed.s[-1])),
        ("max_normalization_deviation_std", dev_std),
        ("max_normalization_deviation_ed", dev_ed),
        ("n_jump_intervals_std", len(jumps_std)),
        ("n_jump_intervals_ed", len(jumps_ed)),
        ("jump_intervals_std",
         ";".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in jumps_std)),
        ("jump_intervals_ed",
         ";".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in jumps_ed)),
        ("max_switch_residual", float(resid[1:].max())
         if len(resid) > 1 else 0.0),
    ])
    return 0


def cmd_sweep(cfg: RunConfig, out_dir: str,
              level_parallelism: int = 1) -> int:
    grid, mat, ops, ep, loading, init = cfg.build()
    report = bv_sweep(ops, mat, loading, init, cfg.regime, cfg.ladder(),
                      n_steps=cfg.n_steps, t_final=cfg.t_final,
                      tol_stat=cfg.tol_stat, tol_jump=cfg.tol_jump,
                      stab_tol_factor=cfg.stab_tol_factor,
                      level_parallelism=level_parallelism)
    header = ("level,eps,nu,mu,max_stability_nonjump,ed_balance_residual,"
              "contact_integral,total_length,min_z,n_jump_intervals,"
              "dist_to_next")
    lines = [header]
    for i, lv in enumerate(report.levels):
        dist = report.pairwise_sup_distance[i] \
            if i < len(report.pairwise_sup_distance) else float("nan")
        lines.append(",".join(_fmt(x) for x in (
            i, lv.params[0], lv.params[1], lv.params[2],
            lv.max_stability_nonjump, lv.ed_balance_residual,
            lv.contact_integral, lv.total_length, lv.min_z,
            len(lv.jump_intervals), dist)))
    _write_lines(os.path.join(out_dir, "sweep.csv"), lines)

    stabs = [lv.max_stability_nonjump for lv in report.levels]
    ratios = [a / b if b > 0 else float("inf")
              for a, b in zip(stabs, stabs[1:])]
    _write_kv(os.path.join(out_dir, "summary.txt"), [
        ("command", "sweep"),
        ("regime", report.regime),
        ("n_levels", len(report.levels)),
        ("n_steps", cfg.n_steps),
        ("stability_values", ";".join(_fmt(x) for x in stabs)),
        ("stability_decay_ratios", ";".join(_fmt(x) for x in ratios)),
        ("pairwise_sup_distances",
         ";".join(_fmt(x) for x in report.pairwise_sup_distance)),
        ("min_stability_decay_ratio",
         min(ratios) if ratios else float("inf")),
    ])
    return 0


# ---------------------------------------------------------------------------
# gronwall instance files
# ---------------------------------------------------------------------------

_GRON_SEQ = ("a", "b", "c", "r", "M")
_GRON_SCALAR = ("B", "Lam", "lam", "b_const", "eta", "rho", "kappa1",
                "kappa2", "tau", "eps")


def parse_gronwall_instances(text: str) -> list[GronwallInstance]:
    """Instance file: blocks of `key = value` lines separated by `---`
    lines.  Sequences are comma-separated, `lemma` picks the checker."""
    blocks = [[]]
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if set(line) == {"-"}:
            blocks.append([])
            continue
        blocks[-1].append(line)
    out = []
    for blk in blocks:
        if not blk:
            continue
        kw = {}
        for line in blk:
            if "=" not in line:
                raise ValueError(f"expected 'key = value', got {line!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key == "lemma":
                kw["lemma"] = val
            elif key in _GRON_SEQ:
                kw[key] = np.array([float(x) for x in val.split(",")])
            elif key in _GRON_SCALAR:
                kw[key] = float(val)
            else:
                raise ValueError(f"unknown instance key {key!r}")
        if kw.get("lemma") not in ("classic", "affine", "viscous"):
            raise ValueError("each instance needs lemma = classic | "
                             "affine | viscous")
        out.append(GronwallInstance(**kw))
    return out


def cmd_check_gronwall(instance_path: str, out_dir: str) -> int:
    with open(instance_path, "r", encoding="utf-8") as fh:
        instances = parse_gronwall_instances(fh.read())
    lines = []
    n_fail = 0
    for i, inst in enumerate(instances):
        if inst.lemma == "classic":
            hyp_ok, _, holds = check_gronwall_classic(inst)
            msgs = [] if hyp_ok else ["hypotheses violated"]
        elif inst.lemma == "affine":
            hyp_ok, _, holds = check_gronwall_affine(inst)
            msgs = [] if hyp_ok else ["hypotheses violated"]
        else:
            hyp_ok, msgs = viscous_hypotheses(inst)
            _, _, holds = check_gronwall_viscous(inst)
        # vacuous truth: an instance violating the hypotheses cannot
        # witness a failure of the lemma
        fail = hyp_ok and not holds
        n_fail += fail
        status = "FAIL" if fail else "PASS"
        detail = "" if not msgs else " [" + "; ".join(msgs) + "]"
        lines.append(f"instance {i}: lemma={inst.lemma} "
                     f"hypotheses={'ok' if hyp_ok else 'violated'} "
                     f"bound={'holds' if holds else 'violated'} "
                     f"{status}{detail}")
    lines.append(f"checked {len(instances)} instances, {n_fail} failures")
    _write_lines(os.path.join(out_dir, "gronwall_report.txt"), lines)
    for line in lines:
        print(line)
    return 1 if n_fail else 0


# ---------------------------------------------------------------------------
# selftest: quick seeded brute-force oracles
# ---------------------------------------------------------------------------

def _selftest_gradients(rng) -> tuple[bool, str]:
    from .problems import reference_material
    grid = Grid(3)
    mat = reference_material()
    from .constitutive import Operators
    ops = Operators.build(grid, mat)
    loading = ramp_loading(grid, amplitude=0.3)
    worst = 0.0
    for _ in range(20):
        st = State(u=rng.normal(0, 0.05, (grid.n_nodes, 2)),
                   z=rng.uniform(0.6, 0.95, grid.n_nodes),
                   p=rng.normal(0, 0.05, (grid.n_cells, 3)))
        st.u[grid.dirichlet_mask] = 0.0
        t = rng.uniform(0.2, 0.8)
        g_u, g_z, g_p = energy_gradients(t, st, ops, mat, 0.1, loading)
        h = 1e-6
        for _ in range(3):
            du = np.zeros(2 * grid.n_nodes)
            j = rng.integers(len(grid.free_dofs))
            du[grid.free_dofs[j]] = h
            stp = st.copy()
            stm = st.copy()
            stp.u = (st.u.ravel() + du).reshape(-1, 2)
            stm.u = (st.u.ravel() - du).reshape(-1, 2)
            fd = (energy(t, stp, ops, mat, 0.1, loading)
                  - energy(t, stm, ops, mat, 0.1, loading)) / (2 * h)
            worst = max(worst, abs(fd - g_u[j]) / max(1.0, abs(g_u[j])))
        i = rng.integers(grid.n_nodes)
        stp, stm = st.copy(), st.copy()
        stp.z = st.z.copy()
        stp.z[i] += h
        stm.z = st.z.copy()
        stm.z[i] -= h
        fd = (energy(t, stp, ops, mat, 0.1, loading)
              - energy(t, stm, ops, mat, 0.1, loading)) / (2 * h)
        worst = max(worst, abs(fd - grid.lump[i] * g_z[i])
                    / max(1.0, abs(g_z[i])))
    ok = worst < 1e-5
    return ok, f"energy gradient vs central differences: rel err {worst:.2e}"


def _selftest_prox(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(50):
        p_prev = rng.normal(0, 1, 3)
        p_prev[1] = -p_prev[0]
        ebar = rng.normal(0, 1, 3)
        ebar[1] = -ebar[0]
        a, b, mu_w, c_q = rng.uniform(0.01, 2.0, 4)

        def obj(pi):
            d = pi - p_prev
            return (a * tensor_norm(d[None])[0]
                    + 0.5 * b * tensor_norm(d[None])[0] ** 2
                    + 0.5 * mu_w * tensor_norm(pi[None])[0] ** 2
                    + 0.5 * c_q * tensor_norm((ebar - pi)[None])[0] ** 2)

        pi_star = prox_plastic(p_prev[None], ebar[None],
                               np.array([a]), np.array([b]),
                               np.array([mu_w]), np.array([c_q]))[0]
        f_star = obj(pi_star)
        for _ in range(60):
            step = rng.normal(0, rng.uniform(1e-4, 0.5), 3)
            step[1] = -step[0]
            worst = max(worst, f_star - obj(pi_star + step))
    ok = worst < 1e-10
    return ok, f"plastic proximal map vs random competitors: " \
               f"max excess {worst:.2e}"


def _selftest_nonlocal(rng) -> tuple[bool, str]:
    from .constitutive import Operators
    from .problems import reference_material
    grid = Grid(3)
    mat = reference_material()
    ops = Operators.build(grid, mat)
    worst = 0.0
    for _ in range(10):
        z1 = rng.uniform(0.2, 1.0, grid.n_nodes)
        z2 = rng.uniform(0.2, 1.0, grid.n_nodes)
        quad = z1 @ ops.A_m @ z2
        brute = nonlocal_double_sum(grid, mat.m_order, z1, z2)
        worst = max(worst, abs(quad - brute) / max(1.0, abs(brute)))
    ok = worst < 1e-12
    return ok, f"nonlocal form vs brute-force double sum: " \
               f"rel err {worst:.2e}"


def _selftest_dist(rng) -> tuple[bool, str]:
    grid = Grid(3)
    worst = 0.0
    for _ in range(30):
        chi = rng.normal(0, 0.1, grid.n_nodes)
        kappa = rng.uniform(0.01, 0.2)
        d = dist_r(grid, chi, kappa)
        # the admissible set is chi >= -kappa nodewise; the lumped-L2
        # projection is nodewise clipping
        proj = np.maximum(chi, -kappa)
        brute = float(np.sqrt(np.sum(grid.lump * (chi - proj) ** 2)))
        worst = max(worst, abs(d - brute))
    ok = worst < 1e-12
    return ok, f"damage dual-constraint distance vs clipping " \
               f"projection: err {worst:.2e}"


def _selftest_balance(_rng) -> tuple[bool, str]:
    from .problems import reference_problem
    _, mat, ops, ep, loading, init = reference_problem(
        n_side=3, n_steps=10, amplitude=0.4)
    traj = run_viscous(ops, mat, ep, loading, init, n_steps=10)
    ok = traj.aborted_at is None \
        and float(traj.balance_residual_cum.max()) < 1e-2
    return ok, f"short viscous run balance residual " \
               f"{float(traj.balance_residual_cum.max()):.2e}"


def cmd_selftest(seed: int = 0) -> int:
    rng = np.random.default_rng(seed)
    checks = [
        ("gradients", _selftest_gradients),
        ("prox", _selftest_prox),
        ("nonlocal", _selftest_nonlocal),
        ("dual-distance", _selftest_dist),
        ("balance", _selftest_balance),
    ]
    n_fail = 0
    for name, fn in checks:
        ok, msg = fn(rng)
        n_fail += not ok
        print(f"[{'ok' if ok else 'FAIL'}] {name}: {msg}")
    print(f"selftest: {len(checks) - n_fail}/{len(checks)} passed")
    return 1 if n_fail else 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="ribv",
        description="coupled elasto-plastic damage evolution: viscous "
                    "solves, arclength reparameterization, and "
                    "vanishing-parameter sweeps")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "reparam"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=False, default=None)
        sp.add_argument("--out", required=True)
        sp.add_argument("--level-parallelism", type=int, default=1)
    gp = sub.add_parser("check-gronwall")
    gp.add_argument("--config", required=True,
                    help="instance file of lemma data blocks")
    gp.add_argument("--out", required=True)
    st = sub.add_parser("selftest")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--out", required=False, default=None)

    args = ap.parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args.seed)

    os.makedirs(args.out, exist_ok=True)
    if args.command == "check-gronwall":
        return cmd_check_gronwall(args.config, args.out)

    cfg = RunConfig.load(args.config) if args.config \
        else RunConfig.defaults()
    if args.command == "solve":
        return cmd_solve(cfg, args.out)
    if args.command == "reparam":
        return cmd_reparam(cfg, args.out)
    return cmd_sweep(cfg, args.out, args.level_parallelism)


if __name__ == "__main__":
    sys.exit(main())
