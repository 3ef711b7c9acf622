"""Command-line front end: ``semiflows [command] --config FILE``.

Exit status 0 on success, 1 when a verification fails, 2 on bad input.
Outputs are staged in ``<output_dir>.partial`` and only moved into place on
success; ``SEMIFLOWS_OUTPUT_ROOT`` relocates relative output directories.
"""
from __future__ import annotations

import argparse
import os
import platform
import shutil
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .chafee_infante import (convergence_study, cubic_profile, energy,
                             expected_count, find_equilibria, inclusion_map,
                             random_initial_states, separation_radius)
from .config import COMMANDS, ConfigError, RunConfig, parse_config
from .graph import (CellComplex, build_transition_graph, chain_recurrent_cells, find_eps_chain,
                    verify_chain)
from .inclusion import (DuffingState, SelectionPolicy, assemble_laplacian, duffing_energy,
                        duffing_integrate, integrate_batch)
from .io import sha256, write_json, write_table, write_trajectory
from .omega import (IsolatedSetCatalog, estimate_alpha, estimate_omega, find_cyclic_chain,
                    hausdorff, probe_connections)
from .setvalued import parse_map
from .systems import InclusionSystem, contraction_system, duffing_system

OUTPUT_ROOT_ENV = "SEMIFLOWS_OUTPUT_ROOT"

EXIT_OK, EXIT_VERIFY, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _lambda(cfg: RunConfig) -> float:
    kind, _, rest = cfg.map.partition(":")
    if kind != "cubic":
        raise InputError("this command needs a cubic:lambda=<v> map")
    params = dict(p.split("=", 1) for p in rest.split(",") if p)
    return float(params["lambda"])


def _system(cfg: RunConfig):
    if cfg.system == "duffing":
        return duffing_system()
    if cfg.system == "contraction":
        return contraction_system(len(cfg.resolution))
    A = assemble_laplacian(len(cfg.resolution) if cfg.command in ("graph", "chain")
                           else cfg.n_interior, cfg.length)
    return InclusionSystem(A, parse_map(cfg.map), dt=cfg.dt, name="inclusion")


def _complex(cfg: RunConfig) -> CellComplex:
    b = np.asarray(cfg.bounds, dtype=float).reshape(-1, 2)
    return CellComplex(b, cfg.resolution)


def _eps(cfg: RunConfig, cx: CellComplex) -> float:
    return cx.diameter if cfg.epsilon is None else cfg.epsilon


# --------------------------------------------------------------------------
# Commands; each returns (ok, summary) and writes into ``out``
# --------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, out: Path):
    fmap = parse_map(cfg.map)
    A = assemble_laplacian(cfg.n_interior, cfg.length)
    y0 = random_initial_states(cfg.n_runs, cfg.n_interior, cfg.seed)
    worst = [0.0]

    def monitor(k, u, z, u_next):
        lo, hi = fmap.bounds(u)
        worst[0] = max(worst[0], float(np.max(np.maximum(lo - z, 0) + np.maximum(z - hi, 0))))

    policy = SelectionPolicy(cfg.policy, seed=cfg.seed)
    trajs = integrate_batch(y0, cfg.T, cfg.dt, A, fmap, policy, record_every=cfg.record_every,
                            monitor=monitor)
    for i, tr in enumerate(trajs):
        write_trajectory(out / f"trajectory_{i:03d}.csv", tr,
                         {"map": cfg.map, "seed": cfg.seed, "operator_size": cfg.n_interior,
                          "policy": policy.describe()})
    summary = {"runs": len(trajs), "max_inclusion_residual": worst[0]}
    write_json(out / "simulate.json", summary)
    return worst[0] == 0.0, summary


def _equilibria(cfg: RunConfig, out: Path):
    lam = _lambda(cfg)
    prof = cubic_profile(lam)
    eqs = find_equilibria(prof, n_interior=cfg.n_interior)
    A = assemble_laplacian(cfg.n_interior)
    labels = eqs.labels()
    for lab, u in zip(labels, eqs.profiles):
        write_table(out / f"equilibrium_{lab}.csv", ["x", "u(x)"],
                    np.column_stack([eqs.grid, u]).tolist())
    summary = {"lambda": lam, "count": eqs.count, "expected_count": expected_count(lam),
               "labels": labels, "slopes": eqs.shooting_slopes, "residuals": eqs.residuals,
               "raw_residuals": eqs.raw_residuals,
               "energies": [float(energy(u, prof, A)) for u in eqs.profiles],
               "flagged": eqs.flagged, "settings": eqs.settings}
    write_json(out / "equilibria.json", summary)
    ok = eqs.count == expected_count(lam) and max(eqs.residuals) < cfg.residual_tol
    return ok, summary, prof, eqs


def cmd_equilibria(cfg: RunConfig, out: Path):
    ok, summary, _, _ = _equilibria(cfg, out)
    return ok, summary


def cmd_graph(cfg: RunConfig, out: Path):
    cx = _complex(cfg)
    g = build_transition_graph(_system(cfg), cx, cfg.t_flow, _eps(cfg, cx), cfg.n_samples,
                               cfg.n_selections, cfg.seed)
    rec = sorted(chain_recurrent_cells(g))
    (out / "graph.dot").write_text(g.to_dot())
    write_json(out / "graph.json", g.to_json())
    summary = {"cells": cx.n_cells, "edges": int(g.adjacency.nnz), "recurrent": len(rec),
               "escaping": int(g.escapes.sum())}
    write_json(out / "recurrent.json", {"cells": rec, **summary})
    return True, summary


def _chain(cfg: RunConfig, out: Path, system, g):
    cx = g.complex
    a = int(cx.locate(np.asarray(cfg.chain_from)[None])[0])
    b = int(cx.locate(np.asarray(cfg.chain_to)[None])[0])
    if a < 0 or b < 0:
        raise InputError("chain endpoints lie outside the graph bounds")
    chain = find_eps_chain(g, a, b)
    if chain is None:
        write_json(out / "chain.json", {"found": False})
        return False, {"found": False}
    rep = verify_chain(chain, system, cfg.n_selections, cfg.seed)
    write_json(out / "chain.json", {"found": True, "passed": rep.passed,
                                    **chain.to_json(rep.residuals)})
    return rep.passed, {"found": True, "passed": rep.passed, "links": len(chain.times),
                        "epsilon": chain.epsilon}


def cmd_chain(cfg: RunConfig, out: Path):
    cx = _complex(cfg)
    system = _system(cfg)
    g = build_transition_graph(system, cx, cfg.t_flow, _eps(cfg, cx), cfg.n_samples,
                               cfg.n_selections, cfg.seed)
    return _chain(cfg, out, system, g)


def cmd_omega(cfg: RunConfig, out: Path):
    if cfg.system == "duffing":
        s0 = DuffingState(*cfg.duffing_start)
        tr = duffing_integrate(s0, cfg.T, cfg.dt)
        om = estimate_omega(tr, 0.5, cfg.tol)
        al = estimate_alpha(s0, cfg.T, cfg.dt, 0.5, cfg.tol)
        write_table(out / "omega.csv", ["x", "y"], om.points.tolist())
        V = duffing_energy(om.points)
        summary = {"points": len(om.points), "V_range": float(V.max() - V.min()),
                   "alpha_omega_hausdorff": hausdorff(om.points, al.points)}
        write_json(out / "omega.json", summary)
        return summary["alpha_omega_hausdorff"] <= 2 * cfg.tol, summary
    ok_eq, _, prof, eqs = _equilibria(cfg, out)
    y0 = random_initial_states(cfg.n_runs, cfg.n_interior, cfg.seed)
    st = convergence_study(prof, eqs, y0, cfg.T, cfg.dt, cfg.record_every, cfg.tol,
                           fmap=parse_map(cfg.map))
    labels = eqs.labels()
    rows = [[i, labels[c] if c is not None else "unresolved", d]
            for i, (c, d) in enumerate(zip(st.classes, st.final_distances))]
    write_table(out / "classification.csv", ["run", "equilibrium", "final_distance"], rows)
    summary = {"runs": len(rows), "unresolved": len(st.unresolved),
               "energy_monotone": st.energy_ok}
    write_json(out / "omega.json", summary)
    return ok_eq and not st.unresolved and st.energy_ok, summary


def cmd_connections(cfg: RunConfig, out: Path):
    ok_eq, _, prof, eqs = _equilibria(cfg, out)
    A = assemble_laplacian(cfg.n_interior)
    system = InclusionSystem(A, inclusion_map(prof), dt=cfg.probe_dt, name=prof.name)
    cat = IsolatedSetCatalog.from_points(eqs.labels(), eqs.profiles, separation_radius(eqs), "max")
    g = probe_connections(cat, system, cfg.n_probes, cfg.probe_radius, cfg.probe_T, cfg.seed)
    for w in g.witnesses:
        tr = system.trajectories(np.asarray(w["initial_state"])[None], w["T"], w["record_every"])[0]
        rel = f"witness_{w['id']:03d}.csv"
        write_trajectory(out / rel, tr, {"witness": w["id"]})
        w["trajectory"] = rel
    rep = find_cyclic_chain(g)
    energies = dict(zip(eqs.labels(), (float(energy(u, prof, A)) for u in eqs.profiles)))
    order_ok = all(energies[b] < energies[a] for a, b in g.edge_set() if a != b)
    (out / "connections.dot").write_text(g.to_dot())
    write_json(out / "connections.json", {**g.to_json(), "cyclic_chain": rep.found,
                                          "cycle": rep.cycle, "energies": energies,
                                          "energy_ordering": order_ok})
    summary = {"edges": sorted(map(list, g.edge_set())), "cyclic_chain": rep.found,
               "unresolved": len(g.unresolved), "energy_ordering": order_ok}
    return ok_eq and order_ok, summary


def cmd_demo_duffing(cfg: RunConfig, out: Path):
    s0 = DuffingState(*cfg.duffing_start)
    T = 20.0
    tr = duffing_integrate(s0, T, 1e-3)
    V = duffing_energy(tr.states)
    drift = float(np.max(np.abs(V - V[0])))
    write_trajectory(out / "duffing_trajectory.csv", tr, {"start": list(cfg.duffing_start)})
    write_json(out / "energy_drift.json", {"T": T, "dt": 1e-3, "max_drift": drift,
                                           "passed": drift <= 1e-8})
    system = duffing_system()
    cx = CellComplex(np.array([[-1.8, 1.8], [-1.8, 1.8]]), (60, 60))
    g = build_transition_graph(system, cx, 0.5, cx.diameter, cfg.n_samples, 1, cfg.seed)
    (out / "transition_graph.dot").write_text(g.to_dot())
    rec = chain_recurrent_cells(g)
    write_json(out / "recurrent.json", {"cells": sorted(rec)})
    chain_ok, chain_summary = _chain(cfg, out, system, g)
    return drift <= 1e-8 and chain_ok, {"drift": drift, "recurrent": len(rec), **chain_summary}


def cmd_demo_chafee(cfg: RunConfig, out: Path):
    ok_eq, eq_summary, prof, eqs = _equilibria(cfg, out)
    y0 = random_initial_states(cfg.n_runs, cfg.n_interior, cfg.seed)
    st = convergence_study(prof, eqs, y0, cfg.T, cfg.dt, cfg.record_every, cfg.tol,
                           fmap=parse_map(cfg.map))
    labels = eqs.labels()
    rows = [[i, labels[c] if c is not None else "unresolved", d, float(inc), float(thr)]
            for i, (c, d, inc, thr) in enumerate(zip(st.classes, st.final_distances,
                                                     st.max_increments, st.thresholds))]
    write_table(out / "classification.csv",
                ["run", "equilibrium", "final_distance", "max_energy_increment", "threshold"], rows)
    write_json(out / "energy_report.json",
               {"passed": st.energy_ok, "max_increment": float(np.max(st.max_increments)),
                "max_ratio": float(np.max(st.max_increments / st.thresholds))})
    ok = ok_eq and st.energy_ok and not st.unresolved
    return ok, {"count": eqs.count, "unresolved": len(st.unresolved), "energy_ok": st.energy_ok}


HANDLERS = {
    "simulate": cmd_simulate, "equilibria": cmd_equilibria, "graph": cmd_graph,
    "chain": cmd_chain, "omega": cmd_omega, "connections": cmd_connections,
    "demo-duffing": cmd_demo_duffing, "demo-chafee": cmd_demo_chafee,
}


def resolve_output(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def run(cfg: RunConfig) -> int:
    out = resolve_output(cfg)
    stage = out.with_name(out.name + ".partial")
    if stage.exists():
        shutil.rmtree(stage)
    stage.mkdir(parents=True)
    t0 = time.perf_counter()
    try:
        ok, summary = HANDLERS[cfg.command](cfg, stage)
    except (InputError, ValueError) as exc:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    if not ok:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"verification failed: {summary}", file=sys.stderr)
        return EXIT_VERIFY
    files = {str(p.relative_to(stage)): sha256(p) for p in sorted(stage.rglob("*")) if p.is_file()}
    manifest = {"config": cfg.to_dict(), "summary": summary, "files": files,
                "versions": {"semiflows": __version__, "python": platform.python_version(),
                             "numpy": np.__version__, "scipy": scipy.__version__},
                "wall_time": time.perf_counter() - t0}
    write_json(stage / "manifest.json", manifest)
    if out.exists():
        shutil.rmtree(out)
    stage.rename(out)
    print(f"{cfg.command}: ok -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="semiflows", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", help="one of: " + ", ".join(COMMANDS))
    ap.add_argument("--config", type=Path, help="flat key = value configuration file")
    ap.add_argument("--output", help="override output_dir")
    args = ap.parse_args(argv)
    if args.command is not None and args.command not in COMMANDS:
        print(f"error: unknown command {args.command!r}", file=sys.stderr)
        return EXIT_INPUT
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    overrides = {}
    if args.command:
        overrides["command"] = args.command
    if args.output:
        overrides["output_dir"] = args.output
    try:
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
