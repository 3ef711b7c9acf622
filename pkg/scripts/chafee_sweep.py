"""Sweep lambda for the Chafee-Infante problem.

For each lambda: equilibrium count against 2n+1, residuals, energies and
sup norms of every profile.  Optionally (``--runs``) integrates random
initial states and tabulates where they settle.
"""
import argparse
from pathlib import Path

import numpy as np

from semiflows.chafee_infante import (convergence_study, cubic_profile, energy, expected_count,
                                      find_equilibria, random_initial_states)
from semiflows.inclusion import assemble_laplacian
from semiflows.io import write_table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[5, 10, 15, 30, 40, 50, 80, 90])
    ap.add_argument("--n-interior", type=int, default=200)
    ap.add_argument("--runs", type=int, default=0, help="random runs per lambda (0 = skip)")
    ap.add_argument("--T", type=float, default=50.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/chafee_sweep"))
    args = ap.parse_args(argv)

    A = assemble_laplacian(args.n_interior)
    eq_rows, run_rows = [], []
    for lam in args.lambdas:
        prof = cubic_profile(lam)
        eqs = find_equilibria(prof, n_interior=args.n_interior)
        E = energy(eqs.profiles, prof, A) if eqs.count else np.array([])
        for lab, u, r, raw, e in zip(eqs.labels(), eqs.profiles, eqs.residuals,
                                     eqs.raw_residuals, E):
            eq_rows.append([lam, lab, float(np.max(np.abs(u))), r, raw, float(e)])
        print(f"lambda={lam:g}: {eqs.count} equilibria (expected {expected_count(lam)}) "
              f"{eqs.labels()}")
        if args.runs:
            y0 = random_initial_states(args.runs, args.n_interior, args.seed)
            st = convergence_study(prof, eqs, y0, T=args.T)
            labels = eqs.labels()
            for i, (c, d) in enumerate(zip(st.classes, st.final_distances)):
                run_rows.append([lam, i, labels[c] if c is not None else "unresolved", d,
                                 float(st.max_increments[i])])
            print(f"  runs: {len(st.unresolved)} unresolved, energy monotone={st.energy_ok}")
    write_table(args.out / "equilibria.csv",
                ["lambda", "label", "sup_norm", "residual", "raw_residual", "energy"], eq_rows)
    if run_rows:
        write_table(args.out / "runs.csv",
                    ["lambda", "run", "equilibrium", "final_distance", "max_energy_increment"],
                    run_rows)


if __name__ == "__main__":
    main()
