"""How the certifier fails, on purpose, for two designed degeneracies.

Both instances below are strongly convex problems with verified stationary
points, yet quadratic growth in the flat metric does not hold.  The first
flattens the dual at one atom (curvature certificate dies); the second
duplicates a kernel column across two atoms (a whole direction with zero
objective gap).  The point of the demo: the structural block and the
sampled growth ratios fail together, each naming the same culprit.

Run:  python3 demos/degenerate_growth.py
"""
from __future__ import annotations

from radoncert.growth import (GrowthConfig, decay_slope, gamma_by_radius,
                              growth_report)
from radoncert.instances import (duplicated_columns_instance,
                                 flat_hessian_instance)
from radoncert.optimality import active_sets, check_first_order
from radoncert.second_order import check_C_conditions


def report(inst) -> None:
    problem, u = inst.problem, inst.u
    print(f"== {inst.tag} ==")
    print(f"  first-order passed    {check_first_order(problem, u).passed}")
    sets = active_sets(problem, u)
    so = check_C_conditions(problem, u, sets)
    print(f"  curvature theta       {so.theta:.3e}"
          f"   certificate {so.theta_passed}")
    print(f"  constrained form eig  {so.soc_min_eig:.3e}")
    print(f"  structural B1         {so.b1}")

    fine = growth_report(problem, u, sets,
                         GrowthConfig(radii=(0.02, 0.01, 0.005, 0.0025),
                                      seed=0))
    by_r = gamma_by_radius(fine)
    print("  radius    min gap/BL^2")
    prev = None
    for r in sorted(by_r, reverse=True):
        note = ""
        if prev is not None and by_r[r] > 0:
            note = f"   (x {by_r[r] / prev:.2f})"
        elif prev is not None:
            note = "   (zero)"
        print(f"  {r:7.4f}   {by_r[r]:.6e}{note}")
        prev = by_r[r] if by_r[r] > 0 else None

    full = growth_report(problem, u, sets, GrowthConfig(seed=0))
    emp = full.verdict and decay_slope(full) < 0.5
    print(f"  gamma_hat             {full.gamma_hat:.3e}")
    print(f"  decay slope           {decay_slope(full):+.3f}")
    print(f"  empirical verdict     {emp}")
    print(f"  verdicts agree        {so.b1 == emp}")
    print()


def main() -> None:
    # quartic dual top: gamma shrinks ~ radius^2, slope fit near 2
    report(flat_hessian_instance(0))
    # antiparallel kernel columns: the paired weight direction moves the
    # measure at zero cost, gamma is exactly 0 at every radius
    report(duplicated_columns_instance(0))


if __name__ == "__main__":
    main()
