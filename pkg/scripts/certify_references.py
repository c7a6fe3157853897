"""Parameter selection and certification for the two reference cases.

Prints the chosen constants under both constant recipes and the worst
residual per region.  Usage: python scripts/certify_references.py [--nodes 1000]
"""
import argparse
import time

from fluxks import certify_subsolution, make_setup, select_params

CASES = ((1, 2.0, 1.0), (2, 2.0, 0.5))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=1000)
    args = ap.parse_args()
    for n, chi, m in CASES:
        setup = make_setup(n, 1.0, chi, m)
        for recipe in ("corrected", "literal"):
            rep = select_params(setup, recipe)
            head = f"n={n} chi={chi} m={m} [{recipe}]"
            if rep.params is None:
                print(f"{head}: infeasible ({rep.reason})")
                continue
            p = rep.params
            print(f"{head}: feasible={rep.feasible} lam={p.lam} K={p.K:.6g} delta={p.delta:.4g} "
                  f"B0={p.B0:.4g} kappa={p.kappa:.4g} T_ext={p.T_ext:.4g}")
            if not rep.feasible:
                for c in rep.violated():
                    print(f"    violated: {c.name}: {c.actual:.4g} vs {c.required:.4g}")
            start = time.perf_counter()
            cert = certify_subsolution(p, setup, args.nodes, args.nodes)
            print(f"    certification {'PASS' if cert.passed else 'FAIL'} "
                  f"(tol {cert.tol_sign:.2e}, {time.perf_counter() - start:.1f}s)")
            for r in cert.regions:
                print(f"    {r.region:>13}: max P = {r.max_residual:+.3e} at s={r.worst_s:.3e}, "
                      f"t={r.worst_t:.3e}")


if __name__ == "__main__":
    main()
