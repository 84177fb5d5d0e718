"""First-order theory against the exact second-moment steady state on bench_n20.

For diffusion and consensus the first-order MSD ignores the disagreement
term, which is O(mu^2) and not divided by N. This prints the gap (dB) between
the exact steady state of the mean-square recursion and the first-order
value as mu shrinks, showing it vanishes linearly in mu. With ``--simulate``
each row is also checked by Monte Carlo (slow).
"""

import argparse

import numpy as np

from netadapt.analysis import msd_theory, solve_second_moment
from netadapt.graph import metropolis_weights
from netadapt.montecarlo import RunSpec, monte_carlo
from netadapt.scenarios import scenario_library
from netadapt.strategies import AlgorithmConfig


def exact_msd(kind: str, ens, A: np.ndarray, mu: float) -> float:
    """Steady state of the error covariance recursion for diffusion ATC or consensus."""
    N, M = ens.num_agents, ens.dim
    H = ens.h_block
    At = np.kron(A.T, np.eye(M))
    if kind == "diffusion":
        B = At @ (np.eye(N * M) - mu * H)
        Q = mu**2 * At @ ens.r_z @ At.T
    else:
        B = At - mu * H
        Q = mu**2 * ens.r_z
    return float(np.trace(solve_second_moment(B, Q)) / N)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=2015)
    p.add_argument("--simulate", action="store_true")
    args = p.parse_args()

    scen = scenario_library("bench_n20", seed=args.seed)
    ens, topo = scen.ensemble, scen.topology
    A = metropolis_weights(topo)
    print(f"{'mu':>8} {'kind':>10} {'first-order':>12} {'exact':>8} {'gap':>6}" + ("  simulated" if args.simulate else ""))
    for mu in (0.01, 0.003, 0.001, 3e-4):
        fo = 10 * np.log10(msd_theory(ens, topo.laplacian, mu, method="diffusion"))
        for kind in ("diffusion", "consensus"):
            ex = 10 * np.log10(exact_msd(kind, ens, A.weights, mu))
            line = f"{mu:8.0e} {kind:>10} {fo:12.2f} {ex:8.2f} {ex - fo:6.2f}"
            if args.simulate:
                cfg = AlgorithmConfig("diffusion_atc" if kind == "diffusion" else "consensus", mu, combination=A)
                T = int(30 / mu)
                c = monte_carlo(RunSpec(topo, ens, (cfg,), horizon=T, trials=20, seed=args.seed))[cfg.label]
                line += f"  {c.steady_state_msd_db:9.2f}"
            print(line)


if __name__ == "__main__":
    main()
