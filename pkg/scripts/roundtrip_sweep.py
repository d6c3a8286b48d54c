"""Round trip (u, v) -> Jost data -> (u, v) over a seeded family of random instances."""

import argparse
import time

import numpy as np

from reslab.instances import instance_family
from reslab.inverse import candidate_from_jost, glm_reconstruct, spectral_reconstruct
from reslab.states import direct_problem


def err(rec, pert):
    if rec.p != pert.p:
        return np.inf
    return max(np.max(np.abs(np.subtract(rec.u, pert.u))), np.max(np.abs(np.subtract(rec.v, pert.v))))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=50, help="number of instances")
    ap.add_argument("--seed", type=int, default=None, help="defaults to RESLAB_SEED")
    args = ap.parse_args()

    t0 = time.perf_counter()
    worst_glm = worst_spec = 0.0
    for inst in instance_family(args.n, args.seed):
        prob = direct_problem(inst.bg, inst.pert)
        cand = candidate_from_jost(prob.data)
        e1 = err(glm_reconstruct(cand, inst.bg)[0], inst.pert)
        e2 = err(spectral_reconstruct(cand, inst.bg)[0], inst.pert)
        worst_glm, worst_spec = max(worst_glm, e1), max(worst_spec, e2)
        print(f"{inst.label:<40} glm {e1:.1e}  spectral {e2:.1e}")
    print(f"max error: glm {worst_glm:.1e}, spectral {worst_spec:.1e}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
