"""Direct and inverse problem on the two-periodic worked example.

Background a0 = (2, 1/2), b0 = (0, 0); perturbation u1 = 1, v1 = 0.
"""

import numpy as np

from reslab.instances import worked_instance
from reslab.inverse import candidate_from_jost, glm_reconstruct, reconstruct_interpolation, spectral_reconstruct
from reslab.oracle import finite_section_spectrum, identity_suite
from reslab.states import all_states, direct_problem, norming_constants


def main():
    inst = worked_instance()
    prob = direct_problem(inst.bg, inst.pert)
    d = prob.data
    print("edges      ", np.round(inst.bg.bands.edges, 12))
    print("theta0     ", d.theta0)
    print("phi0       ", d.phi0)
    print("F          ", d.F)
    print(f"c1={d.c1:.12g} c2={d.c2:.12g} c3={d.c3:.12g} kappa={d.kappa}")

    states = all_states(prob)
    for s in states:
        print(f"  {s.kind:<10} lam={s.lam.real:+.15f} sheet={s.sheet} gap={s.gap_index}")
    for nm in norming_constants(states, prob):
        print(f"  norming r={nm.r:+.6f} series={nm.series:.12g} closed={nm.closed_form:.12g}")

    spec = finite_section_spectrum(inst.bg, inst.pert, 2000)
    print("finite section eigenvalues", spec.accepted)
    rep = identity_suite(prob)
    print("identities ok" if rep.ok else f"identities FAILED {rep.residuals}")

    cand = candidate_from_jost(d)
    rec, sys, _ = glm_reconstruct(cand, inst.bg)
    print(f"GLM       u={rec.u} v={rec.v} (vanishing {sys.vanishing:.1e}, {sys.nodes} nodes)")
    rec2, _ = spectral_reconstruct(cand, inst.bg)
    print(f"spectral  u={rec2.u} v={rec2.v}")
    interp = reconstruct_interpolation(d.F, d.phi0, inst.bg)
    print("interp theta0", interp.candidate.P1)


if __name__ == "__main__":
    main()
