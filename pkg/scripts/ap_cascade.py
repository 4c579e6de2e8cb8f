"""Scaling of the odd part, the higher even modes and the density gap with eps.

For each eps the transport solver runs to T from xi-independent data and is
compared with the limit scheme on the same mesh.

    python3 scripts/ap_cascade.py [--dim 2]
"""

import argparse

import numpy as np

from msfem_transport import (
    LimitStepper, ScalarState, StepperConfig, TransportStepper, assemble_spatial, build_global_basis,
    build_nested_mesh, builtin_media, compute_limit_operator, project_initial, velocity_system,
)
from msfem_transport.harness.metrics import fit_rate


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--dim", type=int, default=1, choices=(1, 2))
    parser.add_argument("--cells", type=int, default=16)
    parser.add_argument("--ratio", type=int, default=4)
    parser.add_argument("--order", type=int, default=4)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--steps", type=int, default=20)
    args = parser.parse_args()

    media = builtin_media("sine10" if args.dim == 1 else "aniso2d")
    mesh = build_nested_mesh(args.dim, args.cells, args.ratio)
    s = assemble_spatial(mesh, build_global_basis(mesh, media), media)
    vel = velocity_system(args.order, "slab" if args.dim == 1 else "circle")
    state0 = project_initial(lambda x: 1 + 0.5 * np.prod(np.cos(np.pi * x), axis=1), mesh, vel)
    D = compute_limit_operator(s, vel.diffusion_weights())
    limit = LimitStepper(s.mass, D, args.dt, 1.0).run(ScalarState(state0.alpha[:, 0]), args.steps).values

    rows = []
    print(f"{'eps':>8s} {'max|beta|':>12s} {'max|alpha_n>=2|':>16s} {'|rho - limit|':>14s}")
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        st = TransportStepper(s, vel, StepperConfig(eps, args.dt)).run(state0, args.steps)
        row = (np.abs(st.beta).max(), np.abs(st.alpha[:, 1:]).max(),
               np.linalg.norm(st.alpha[:, 0] - limit) * np.sqrt(mesh.element_measure))
        rows.append((eps, row))
        print(f"{eps:8.0e} {row[0]:12.3e} {row[1]:16.3e} {row[2]:14.3e}")
    for i, name in enumerate(("beta", "alpha_n>=2", "density gap")):
        print(f"slope {name}: {fit_rate([(e, r[i]) for e, r in rows[1:]])[0]:.3f}")


if __name__ == "__main__":
    main()
