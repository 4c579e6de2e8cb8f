"""Distance between the multiscale limit operator D(delta) and its homogenized
counterpart for the cos_delta media, in several norms.

    python3 scripts/matrix_limit.py [--cells 64 --ratio 40]
"""

import argparse

import numpy as np

from msfem_transport import assemble_spatial, build_global_basis, build_nested_mesh, builtin_media
from msfem_transport.harness.metrics import fit_rate


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--cells", type=int, default=64)
    parser.add_argument("--ratio", type=int, default=40)
    args = parser.parse_args()

    mesh = build_nested_mesh(1, args.cells, args.ratio)
    hom = assemble_spatial(mesh, build_global_basis(mesh, mode="affine"), 0.25).limit_operator
    f = np.cos(np.pi * mesh.coarse_coords[:, 0])
    deltas = [1 / 8, 1 / 24, 1 / 40, 1 / 56]
    rows = []
    print(f"H = {mesh.H:g}, h = {mesh.h:g}")
    print(f"{'delta':>8s} {'max entry':>11s} {'2-norm':>11s} {'|E cos|':>11s}")
    for d in deltas:
        media = builtin_media("cos_delta", d)
        E = assemble_spatial(mesh, build_global_basis(mesh, media), media).limit_operator - hom
        row = (np.abs(E).max(), np.linalg.norm(E, 2), np.abs(E @ f).max())
        rows.append(row)
        print(f"{d:8.4f} {row[0]:11.4e} {row[1]:11.4e} {row[2]:11.4e}")
    for i, name in enumerate(("max entry", "2-norm", "|E cos|")):
        all_ = fit_rate(zip(deltas, [r[i] for r in rows]))[0]
        tail = fit_rate(zip(deltas[1:], [r[i] for r in rows[1:]]))[0]
        print(f"slope {name}: {all_:.3f} (all), {tail:.3f} (delta < H)")


if __name__ == "__main__":
    main()
