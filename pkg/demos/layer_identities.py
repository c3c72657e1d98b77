"""Why the layer is reflectionless: the discrete identities, numerically.

The absorbing layer works because damped plane-wave profiles satisfy the
same lattice equations as the undamped ones.  That hinges on a chain of
algebraic identities: a discrete Cauchy-Riemann relation for the
complex-stretched node coordinates, commutation of the stretched shift
with the damping weights, five summation identities tying the history
fields together, and finally the residual of the damped mode inserted
into the full evolution equations.

This script builds the machinery for a handful of random modes and
damping profiles and prints every residual.  All of them sit at the
1e-13 level or below; with the damping switched off the first two
columns are exact zeros by construction.

Runs in about a second.
"""

import numpy as np

from pdpml import (
    ExtendedMode,
    GridConfig,
    KernelSpec,
    StretchedCoordinate,
    build_profile,
    cauchy_riemann_residual,
    commutation_residual,
    compute_stencil,
    propagating_mode,
    proposition_identity_check,
    theorem_residual,
)
from pdpml.holomorphy import PROPOSITION_KINDS, mode_on_manifold

H = 1.0 / 8
WINDOW = 16
SEED = 7


def main() -> int:
    spec = KernelSpec.heaviside_over_r2(0.25)
    grid = GridConfig.for_kernel(spec, H, 8, 4)
    st = compute_stencil(spec, grid, 8)
    rng = np.random.default_rng(SEED)

    band = np.pi / H
    print("identity residuals per mode (damped window, k = 2):")
    header = ["CR", "commute"] + list(PROPOSITION_KINDS)
    print("  " + "".join(f"{name:>12s}" for name in header))

    for trial in range(4):
        kap = tuple(float((0.15 + 0.7 * rng.random()) * band * s)
                    for s in rng.choice([-1.0, 1.0], 2))
        mode = propagating_mode(st, kap)
        scale = 0.0 if trial == 0 else 2.0 * abs(mode.omega)
        sig = tuple(scale * rng.random(WINDOW) for _ in range(2))
        em = ExtendedMode(mode=mode, h=H, sigma=sig, size=WINDOW)
        co = StretchedCoordinate(h=H, omega=mode.omega, sigma=sig[0], size=WINDOW)

        vals = [cauchy_riemann_residual(em, co), commutation_residual(em, k=2)]
        for kind in PROPOSITION_KINDS:
            if kind == "TauTau":
                vals.append(proposition_identity_check(em, co, kind, k1=2, k2=2))
            else:
                vals.append(proposition_identity_check(em, co, kind, k=2))
        tag = "(sigma = 0)" if scale == 0.0 else ""
        print("  " + "".join(f"{v:12.2e}" for v in vals) + f"  {tag}")

    # the full theorem: damped modes solve the layer equations
    print()
    print("theorem residual for modes on the dispersion manifold, sigma0 = 16:")
    prof = build_profile(grid, 16.0)
    for omega in (2.0, 5.0, 11.0):
        mode = mode_on_manifold(st, omega, 0.3 * band)
        res = theorem_residual(mode, prof, st)
        print(f"  omega = {omega:5.2f}:  residual = {res:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
