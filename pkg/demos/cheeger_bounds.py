"""Cheeger-constant lower bounds against references.

For a few bodies, compares the Bobkov-type bound ``1/sqrt(E2 S)``, the KLS
bound ``log 2 / E`` and the Gaussian transfer bound with the exact 1D value or
a halfspace-cut upper bound.

    python3 demos/cheeger_bounds.py
"""
import numpy as np

from gaussfit import Ball, Box, SamplerConfig, Simplex, radial_stats, sample_uniform
from gaussfit.bounds import compute_bounds
from gaussfit.free_energy import free_energy_mc
from gaussfit.overlap import choose_w0, relative_entropy

BODIES = {
    "interval": (Box.cube(1), np.array([0.5])),
    "square": (Box.cube(2), np.array([0.5, 0.5])),
    "disk": (Ball.unit(2), None),
    "ball10": (Ball.unit(10), None),
    "simplex3": (Simplex.standard(3), None),
}


def main(m=50_000, seed=2):
    print(f"{'body':<10}{'bobkov':>9}{'kls':>9}{'transfer':>10}{'reference':>11}{'ratio':>8}")
    for i, (name, (body, x0)) in enumerate(BODIES.items()):
        batch = sample_uniform(body, SamplerConfig(seed=seed + i), m)
        st = radial_stats(batch, x0)
        w0 = choose_w0(st)
        H, _ = relative_entropy(st, free_energy_mc(body, w0, batch, st.x0))
        rep = compute_bounds(body, st, batch, w0=w0, H=H)
        ref, se = rep.reference_che
        print(f"{name:<10}{rep.bobkov_che_e2:9.3f}{rep.kls_che:9.3f}{rep.transfer_che:10.3f}"
              f"{ref:11.3f}{rep.calibrated_bobkov:8.3f}")
    print("\nratio = reference * sqrt(E2 S), the Bobkov constant this body allows")


if __name__ == "__main__":
    main()
