"""Free energy of the unit ball in dimension 10.

Samples the ball, builds the free-energy curve on the default grid and prints
each estimator next to the exact value, along with the relative entropy
``H = E2^2 w / 2 - Z`` and the choice of ``w0``.

    python3 demos/free_energy_ball.py
"""
import numpy as np

from gaussfit import Ball, SamplerConfig, build_curve, radial_stats, sample_uniform
from gaussfit.free_energy import default_w_grid
from gaussfit.overlap import choose_w0, corollary_check, entropy_curve


def main(n=10, m=50_000, seed=1):
    body = Ball.unit(n)
    cfg = SamplerConfig(seed=seed)
    batch = sample_uniform(body, cfg, m)
    st = radial_stats(batch, np.zeros(n))
    print(f"E = {st.E:.4f}  S = {st.S:.4f}  E2 = {st.E2:.4f}")

    curve = build_curve(body, batch, st, cfg, default_w_grid(st, size=12))
    _, H, _ = entropy_curve(curve)
    print(f"{'w':>10} {'Z':>9} {'se':>8} {'exact':>9} {'H':>9}  method")
    for p, o, h in zip(curve.points, curve.by_method["oracle"], H):
        print(f"{p.w:10.4g} {p.Z:9.5f} {p.se:8.1e} {o.Z:9.5f} {h:9.5f}  {p.method}")

    w0 = choose_w0(st)
    rep = corollary_check(body, st, curve, batch)
    print(f"\nw0 = {w0:.4f}: H = {rep.H:.5f}, TV = {rep.dtv_direct:.4f} "
          f"(Pinsker {rep.dtv_pinsker:.4f})")


if __name__ == "__main__":
    main()
