"""Time the log-derivative sweep: fused numba kernel against the numpy path.

    python benchmarks/bench_kernels.py --velocity 0.2 --repeat 3
"""
import argparse
import time

import numpy as np

from diodelab import kernels
from diodelab.physics import DiodeConfig, kinematics
from diodelab.solver import GridSpec, _sector_potential


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--velocity", type=float, default=0.2, help="m/s")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--numpy-sectors", type=int, default=50_000,
                        help="truncate the numpy run to this many sectors (it is slow)")
    args = parser.parse_args(argv)

    cfg = DiodeConfig.from_units(1.0, 100.0, 100.0, 50.0)
    _, k = kinematics(args.velocity, cfg)
    x_left, x_right, n = GridSpec().sectors(cfg, k)
    w11, w12, w22, h, _ = _sector_potential(cfg, x_left, x_right, n)
    print(f"v = {args.velocity} m/s, {n} sectors, h = {h:.3e} m")

    if kernels.HAVE_NUMBA:
        kernels.sweep(w11[:10], w12[:10], w22[:10], h, k, use_numba=True)  # compile / load cache
        t_nb, (y_nb, _, _) = best_of(lambda: kernels.sweep(w11, w12, w22, h, k, use_numba=True), args.repeat)
        print(f"numba : {t_nb * 1e3:9.2f} ms  ({t_nb / n * 1e9:6.1f} ns/sector)")
    else:
        print("numba : not installed")

    m = min(n, args.numpy_sectors)
    sl = slice(n - m, n)
    t_np, (y_np, _, _) = best_of(lambda: kernels.sweep(w11[sl], w12[sl], w22[sl], h, k, use_numba=False), 1)
    print(f"numpy : {t_np * 1e3:9.2f} ms for {m} sectors ({t_np / m * 1e9:6.1f} ns/sector)")
    if kernels.HAVE_NUMBA:
        y_ref, _, _ = kernels.sweep(w11[sl], w12[sl], w22[sl], h, k, use_numba=True)
        print(f"max |Y_numba - Y_numpy| / |Y| = {np.max(np.abs(y_ref - y_np)) / np.max(np.abs(y_ref)):.2e}")
        print(f"speed-up per sector: {(t_np / m) / (t_nb / n):.0f}x")


if __name__ == "__main__":
    main()
