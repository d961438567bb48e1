"""Compare the compiled and pure-Python kernel backends.

Times one ``BatchPropagator.step`` for every scheme on spin stars of a few
sizes, once per available backend, and checks both backends agree.

Usage::

    python benchmarks/bench_kernels.py [--ntraj 2048] [--nbath 1 2 4 8] [--repeat 5]
"""

import argparse
import time

import numpy as np

from pairjump import BatchPropagator, IntegrationParams, SpinStarModel, build_spin_star
from pairjump.kernels import available_backends
from pairjump.model import initial_state


def _inputs(model, h, n_traj, seed=0):
    rng = np.random.default_rng(seed)
    state = initial_state(model)
    phi = np.tile(state.system, (n_traj, 1))
    chi = np.tile(state.environment, (n_traj, 1))
    # jitter so the adaptive branches see generic states
    phi = phi + 0.05 * (rng.standard_normal(phi.shape) + 1j * rng.standard_normal(phi.shape))
    chi = chi + 0.05 * (rng.standard_normal(chi.shape) + 1j * rng.standard_normal(chi.shape))
    x = rng.standard_normal((n_traj, h.n_channels))
    return phi, chi, x


def time_step(h, scheme, backend, phi, chi, x, repeat):
    prop = BatchPropagator(h, scheme, IntegrationParams(0.01, 1), backend=backend)
    out = prop.step(phi, chi, x)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        prop.step(phi, chi, x)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ntraj", type=int, default=2048)
    ap.add_argument("--nbath", type=int, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}; {args.ntraj} trajectories per step; best of {args.repeat}")
    header = f"{'N':>3} {'scheme':>6} " + " ".join(f"{b + ' [ms]':>14}" for b in backends)
    if len(backends) > 1:
        header += f" {'speedup':>8} {'max |diff|':>11}"
    print(header)
    for n in args.nbath:
        model = SpinStarModel(n, 0.5)
        h = build_spin_star(model)
        phi, chi, x = _inputs(model, h, args.ntraj)
        for scheme in ("sse", "osse", "smf", "osmf"):
            times, outs = [], []
            for b in backends:
                t, out = time_step(h, scheme, b, phi, chi, x, args.repeat)
                times.append(t)
                outs.append(out)
            line = f"{n:>3} {scheme:>6} " + " ".join(f"{1e3 * t:>14.2f}" for t in times)
            if len(backends) > 1:
                i_py, i_cy = backends.index("python"), backends.index("cython")
                diff = max(np.max(np.abs(a - b)) for a, b in zip(outs[i_py][:2], outs[i_cy][:2]))
                line += f" {times[i_py] / times[i_cy]:>7.1f}x {diff:>11.1e}"
            print(line)


if __name__ == "__main__":
    main()
