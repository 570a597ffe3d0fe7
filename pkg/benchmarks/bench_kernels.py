"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]

Times an explicit run at the gasket level-6 reference scale (scaled down by
--steps) and a batch of implicit CG solves, and checks the two backends
return the same numbers.
"""
import argparse
import time

import numpy as np

from fractal_heat import _backend, experiments, spectral, stepper
from fractal_heat.topology import SimplexSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def explicit_case(kernels, d, m, steps):
    spec = SimplexSpec(d, m)
    h = 0.5 * spectral.cfl_max_step(d, m)
    cfg = stepper.SchemeConfig("explicit", h * steps, steps)
    vertex = experiments.default_vertex(d, m)
    u0 = stepper.spike_initial(spec, vertex)
    return lambda: stepper.simulate(spec, cfg, u0, probes=[vertex],
                                    sample_every=steps, kernels=kernels)


def implicit_case(kernels, d, m, steps, h):
    spec = SimplexSpec(d, m)
    cfg = stepper.SchemeConfig("implicit", h * steps, steps)
    u0 = stepper.spike_initial(spec, experiments.default_vertex(d, m))
    return lambda: stepper.simulate(spec, cfg, u0, sample_every=steps, kernels=kernels)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20_000, help="explicit steps (full reference run: 200000)")
    parser.add_argument("--cg-steps", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    names = _backend.available()
    print(f"backends: {', '.join(names)} (default: {_backend.kernels.NAME})")
    cases = [
        (f"explicit d=3 m=6, {args.steps} steps",
         lambda k: explicit_case(k, 3, 6, args.steps)),
        (f"explicit d=4 m=5, {args.steps} steps",
         lambda k: explicit_case(k, 4, 5, args.steps)),
        (f"implicit d=3 m=6 h=1e-2, {args.cg_steps} CG solves",
         lambda k: implicit_case(k, 3, 6, args.cg_steps, 1e-2)),
    ]
    for label, make in cases:
        print(label)
        results = {}
        for name in names:
            seconds, traj = best_of(make(_backend.load(name)), args.repeat)
            results[name] = (seconds, traj)
            print(f"  {name:>7}: {seconds:8.3f} s")
        if len(results) == 2:
            (tc, a), (tp, b) = results["cython"], results["python"]
            gap = float(np.max(np.abs(a.final.values - b.final.values)))
            print(f"  speedup {tp / tc:5.1f}x, max |difference| {gap:.2e}")


if __name__ == "__main__":
    main()
