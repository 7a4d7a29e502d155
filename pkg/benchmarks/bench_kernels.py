"""Compare the compiled and pure-Python stepping kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each case integrates the same problem with both backends, checks that the
final states agree and prints wall-clock times and the speed-up.
"""
import argparse
import time

import numpy as np

from dyadiclab import kernels
from dyadiclab.shell_model import Formulation, ModelParams, Truncation
from dyadiclab.stepper import StepControl, integrate

CASES = {
    "rhs N=20": None,
    "etd45 inviscid N=8 T=1": (ModelParams(beta=2.5, nu=0.0, n_shells=8),
                               lambda n: 2.0 ** -np.arange(1, n + 1), 1.0, "etd45"),
    "rodas4 viscous N=16 T=1": (ModelParams(beta=2.5, nu=0.01, n_shells=16),
                                lambda n: 2.0 ** -np.arange(1, n + 1), 1.0, "rodas4"),
    "auto Y MirrorLast N=20 T=0.5": (
        ModelParams(beta=2.3, nu=1e-3, epsilon=0.015, n_shells=20,
                    truncation=Truncation.MIRROR_LAST, formulation=Formulation.Y),
        lambda n: np.full(n, 0.5), 0.5, "auto"),
}


def _time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in kernels.available_backends():
        raise SystemExit("compiled kernels are not built; reinstall with Cython available")
    print(f"{'case':32s} {'cython [s]':>11s} {'python [s]':>11s} {'speed-up':>9s} {'max diff':>9s}")
    for name, case in CASES.items():
        res = {}
        for backend in ("cython", "python"):
            kernels.use_backend(backend)
            if case is None:
                p = ModelParams(beta=2.5, nu=0.01, n_shells=20)
                co, y = p.coefficients, np.linspace(1, 0.1, 20)
                res[backend] = _time(lambda: [kernels.rhs(y, co.a, co.b, co.d, False)
                                              for _ in range(20000)][-1], args.repeat)
            else:
                p, init, t_end, method = case
                y0 = init(p.n_shells)
                res[backend] = _time(lambda: integrate(p, y0, t_end, StepControl(method=method))
                                     .values[-1], args.repeat)
        kernels.use_backend("cython")
        (tc, yc), (tp, yp) = res["cython"], res["python"]
        print(f"{name:32s} {tc:11.4f} {tp:11.4f} {tp / tc:9.1f} {np.max(np.abs(yc - yp)):9.1e}")


if __name__ == "__main__":
    main()
