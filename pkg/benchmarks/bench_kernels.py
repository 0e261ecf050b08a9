"""Benchmark the numba kernels against their pure-numpy twins.

Run: python3 benchmarks/bench_kernels.py

Sizes mirror what the experiments actually push through these kernels:
conditional tensors of shape (2, 64, 256) and probe stacks of a few
thousand small Hermitian matrices.  Set GAPLAB_NO_NUMBA=1 to confirm the
fallback path imports; the comparison here always times both explicitly.
"""

from __future__ import annotations

import time

import numpy as np

from gaplab import kernels

N_WARMUP = 3
N_RUNS = 20


def _time(fn, *args):
    times = []
    for _ in range(N_WARMUP):
        fn(*args)
    for _ in range(N_RUNS):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return np.mean(times) * 1000, np.std(times) * 1000


def _report(name, numba_fn, numpy_fn, *args):
    print(f"--- {name} ---")
    if kernels.HAVE_NUMBA:
        m_nb, s_nb = _time(numba_fn, *args)
        print(f"numba:  {m_nb:8.3f} +- {s_nb:.3f} ms")
    else:
        m_nb = None
        print("numba:  unavailable (GAPLAB_NO_NUMBA set or import failed)")
    m_np, s_np = _time(numpy_fn, *args)
    print(f"numpy:  {m_np:8.3f} +- {s_np:.3f} ms")
    if m_nb:
        print(f"speedup: {m_np / m_nb:.2f}x")
    print()


def main() -> None:
    rng = np.random.default_rng(7)

    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    print(f"numba active: {kernels.USING_NUMBA}\n")

    vectors = np.ascontiguousarray(cplx(20_000, 8))
    _report("sum_outer (20000 x 8)", kernels.sum_outer_numba,
            kernels.sum_outer_numpy, vectors)

    tensor = np.ascontiguousarray(cplx(2, 64, 256))
    _report("axis1_weights (2, 64, 256)", kernels.axis1_weights_numba,
            kernels.axis1_weights_numpy, tensor)

    _report("conditional_dms (2, 64, 256)", kernels.conditional_dms_numba,
            kernels.conditional_dms_numpy, tensor)

    mats = cplx(6_000, 4, 4)
    mats = np.ascontiguousarray(mats + mats.conj().transpose(0, 2, 1))
    phi = np.ascontiguousarray(cplx(4))
    phi /= np.linalg.norm(phi)
    _report("quad_forms (6000 x 4x4)", kernels.quad_forms_numba,
            kernels.quad_forms_numpy, mats, phi)


if __name__ == "__main__":
    main()
