"""Matrix-vector product kernels, the solver's hot loop.

Two builds of each kernel exist:

* a numba ``@njit`` row loop, compiled on first use and cached on disk;
* a pure-numpy fallback (BLAS ``@`` for dense, ``bincount`` segment sums
  for CSR).

The numba build is selected when numba imports cleanly and the environment
variable ``CGKIT_DISABLE_NUMBA`` is unset (any of ``1/true/yes/on`` forces
the numpy path).  ``NUMBA_ENABLED`` reports which build is live; the
``*_numpy`` functions stay importable either way so the two paths can be
benchmarked against each other (see ``benchmarks/bench_kernels.py``).

Kernels assume validated inputs: float64 data, int64 CSR index arrays,
matching shapes.  Callers (``cgkit.linalg``) enforce that.  All loops are
sequential, so results are deterministic; the dense numba loop and the CSR
numba loop accumulate in the same order, which makes dense and CSR products
of the same matrix agree to the last bit when stored entries are in
row-major order.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "dense_matvec",
    "csr_matvec",
    "dense_matvec_numpy",
    "csr_matvec_numpy",
    "dense_matvec_numba",
    "csr_matvec_numba",
]

_DISABLE_VALUES = {"1", "true", "yes", "on"}


def numba_disabled_by_env() -> bool:
    return os.environ.get("CGKIT_DISABLE_NUMBA", "").strip().lower() in _DISABLE_VALUES


def dense_matvec_numpy(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Dense product ``a @ x`` (BLAS)."""
    return a @ x


def csr_matvec_numpy(indptr: np.ndarray, indices: np.ndarray,
                     data: np.ndarray, x: np.ndarray) -> np.ndarray:
    """CSR product via per-row segment sums.

    ``bincount`` handles empty rows (they contribute nothing and stay 0).
    """
    n = indptr.size - 1
    prods = data * x[indices]
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=prods, minlength=n)


dense_matvec_numba = None
csr_matvec_numba = None
NUMBA_ENABLED = False

if not numba_disabled_by_env():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - depends on environment
        pass
    else:
        @njit(cache=True)
        def _dense_matvec_jit(a, x):
            n = a.shape[0]
            y = np.empty(n)
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += a[i, j] * x[j]
                y[i] = acc
            return y

        @njit(cache=True)
        def _csr_matvec_jit(indptr, indices, data, x):
            n = indptr.size - 1
            y = np.empty(n)
            for i in range(n):
                acc = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    acc += data[p] * x[indices[p]]
                y[i] = acc
            return y

        dense_matvec_numba = _dense_matvec_jit
        csr_matvec_numba = _csr_matvec_jit
        NUMBA_ENABLED = True

if NUMBA_ENABLED:
    dense_matvec = dense_matvec_numba
    csr_matvec = csr_matvec_numba
else:
    dense_matvec = dense_matvec_numpy
    csr_matvec = csr_matvec_numpy
