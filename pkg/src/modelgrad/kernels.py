"""Hot numeric kernels: objective and subgradient sweeps over point sets.

Two interchangeable backends.  The numba one is compiled on first use and
is the default whenever numba imports; set ``MODELGRAD_DISABLE_NUMBA=1``
before import to force the pure-numpy path.  ``IMPLEMENTATIONS`` exposes
both so the kernel benchmark can time them side by side.

All kernels take a C-contiguous (m, n) float64 ``centers`` matrix and a
1-D float64 ``x``.
"""

import os

import numpy as np


def _env_disabled():
    flag = os.environ.get("MODELGRAD_DISABLE_NUMBA", "")
    return flag.strip().lower() in ("1", "true", "yes", "on")


def _ballsum_value_np(centers, x, radius):
    dists = np.sqrt(((centers - x) ** 2).sum(axis=1))
    return float(np.maximum(dists - radius, 0.0).sum())


def _ballsum_subgrad_np(centers, x, radius):
    diff = x[None, :] - centers
    dists = np.sqrt((diff**2).sum(axis=1))
    g = np.zeros_like(x)
    active = dists > radius
    if np.any(active):
        g += (diff[active] / dists[active, None]).sum(axis=0)
    return g


def _minmax_value_np(centers, x):
    dists = np.sqrt(((centers - x) ** 2).sum(axis=1))
    j = int(np.argmax(dists))
    return float(dists[j]), j


NUMBA_ENABLED = False
if not _env_disabled():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass
    else:
        NUMBA_ENABLED = True

        @njit(cache=True)
        def _ballsum_value_nb(centers, x, radius):
            m, n = centers.shape
            total = 0.0
            for k in range(m):
                s = 0.0
                for j in range(n):
                    t = x[j] - centers[k, j]
                    s += t * t
                dist = np.sqrt(s)
                if dist > radius:
                    total += dist - radius
            return total

        @njit(cache=True)
        def _ballsum_subgrad_nb(centers, x, radius):
            m, n = centers.shape
            g = np.zeros(n)
            for k in range(m):
                s = 0.0
                for j in range(n):
                    t = x[j] - centers[k, j]
                    s += t * t
                dist = np.sqrt(s)
                if dist > radius:
                    inv = 1.0 / dist
                    for j in range(n):
                        g[j] += (x[j] - centers[k, j]) * inv
            return g

        @njit(cache=True)
        def _minmax_value_nb(centers, x):
            m, n = centers.shape
            best = -1.0
            best_k = 0
            for k in range(m):
                s = 0.0
                for j in range(n):
                    t = x[j] - centers[k, j]
                    s += t * t
                dist = np.sqrt(s)
                if dist > best:  # strict keeps the lowest attaining index
                    best = dist
                    best_k = k
            return best, best_k


IMPLEMENTATIONS = {
    "numpy": {
        "ballsum_value": _ballsum_value_np,
        "ballsum_subgrad": _ballsum_subgrad_np,
        "minmax_value": _minmax_value_np,
    }
}
if NUMBA_ENABLED:
    IMPLEMENTATIONS["numba"] = {
        "ballsum_value": _ballsum_value_nb,
        "ballsum_subgrad": _ballsum_subgrad_nb,
        "minmax_value": _minmax_value_nb,
    }

_active = IMPLEMENTATIONS["numba" if NUMBA_ENABLED else "numpy"]
ballsum_value = _active["ballsum_value"]
ballsum_subgrad = _active["ballsum_subgrad"]
minmax_value = _active["minmax_value"]
