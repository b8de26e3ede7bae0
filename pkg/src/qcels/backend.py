"""Kernel backends for the hot loops: shot sampling and objective scans.

Two interchangeable implementations exist for every kernel: a numba @njit
version and a pure-numpy version.  The active one is chosen by the
environment variable ``QCELS_BACKEND`` (``numba`` or ``numpy``; default is
numba when importable) and can be switched at runtime with `set_backend`.

The sampling kernels return integer shot counts only.  All floating-point
assembly of Z values happens in shared numpy code, so both backends produce
bit-identical datasets.  `benchmarks/backend_bench.py` times the two paths
against each other.
"""

from __future__ import annotations

import os

import numpy as np

from . import rng

_GOLDEN = rng.GOLDEN


# ---------------------------------------------------------------------------
# numpy kernels (reference implementation)


def _sample_plain_numpy(seed, n_points, n_shots, p_re, p_im):
    ks = np.arange(n_shots, dtype=np.uint64)
    sx = np.empty(n_points, dtype=np.int64)
    sy = np.empty(n_points, dtype=np.int64)
    for n in range(n_points):
        ux = rng.uniforms(seed, n, ks, 1)
        uy = rng.uniforms(seed, n, ks, 2)
        sx[n] = 2 * np.count_nonzero(ux < p_re[n]) - n_shots
        sy[n] = 2 * np.count_nonzero(uy < p_im[n]) - n_shots
    return sx, sy


def _sample_filtered_numpy(seed, n_points, n_shots, cum_beta, p_re, p_im):
    n_bins = cum_beta.shape[0]
    ks = np.arange(n_shots, dtype=np.uint64)
    cnt = np.empty((n_points, n_bins), dtype=np.int64)
    sx = np.empty((n_points, n_bins), dtype=np.int64)
    sy = np.empty((n_points, n_bins), dtype=np.int64)
    for n in range(n_points):
        u0 = rng.uniforms(seed, n, ks, 0)
        idx = np.searchsorted(cum_beta, u0, side="right")
        x = np.where(rng.uniforms(seed, n, ks, 1) < p_re[n, idx], 1.0, -1.0)
        y = np.where(rng.uniforms(seed, n, ks, 2) < p_im[n, idx], 1.0, -1.0)
        cnt[n] = np.bincount(idx, minlength=n_bins)
        # bincount sums of +-1 stay well inside the float53 exact range
        sx[n] = np.bincount(idx, weights=x, minlength=n_bins).astype(np.int64)
        sy[n] = np.bincount(idx, weights=y, minlength=n_bins).astype(np.int64)
    return cnt, sx, sy


def _objective_scan_numpy(values, tau, thetas):
    n = values.shape[0]
    w = np.exp(1j * tau * thetas)
    s = np.full(thetas.shape, values[n - 1], dtype=np.complex128)
    for i in range(n - 2, -1, -1):
        s = s * w + values[i]
    return s.real * s.real + s.imag * s.imag


# ---------------------------------------------------------------------------
# numba kernels (compiled lazily on first use)

_NUMBA_IMPLS = None


def _build_numba_impls():
    import numba

    u64 = np.uint64
    mix1 = np.uint64(0xBF58476D1CE4E5B9)
    mix2 = np.uint64(0x94D049BB133111EB)
    golden = _GOLDEN
    inv53 = 1.0 / float(1 << 53)

    @numba.njit(numba.uint64(numba.uint64), cache=True, nogil=True)
    def mix64(z):
        z = (z ^ (z >> u64(30))) * mix1
        z = (z ^ (z >> u64(27))) * mix2
        return z ^ (z >> u64(31))

    @numba.njit(numba.float64(numba.uint64, numba.uint64, numba.uint64,
                              numba.uint64), cache=True, nogil=True)
    def uniform3(seed, a, b, c):
        h = mix64(seed + golden)
        h = mix64(h + golden + a)
        h = mix64(h + golden + b)
        h = mix64(h + golden + c)
        return (h >> u64(11)) * inv53

    @numba.njit(cache=True, nogil=True)
    def sample_plain(seed, n_points, n_shots, p_re, p_im):
        sx = np.empty(n_points, dtype=np.int64)
        sy = np.empty(n_points, dtype=np.int64)
        s = u64(seed)
        for n in range(n_points):
            ax = 0
            ay = 0
            for k in range(n_shots):
                if uniform3(s, u64(n), u64(k), u64(1)) < p_re[n]:
                    ax += 1
                if uniform3(s, u64(n), u64(k), u64(2)) < p_im[n]:
                    ay += 1
            sx[n] = 2 * ax - n_shots
            sy[n] = 2 * ay - n_shots
        return sx, sy

    @numba.njit(cache=True, nogil=True)
    def sample_filtered(seed, n_points, n_shots, cum_beta, p_re, p_im):
        n_bins = cum_beta.shape[0]
        cnt = np.zeros((n_points, n_bins), dtype=np.int64)
        sx = np.zeros((n_points, n_bins), dtype=np.int64)
        sy = np.zeros((n_points, n_bins), dtype=np.int64)
        s = u64(seed)
        for n in range(n_points):
            for k in range(n_shots):
                u0 = uniform3(s, u64(n), u64(k), u64(0))
                idx = np.searchsorted(cum_beta, u0, side="right")
                cnt[n, idx] += 1
                if uniform3(s, u64(n), u64(k), u64(1)) < p_re[n, idx]:
                    sx[n, idx] += 1
                else:
                    sx[n, idx] -= 1
                if uniform3(s, u64(n), u64(k), u64(2)) < p_im[n, idx]:
                    sy[n, idx] += 1
                else:
                    sy[n, idx] -= 1
        return cnt, sx, sy

    @numba.njit(cache=True, nogil=True)
    def objective_scan(values, tau, thetas):
        n = values.shape[0]
        out = np.empty(thetas.shape[0], dtype=np.float64)
        for g in range(thetas.shape[0]):
            w = np.exp(1j * tau * thetas[g])
            s = values[n - 1]
            for i in range(n - 2, -1, -1):
                s = s * w + values[i]
            out[g] = s.real * s.real + s.imag * s.imag
        return out

    return {
        "sample_plain": sample_plain,
        "sample_filtered": sample_filtered,
        "objective_scan": objective_scan,
    }


def _numba_impls():
    global _NUMBA_IMPLS
    if _NUMBA_IMPLS is None:
        _NUMBA_IMPLS = _build_numba_impls()
    return _NUMBA_IMPLS


# ---------------------------------------------------------------------------
# dispatch

_NUMPY_IMPLS = {
    "sample_plain": _sample_plain_numpy,
    "sample_filtered": _sample_filtered_numpy,
    "objective_scan": _objective_scan_numpy,
}


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _default_backend() -> str:
    name = os.environ.get("QCELS_BACKEND", "").strip().lower()
    if name in ("numba", "numpy"):
        if name == "numba" and not _numba_available():
            raise RuntimeError("QCELS_BACKEND=numba but numba is not importable")
        return name
    return "numba" if _numba_available() else "numpy"


_ACTIVE = _default_backend()


def active_backend() -> str:
    return _ACTIVE


def set_backend(name: str) -> None:
    """Select 'numba' or 'numpy' kernels for subsequent calls."""
    global _ACTIVE
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _ACTIVE = name


def _impl(kernel):
    if _ACTIVE == "numba":
        return _numba_impls()[kernel]
    return _NUMPY_IMPLS[kernel]


def sample_plain(seed, n_points, n_shots, p_re, p_im):
    """Shot-count sums for the plain Hadamard-test dataset.

    Returns integer arrays (sx, sy) of summed +-1 outcomes per time index.
    """
    p_re = np.ascontiguousarray(p_re, dtype=np.float64)
    p_im = np.ascontiguousarray(p_im, dtype=np.float64)
    return _impl("sample_plain")(np.uint64(seed), int(n_points), int(n_shots),
                                 p_re, p_im)


def sample_filtered(seed, n_points, n_shots, cum_beta, p_re, p_im):
    """Shot counts for the filtered dataset, grouped by shift bin.

    Returns (cnt, sx, sy) of shape (n_points, n_bins): draw counts and
    summed +-1 outcomes for each time index and random shift.
    """
    cum_beta = np.ascontiguousarray(cum_beta, dtype=np.float64)
    p_re = np.ascontiguousarray(p_re, dtype=np.float64)
    p_im = np.ascontiguousarray(p_im, dtype=np.float64)
    return _impl("sample_filtered")(np.uint64(seed), int(n_points),
                                    int(n_shots), cum_beta, p_re, p_im)


def objective_scan(values, tau, thetas):
    """|sum_n Z_n e^{i theta n tau}|^2 evaluated for an array of thetas."""
    values = np.ascontiguousarray(values, dtype=np.complex128)
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    return _impl("objective_scan")(values, float(tau), thetas)


def warmup() -> None:
    """Trigger JIT compilation of the active backend on tiny inputs."""
    p = np.array([0.5])
    sample_plain(1, 1, 1, p, p)
    sample_filtered(1, 1, 1, np.array([1.0]), p[None, :], p[None, :])
    objective_scan(np.array([1j]), 1.0, np.array([0.0]))
