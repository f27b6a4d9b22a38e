"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``QSDUAL_BACKEND`` ("numba" or "numpy").  When unset, numba is used if it
imports, numpy otherwise.  Both implementations of every kernel are kept
importable (``numpy_kernels`` / ``numba_kernels``) so they can be benchmarked
against each other; see benchmarks/bench_kernels.py.

Kernels here are deliberately low-level: they take plain ndarrays plus
per-axis geometry factors and know nothing about grids or fields.
"""

from __future__ import annotations

import math
import os

import numpy as np

_EPS = float(np.finfo(np.float64).eps)
_SQRT2 = math.sqrt(2.0)
_FOURTH_ROOT_2 = 2.0 ** 0.25


def antideriv(s):
    """Closed-form antiderivative of sqrt(1 + 2 t^2): elementwise, ndarray in/out."""
    s = np.asarray(s, dtype=np.float64)
    return s * np.sqrt(1.0 + 2.0 * s * s) / 2.0 + np.arcsinh(_SQRT2 * s) / (2.0 * _SQRT2)


def _tol_scale(tol: float, a):
    # absolute tolerance, relaxed to a few ulps of the target once |t| is large
    # enough that float64 cannot represent the requested absolute accuracy
    return np.maximum(tol, 8.0 * _EPS * a)


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------


class numpy_kernels:
    """Vectorized numpy implementations of the hot kernels."""

    name = "numpy"

    @staticmethod
    def invert_antideriv(t: np.ndarray, tol: float, max_iters: int):
        """Solve antideriv(s) = t elementwise by safeguarded Newton.

        Returns (values, fail_index, fail_lo, fail_hi); fail_index is -1 when
        every element converged, else the flat index of the first failure with
        its final bracket.
        """
        t = np.asarray(t, dtype=np.float64)
        a = np.abs(t).ravel()
        sgn = np.sign(t).ravel()
        s = np.minimum(a, _FOURTH_ROOT_2 * np.sqrt(a))
        lo = np.zeros_like(a)
        hi = s + 1.0
        tol_eff = _tol_scale(tol, a)
        done = np.zeros(a.shape, dtype=bool)
        for _ in range(max_iters):
            r = antideriv(s) - a
            done |= np.abs(r) <= tol_eff
            if done.all():
                break
            act = ~done
            hi = np.where(act & (r > 0), np.minimum(hi, s), hi)
            lo = np.where(act & (r <= 0), np.maximum(lo, s), lo)
            cand = s - r / np.sqrt(1.0 + 2.0 * s * s)
            cand = np.where((cand <= lo) | (cand >= hi), 0.5 * (lo + hi), cand)
            s = np.where(act, cand, s)
        else:
            bad = int(np.argmin(done))
            return (sgn * s).reshape(t.shape), bad, float(lo[bad]), float(hi[bad])
        return (sgn * s).reshape(t.shape), -1, 0.0, 0.0

    @staticmethod
    def laplacian_2d(v, face0, invr0, face1, invr1, hinv2):
        n0, n1 = v.shape
        dv0 = v[1:, :] - v[:-1, :]
        flux0 = face0[: n0 - 1, None] * dv0
        br0 = np.empty_like(v)
        br0[0, :] = flux0[0, :]
        br0[1 : n0 - 1, :] = flux0[1:, :] - flux0[:-1, :]
        br0[n0 - 1, :] = face0[n0 - 1] * (0.0 - v[n0 - 1, :]) - flux0[n0 - 2, :]
        dv1 = v[:, 1:] - v[:, :-1]
        flux1 = face1[None, : n1 - 1] * dv1
        br1 = np.empty_like(v)
        br1[:, 0] = flux1[:, 0]
        br1[:, 1 : n1 - 1] = flux1[:, 1:] - flux1[:, :-1]
        br1[:, n1 - 1] = face1[n1 - 1] * (0.0 - v[:, n1 - 1]) - flux1[:, n1 - 2]
        return (br0 * invr0[:, None] + br1 * invr1[None, :]) * hinv2

    @staticmethod
    def laplacian_3d(v, face0, invr0, face1, invr1, face2, invr2, hinv2):
        out = np.zeros_like(v)
        faces = (face0, face1, face2)
        invs = (invr0, invr1, invr2)
        n = v.shape
        for ax in range(3):
            face = faces[ax]
            sh = [1, 1, 1]
            sh[ax] = n[ax]
            dv = np.diff(v, axis=ax)
            flux = face[: n[ax] - 1].reshape([d - (1 if i == ax else 0) for i, d in enumerate(sh)]) * dv
            br = np.empty_like(v)
            idx0 = [slice(None)] * 3
            idx0[ax] = slice(0, 1)
            idxi = [slice(None)] * 3
            idxi[ax] = slice(1, n[ax] - 1)
            idxm = [slice(None)] * 3
            idxm[ax] = slice(n[ax] - 1, n[ax])
            br[tuple(idx0)] = np.take(flux, [0], axis=ax)
            br[tuple(idxi)] = np.take(flux, range(1, n[ax] - 1), axis=ax) - np.take(
                flux, range(0, n[ax] - 2), axis=ax
            )
            br[tuple(idxm)] = face[n[ax] - 1] * (0.0 - np.take(v, [n[ax] - 1], axis=ax)) - np.take(
                flux, [n[ax] - 2], axis=ax
            )
            out += br * invs[ax].reshape(sh)
        return out * hinv2

    @staticmethod
    def gradsq_2d(v, g, gb, face0, rad0, face1, rad1):
        """Face sum of face_weight * (dv)^2 * avg(g); outer ghost value 0 for v, gb for g."""
        n0, n1 = v.shape
        dv0 = v[1:, :] - v[:-1, :]
        gm0 = 0.5 * (g[1:, :] + g[:-1, :])
        s = float(np.sum(face0[: n0 - 1, None] * rad1[None, :] * dv0 * dv0 * gm0))
        s += float(np.sum(face0[n0 - 1] * rad1 * v[n0 - 1, :] ** 2 * (0.5 * (g[n0 - 1, :] + gb))))
        dv1 = v[:, 1:] - v[:, :-1]
        gm1 = 0.5 * (g[:, 1:] + g[:, :-1])
        s += float(np.sum(rad0[:, None] * face1[None, : n1 - 1] * dv1 * dv1 * gm1))
        s += float(np.sum(rad0 * face1[n1 - 1] * v[:, n1 - 1] ** 2 * (0.5 * (g[:, n1 - 1] + gb))))
        return s

    @staticmethod
    def gradsq_3d(v, g, gb, face0, rad0, face1, rad1, face2, rad2):
        n = v.shape
        faces = (face0, face1, face2)
        rads = (rad0, rad1, rad2)
        s = 0.0
        for ax in range(3):
            others = [i for i in range(3) if i != ax]
            W = np.ones(n)
            for o in others:
                sh = [1, 1, 1]
                sh[o] = n[o]
                W = W * rads[o].reshape(sh)
            sh = [1, 1, 1]
            sh[ax] = n[ax] - 1
            dv = np.diff(v, axis=ax)
            gm = 0.5 * (np.take(g, range(1, n[ax]), axis=ax) + np.take(g, range(0, n[ax] - 1), axis=ax))
            Wf = faces[ax][: n[ax] - 1].reshape(sh) * np.take(W, range(0, n[ax] - 1), axis=ax)
            s += float(np.sum(Wf * dv * dv * gm))
            vb = np.take(v, [n[ax] - 1], axis=ax)
            gmb = 0.5 * (np.take(g, [n[ax] - 1], axis=ax) + gb)
            Wb = faces[ax][n[ax] - 1] * np.take(W, [n[ax] - 1], axis=ax)
            s += float(np.sum(Wb * vb * vb * gmb))
        return s


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @njit(cache=True)
    def _antideriv_scalar(s):
        return s * math.sqrt(1.0 + 2.0 * s * s) / 2.0 + math.asinh(_SQRT2 * s) / (2.0 * _SQRT2)

    @njit(cache=True)
    def _invert_nb(t, tol, max_iters):
        flat = t.ravel()
        out = np.empty_like(flat)
        fail = -1
        fail_lo = 0.0
        fail_hi = 0.0
        for i in range(flat.size):
            a = abs(flat[i])
            sgn = 1.0 if flat[i] > 0 else (-1.0 if flat[i] < 0 else 0.0)
            s = min(a, _FOURTH_ROOT_2 * math.sqrt(a))
            lo = 0.0
            hi = s + 1.0
            tol_eff = max(tol, 8.0 * _EPS * a)
            ok = False
            for _ in range(max_iters):
                r = _antideriv_scalar(s) - a
                if abs(r) <= tol_eff:
                    ok = True
                    break
                if r > 0:
                    hi = min(hi, s)
                else:
                    lo = max(lo, s)
                cand = s - r / math.sqrt(1.0 + 2.0 * s * s)
                if cand <= lo or cand >= hi:
                    cand = 0.5 * (lo + hi)
                s = cand
            if not ok and fail < 0:
                fail = i
                fail_lo = lo
                fail_hi = hi
            out[i] = sgn * s
        return out.reshape(t.shape), fail, fail_lo, fail_hi

    @njit(cache=True)
    def _lap2_nb(v, face0, invr0, face1, invr1, hinv2):
        n0, n1 = v.shape
        out = np.empty_like(v)
        for j in range(n0):
            fm0 = face0[j - 1] if j > 0 else 0.0
            fp0 = face0[j]
            for k in range(n1):
                vc = v[j, k]
                vp0 = v[j + 1, k] if j + 1 < n0 else 0.0
                vm0 = v[j - 1, k] if j > 0 else 0.0
                br0 = fp0 * (vp0 - vc) - fm0 * (vc - vm0)
                fm1 = face1[k - 1] if k > 0 else 0.0
                fp1 = face1[k]
                vp1 = v[j, k + 1] if k + 1 < n1 else 0.0
                vm1 = v[j, k - 1] if k > 0 else 0.0
                br1 = fp1 * (vp1 - vc) - fm1 * (vc - vm1)
                out[j, k] = (br0 * invr0[j] + br1 * invr1[k]) * hinv2
        return out

    @njit(cache=True)
    def _lap3_nb(v, face0, invr0, face1, invr1, face2, invr2, hinv2):
        n0, n1, n2 = v.shape
        out = np.empty_like(v)
        for j in range(n0):
            fm0 = face0[j - 1] if j > 0 else 0.0
            fp0 = face0[j]
            for k in range(n1):
                fm1 = face1[k - 1] if k > 0 else 0.0
                fp1 = face1[k]
                for l in range(n2):
                    vc = v[j, k, l]
                    vp0 = v[j + 1, k, l] if j + 1 < n0 else 0.0
                    vm0 = v[j - 1, k, l] if j > 0 else 0.0
                    br0 = fp0 * (vp0 - vc) - fm0 * (vc - vm0)
                    vp1 = v[j, k + 1, l] if k + 1 < n1 else 0.0
                    vm1 = v[j, k - 1, l] if k > 0 else 0.0
                    br1 = fp1 * (vp1 - vc) - fm1 * (vc - vm1)
                    fm2 = face2[l - 1] if l > 0 else 0.0
                    fp2 = face2[l]
                    vp2 = v[j, k, l + 1] if l + 1 < n2 else 0.0
                    vm2 = v[j, k, l - 1] if l > 0 else 0.0
                    br2 = fp2 * (vp2 - vc) - fm2 * (vc - vm2)
                    out[j, k, l] = (br0 * invr0[j] + br1 * invr1[k] + br2 * invr2[l]) * hinv2
        return out

    @njit(cache=True)
    def _gradsq2_nb(v, g, gb, face0, rad0, face1, rad1):
        n0, n1 = v.shape
        s = 0.0
        for j in range(n0):
            for k in range(n1):
                dv = (v[j + 1, k] if j + 1 < n0 else 0.0) - v[j, k]
                gm = 0.5 * (g[j, k] + (g[j + 1, k] if j + 1 < n0 else gb))
                s += face0[j] * rad1[k] * dv * dv * gm
                dv = (v[j, k + 1] if k + 1 < n1 else 0.0) - v[j, k]
                gm = 0.5 * (g[j, k] + (g[j, k + 1] if k + 1 < n1 else gb))
                s += rad0[j] * face1[k] * dv * dv * gm
        return s

    @njit(cache=True)
    def _gradsq3_nb(v, g, gb, face0, rad0, face1, rad1, face2, rad2):
        n0, n1, n2 = v.shape
        s = 0.0
        for j in range(n0):
            for k in range(n1):
                for l in range(n2):
                    dv = (v[j + 1, k, l] if j + 1 < n0 else 0.0) - v[j, k, l]
                    gm = 0.5 * (g[j, k, l] + (g[j + 1, k, l] if j + 1 < n0 else gb))
                    s += face0[j] * rad1[k] * rad2[l] * dv * dv * gm
                    dv = (v[j, k + 1, l] if k + 1 < n1 else 0.0) - v[j, k, l]
                    gm = 0.5 * (g[j, k, l] + (g[j, k + 1, l] if k + 1 < n1 else gb))
                    s += rad0[j] * face1[k] * rad2[l] * dv * dv * gm
                    dv = (v[j, k, l + 1] if l + 1 < n2 else 0.0) - v[j, k, l]
                    gm = 0.5 * (g[j, k, l] + (g[j, k, l + 1] if l + 1 < n2 else gb))
                    s += rad0[j] * rad1[k] * face2[l] * dv * dv * gm
        return s

    class numba_kernels:
        """numba-accelerated kernels; semantics match numpy_kernels."""

        name = "numba"

        @staticmethod
        def invert_antideriv(t, tol, max_iters):
            t = np.ascontiguousarray(t, dtype=np.float64)
            out, fail, lo, hi = _invert_nb(t, tol, max_iters)
            return out, int(fail), float(lo), float(hi)

        @staticmethod
        def laplacian_2d(v, face0, invr0, face1, invr1, hinv2):
            return _lap2_nb(np.ascontiguousarray(v), face0, invr0, face1, invr1, hinv2)

        @staticmethod
        def laplacian_3d(v, face0, invr0, face1, invr1, face2, invr2, hinv2):
            return _lap3_nb(np.ascontiguousarray(v), face0, invr0, face1, invr1, face2, invr2, hinv2)

        @staticmethod
        def gradsq_2d(v, g, gb, face0, rad0, face1, rad1):
            return float(_gradsq2_nb(np.ascontiguousarray(v), np.ascontiguousarray(g), gb, face0, rad0, face1, rad1))

        @staticmethod
        def gradsq_3d(v, g, gb, face0, rad0, face1, rad1, face2, rad2):
            return float(
                _gradsq3_nb(
                    np.ascontiguousarray(v), np.ascontiguousarray(g), gb, face0, rad0, face1, rad1, face2, rad2
                )
            )

else:
    numba_kernels = None


def _select_backend() -> type:
    choice = os.environ.get("QSDUAL_BACKEND", "").strip().lower()
    if choice == "numpy":
        return numpy_kernels
    if choice == "numba":
        if not _HAVE_NUMBA:
            raise ImportError("QSDUAL_BACKEND=numba but numba is not importable")
        return numba_kernels
    if choice:
        raise ValueError(f"unknown QSDUAL_BACKEND value: {choice!r} (expected 'numba' or 'numpy')")
    return numba_kernels if _HAVE_NUMBA else numpy_kernels


active = _select_backend()
BACKEND = active.name
