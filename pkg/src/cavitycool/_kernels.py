"""Fused per-step kernels for the trajectory engine.

The lockstep engine spends its time in a handful of elementwise passes over
the (batch, grid) state between FFTs.  When numba is importable these are
compiled into single fused loops; otherwise numpy equivalents with identical
signatures are used.  The physics lives in ``truestate``/``estimator`` as
plain numpy reference implementations; unit tests pin the kernels against
them.
"""

from __future__ import annotations

import math

import numpy as np

from .estimator import (UNCERTAINTY_FLOOR, UNCERTAINTY_TOL, VARIANCE_FLOOR,
                        CLAMP_COUNT_MARGIN, position_variance_cap)

try:  # pragma: no cover - whichever backend the environment provides
    import numba

    _njit = numba.njit(cache=True, fastmath=False)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def _njit(fn):
        return None


def _phase_multiply_py(psi, phases):
    psi *= phases


def _phase_multiply_row_py(psi, phase_row):
    psi *= phase_row


def _measure_update_py(psi, exp_v, c_arr, gm_dt, sqrt2gm_dw, c_mean, norm_dev):
    """Trailing half potential phase + measurement + renormalization.

    Returns per-row <cos^2> (pre-measurement) and the pre-renormalization
    norm deviation; ``psi`` is updated in place.
    """
    psi *= exp_v
    prob = psi.real**2 + psi.imag**2
    np.matmul(prob, c_arr, out=c_mean)
    dev = c_arr - c_mean[:, None]
    factor = 1.0 - dev * (gm_dt[:, None] * dev + sqrt2gm_dw[:, None])
    nrm2 = np.einsum("bn,bn->b", prob, factor * factor)
    norm_dev[:] = nrm2 - 1.0
    psi *= factor / np.sqrt(nrm2)[:, None]


def _estimator_update_py(m, dr, amplitude, gm, eta, k, dt, clamped):
    """Five-moment filter update, in place on m = (x, p, vx, vp, cxp) rows."""
    x, pm, vx, vp, c = m
    q2 = 2.0 * eta * gm
    q = np.sqrt(q2)
    e2 = np.exp(-2.0 * k * k * vx)
    c2 = np.cos(2.0 * k * x)
    s2 = np.sin(2.0 * k * x)
    e4 = e2 * e2 * e2 * e2
    c4 = np.cos(4.0 * k * x)
    cos_sq = 0.5 * (1.0 + e2 * c2)
    dw = dr / np.sqrt(eta) + np.sqrt(8.0 * eta * gm) * cos_sq * dt
    es2 = e2 * s2
    ec2 = e2 * c2
    k2 = k * k
    x_new = x + 2.0 * math.pi * pm * dt + 2.0 * q * k * vx * es2 * dw
    p_new = pm - amplitude * k * es2 * dt + q * k * c * es2 * dw
    vx_new = vx + (2.0 * math.pi * c - 4.0 * q2 * k2 * vx * vx * es2 * es2) * dt \
        + 4.0 * q * k2 * vx * vx * ec2 * dw
    vp_new = vp + (-2.0 * amplitude * k2 * c * ec2 + gm * k2 * (1.0 - e4 * c4)
                   - q2 * k2 * c * c * es2 * es2) * dt \
        - q * k2 * ec2 * (1.0 - c * c) * dw
    c_new = c + (4.0 * math.pi * vp - 4.0 * amplitude * k2 * vx * ec2
                 - 4.0 * q2 * k2 * vx * c * es2 * es2) * dt \
        + 4.0 * q * k2 * vx * c * ec2 * dw

    vx_cap = position_variance_cap(k)
    bad_var = (vx_new < VARIANCE_FLOOR) | (vp_new < VARIANCE_FLOOR)
    capped = vx_new > vx_cap
    vx_new = np.clip(vx_new, VARIANCE_FLOOR, vx_cap)
    vp_new = np.maximum(vp_new, VARIANCE_FLOOR)
    u = vx_new * vp_new - 0.25 * c_new * c_new
    bad_u = u < UNCERTAINTY_FLOOR - UNCERTAINTY_TOL
    prod = vx_new * vp_new
    scale = np.where(bad_u & (prod < UNCERTAINTY_FLOOR),
                     np.sqrt(UNCERTAINTY_FLOOR / prod), 1.0)
    vx_new = vx_new * scale
    vp_new = vp_new * scale
    c_cap = 2.0 * np.sqrt(np.maximum(vx_new * vp_new - UNCERTAINTY_FLOOR, 0.0))
    c_new = np.where(bad_u, np.clip(c_new, -c_cap, c_cap), c_new)
    clamped[:] = bad_var | capped | (u < UNCERTAINTY_FLOOR - CLAMP_COUNT_MARGIN)
    m[0], m[1], m[2], m[3], m[4] = x_new, p_new, vx_new, vp_new, c_new


if HAVE_NUMBA:

    @_njit
    def _phase_multiply(psi, phases):
        b, n = psi.shape
        for i in range(b):
            for j in range(n):
                psi[i, j] = psi[i, j] * phases[i, j]

    @_njit
    def _phase_multiply_row(psi, phase_row):
        b, n = psi.shape
        for i in range(b):
            for j in range(n):
                psi[i, j] = psi[i, j] * phase_row[j]

    @_njit
    def _measure_update(psi, exp_v, c_arr, gm_dt, sqrt2gm_dw, c_mean, norm_dev):
        b, n = psi.shape
        for i in range(b):
            cm = 0.0
            for j in range(n):
                z = psi[i, j] * exp_v[i, j]
                psi[i, j] = z
                cm += (z.real * z.real + z.imag * z.imag) * c_arr[j]
            c_mean[i] = cm
            a_det = gm_dt[i]
            a_sto = sqrt2gm_dw[i]
            nrm2 = 0.0
            for j in range(n):
                dev = c_arr[j] - cm
                f = 1.0 - dev * (a_det * dev + a_sto)
                z = psi[i, j] * f
                psi[i, j] = z
                nrm2 += z.real * z.real + z.imag * z.imag
            norm_dev[i] = nrm2 - 1.0
            inv = 1.0 / math.sqrt(nrm2)
            for j in range(n):
                psi[i, j] = psi[i, j] * inv

    @_njit
    def _estimator_update(m, dr, amplitude, gm, eta, k, dt, clamped):
        b = m.shape[1]
        sqrt_eta = math.sqrt(eta)
        k2 = k * k
        period = math.pi / k
        vx_cap = period * period / 12.0
        for i in range(b):
            x = m[0, i]
            pm = m[1, i]
            vx = m[2, i]
            vp = m[3, i]
            c = m[4, i]
            g = gm[i]
            q2 = 2.0 * eta * g
            q = math.sqrt(q2)
            e2 = math.exp(-2.0 * k2 * vx)
            c2 = math.cos(2.0 * k * x)
            s2 = math.sin(2.0 * k * x)
            e4 = e2 * e2 * e2 * e2
            c4 = math.cos(4.0 * k * x)
            cos_sq = 0.5 * (1.0 + e2 * c2)
            dw = dr[i] / sqrt_eta + math.sqrt(8.0 * eta * g) * cos_sq * dt
            es2 = e2 * s2
            ec2 = e2 * c2
            x_new = x + 2.0 * math.pi * pm * dt + 2.0 * q * k * vx * es2 * dw
            p_new = pm - amplitude[i] * k * es2 * dt + q * k * c * es2 * dw
            vx_new = vx + (2.0 * math.pi * c
                           - 4.0 * q2 * k2 * vx * vx * es2 * es2) * dt \
                + 4.0 * q * k2 * vx * vx * ec2 * dw
            vp_new = vp + (-2.0 * amplitude[i] * k2 * c * ec2
                           + g * k2 * (1.0 - e4 * c4)
                           - q2 * k2 * c * c * es2 * es2) * dt \
                - q * k2 * ec2 * (1.0 - c * c) * dw
            c_new = c + (4.0 * math.pi * vp - 4.0 * amplitude[i] * k2 * vx * ec2
                         - 4.0 * q2 * k2 * vx * c * es2 * es2) * dt \
                + 4.0 * q * k2 * vx * c * ec2 * dw

            bad_var = (vx_new < VARIANCE_FLOOR) or (vp_new < VARIANCE_FLOOR)
            capped = vx_new > vx_cap
            if vx_new < VARIANCE_FLOOR:
                vx_new = VARIANCE_FLOOR
            elif vx_new > vx_cap:
                vx_new = vx_cap
            if vp_new < VARIANCE_FLOOR:
                vp_new = VARIANCE_FLOOR
            u = vx_new * vp_new - 0.25 * c_new * c_new
            bad_u = u < UNCERTAINTY_FLOOR - UNCERTAINTY_TOL
            if bad_u:
                prod = vx_new * vp_new
                if prod < UNCERTAINTY_FLOOR:
                    s = math.sqrt(UNCERTAINTY_FLOOR / prod)
                    vx_new *= s
                    vp_new *= s
                c_cap = 2.0 * math.sqrt(max(vx_new * vp_new - UNCERTAINTY_FLOOR, 0.0))
                if c_new > c_cap:
                    c_new = c_cap
                elif c_new < -c_cap:
                    c_new = -c_cap
            clamped[i] = bad_var or capped or (u < UNCERTAINTY_FLOOR - CLAMP_COUNT_MARGIN)
            m[0, i] = x_new
            m[1, i] = p_new
            m[2, i] = vx_new
            m[3, i] = vp_new
            m[4, i] = c_new

else:  # pragma: no cover - numpy fallback
    _phase_multiply = _phase_multiply_py
    _phase_multiply_row = _phase_multiply_row_py
    _measure_update = _measure_update_py
    _estimator_update = _estimator_update_py


phase_multiply = _phase_multiply
phase_multiply_row = _phase_multiply_row
measure_update = _measure_update
estimator_update = _estimator_update
