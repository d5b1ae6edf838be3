"""Real-time Gaussian state estimator driven by the homodyne record.

The filter tracks five moments of the atomic state: the means <X>, <P> and
the second moments V_x, V_p, C_xp := <XP+PX> - 2<X><P>.  Their equations of
motion follow from the conditioned master equation via

    d<A> = <-i[A, H]> dt - G_m <[[A, c], c]> dt
           - sqrt(2 eta G_m) ( <[A, c]_+> - 2<A><c> ) dW,

with c = cos^2(k X), evaluated for A in {X, P, X^2, P^2, XP+PX} and every
expectation closed under a Gaussian phase-space ansatz:

    <exp(iuX)> = exp(iu<X> - u^2 V_x / 2),

plus its derivatives for first- and second-moment-weighted averages (Weyl
ordering supplies an extra -f''(X)/4 when symmetrizing P^2 against f(X)).
Writing E = exp(-2 k^2 V_x), c2 = cos(2k<X>), s2 = sin(2k<X>),
E4 = exp(-8 k^2 V_x), c4 = cos(4k<X>), Q = sqrt(2 eta G_m), the closed system
driven by the innovation dW is

    d<X> = 2 pi <P> dt                                   + 2 Q k V_x E s2 dW
    d<P> = -V k E s2 dt                                  + Q k C E s2 dW
    dV_x = [2 pi C - 4 Q^2 k^2 V_x^2 E^2 s2^2] dt        + 4 Q k^2 V_x^2 E c2 dW
    dV_p = [-2 V k^2 C E c2 + G_m k^2 (1 - E4 c4)
            - Q^2 k^2 C^2 E^2 s2^2] dt                   - Q k^2 E c2 (1 - C^2) dW
    dC   = [4 pi V_p - 4 V k^2 V_x E c2
            - 4 Q^2 k^2 V_x C E^2 s2^2] dt               + 4 Q k^2 V_x C E c2 dW

The filter consumes only (dr, V(t), parameters): the innovation is inferred
by inverting the photocurrent relation with the filter's OWN predicted
<cos^2(kX)>, never with true-state information.

Integration is plain Euler-Maruyama at the control-loop step: the filter has
to run in real time, so no sub-stepping is used.  Rare stochastic excursions
that break the covariance bounds are clamped back and counted; trajectories
with many clamps should be treated as filter failures by the caller.

Every function broadcasts over leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ScaledParams
from .errors import EstimatorDivergedError

UNCERTAINTY_FLOOR = 0.25       # V_x V_p - (C/2)^2 for a pure Gaussian state
UNCERTAINTY_TOL = 1e-6
VARIANCE_FLOOR = 1e-10
# At eta = 1 the filter purifies and rides the uncertainty floor, where the
# Euler-Maruyama step noise produces benign ~1e-4-scale excursions below it
# every few steps.  Those are projected back silently; only violations beyond
# this margin (or a collapsed variance) count toward the failure diagnostics.
CLAMP_COUNT_MARGIN = 0.025


def position_variance_cap(ktilde: float) -> float:
    """Largest meaningful position variance for the filter: the uniform
    distribution over one lattice period.

    The measured observable cos^2(ktilde*X) is (pi/ktilde)-periodic, so the
    record carries position information only modulo one period.  Letting V_x
    grow past the uniform-distribution variance (period^2/12) drives the
    closure factor exp(-2 ktilde^2 V_x) to zero, at which point every
    innovation gain vanishes and the filter freezes in a state of permanent
    ignorance while the loop keeps heating the atom.  Capping V_x at the
    maximum-entropy value keeps the gains alive so the filter can re-acquire
    after a delocalization episode; capped steps are counted as clamp events
    (a capped filter is a stressed filter).
    """
    period = math.pi / ktilde
    return period * period / 12.0


@dataclass
class GaussianState:
    """Five-moment Gaussian description of the atomic state."""

    x_mean: float | np.ndarray = 0.0
    p_mean: float | np.ndarray = 0.0
    vx: float | np.ndarray = 0.5
    vp: float | np.ndarray = 0.5
    cxp: float | np.ndarray = 0.0

    def uncertainty_product(self):
        return self.vx * self.vp - (self.cxp / 2.0) ** 2

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(
            self.x_mean, self.p_mean, self.vx, self.vp, self.cxp))


@dataclass
class InnovationRecord:
    """Noise increment the filter inferred from the record, and its prediction."""

    dw_est: float | np.ndarray
    predicted_cos_sq: float | np.ndarray


def gaussian_closure(g: GaussianState, u) -> complex | np.ndarray:
    """<exp(iuX)> under the Gaussian ansatz."""
    u = np.asarray(u, dtype=float)
    return np.exp(1j * u * g.x_mean - 0.5 * u**2 * g.vx)


def cos2k_mean(g: GaussianState, ktilde: float):
    """<cos(2kX)> = Re <exp(2ikX)>."""
    return np.cos(2 * ktilde * np.asarray(g.x_mean)) * np.exp(-2 * ktilde**2 * np.asarray(g.vx))


def cos_sq_mean(g: GaussianState, ktilde: float):
    """<cos^2(kX)> = (1 + <cos 2kX>)/2."""
    return 0.5 * (1.0 + cos2k_mean(g, ktilde))


def estimator_step(g: GaussianState, dr, amplitude, p: ScaledParams, dt: float,
                   gamma_scale=1.0, check_finite: bool = True):
    """Advance the filter one step from a photocurrent increment.

    Returns ``(state, innovation, clamped)`` where ``clamped`` marks
    trajectories whose covariances needed projection back to the physical
    region this step.
    """
    k = p.ktilde
    gm = p.gamma * np.asarray(gamma_scale, dtype=float)
    q2 = 2.0 * p.eta * gm                 # Q^2
    q = np.sqrt(q2)

    x, pm = np.asarray(g.x_mean, dtype=float), np.asarray(g.p_mean, dtype=float)
    vx, vp, c = (np.asarray(g.vx, dtype=float), np.asarray(g.vp, dtype=float),
                 np.asarray(g.cxp, dtype=float))
    amplitude = np.asarray(amplitude, dtype=float)

    e2 = np.exp(-2.0 * k**2 * vx)
    c2 = np.cos(2.0 * k * x)
    s2 = np.sin(2.0 * k * x)
    e4 = e2 * e2 * e2 * e2
    c4 = np.cos(4.0 * k * x)

    cos_sq = 0.5 * (1.0 + e2 * c2)
    dw = dr / math.sqrt(p.eta) + np.sqrt(8.0 * p.eta * gm) * cos_sq * dt

    es2 = e2 * s2
    ec2 = e2 * c2
    x_new = x + 2.0 * math.pi * pm * dt + 2.0 * q * k * vx * es2 * dw
    p_new = pm - amplitude * k * es2 * dt + q * k * c * es2 * dw
    vx_new = vx + (2.0 * math.pi * c - 4.0 * q2 * k**2 * vx**2 * es2**2) * dt \
        + 4.0 * q * k**2 * vx**2 * ec2 * dw
    vp_new = vp + (-2.0 * amplitude * k**2 * c * ec2
                   + gm * k**2 * (1.0 - e4 * c4)
                   - q2 * k**2 * c**2 * es2**2) * dt \
        - q * k**2 * ec2 * (1.0 - c**2) * dw
    c_new = c + (4.0 * math.pi * vp - 4.0 * amplitude * k**2 * vx * ec2
                 - 4.0 * q2 * k**2 * vx * c * es2**2) * dt \
        + 4.0 * q * k**2 * vx * c * ec2 * dw

    vx_new, vp_new, c_new, clamped = _project_covariances(
        vx_new, vp_new, c_new, position_variance_cap(k))

    if check_finite:
        finite = (np.isfinite(x_new) & np.isfinite(p_new) & np.isfinite(vx_new)
                  & np.isfinite(vp_new) & np.isfinite(c_new))
        if not np.all(finite):
            raise EstimatorDivergedError("estimator produced a non-finite moment")

    state = GaussianState(x_mean=x_new, p_mean=p_new, vx=vx_new, vp=vp_new,
                          cxp=c_new)
    return state, InnovationRecord(dw_est=dw, predicted_cos_sq=cos_sq), clamped


def _project_covariances(vx, vp, c, vx_cap):
    """Clamp (V_x, V_p, C) to V_x,V_p > 0, V_x <= cap, V_xV_p-(C/2)^2 >= 1/4.

    Every uncertainty violation beyond UNCERTAINTY_TOL is projected (the
    bound holds at all times); only violations beyond CLAMP_COUNT_MARGIN,
    collapsed variances, or a saturated position variance are reported as
    clamp events.
    """
    bad_var = (vx < VARIANCE_FLOOR) | (vp < VARIANCE_FLOOR)
    capped = vx > vx_cap
    vx = np.clip(vx, VARIANCE_FLOOR, vx_cap)
    vp = np.maximum(vp, VARIANCE_FLOOR)
    u = vx * vp - (c / 2.0) ** 2
    bad_u = u < UNCERTAINTY_FLOOR - UNCERTAINTY_TOL
    # first inflate the variances if their product alone is below the floor,
    # then shrink the correlation to restore the bound
    prod = vx * vp
    scale = np.where(bad_u & (prod < UNCERTAINTY_FLOOR),
                     np.sqrt(UNCERTAINTY_FLOOR / prod), 1.0)
    vx = vx * scale
    vp = vp * scale
    c_cap = 2.0 * np.sqrt(np.maximum(vx * vp - UNCERTAINTY_FLOOR, 0.0))
    c = np.where(bad_u, np.clip(c, -c_cap, c_cap), c)
    counted = bad_var | capped | (u < UNCERTAINTY_FLOOR - CLAMP_COUNT_MARGIN)
    return vx, vp, c, counted
