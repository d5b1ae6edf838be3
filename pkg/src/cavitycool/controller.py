"""Bang-bang feedback on the lattice depth, triggered by a quadratic fit.

The controller watches the trigger signal s(t) = -<cos^2(ktilde X)> (from the
estimator, the raw photocurrent, or the true state), keeps the most recent
``fit_window`` samples, least-squares fits a quadratic through them, and
switches the drive on the sign of the fitted slope at the newest time:

    slope > 0  (signal rising toward a maximum, atom climbing)  -> (1+eps)^2 Vmax
    slope < 0  (signal falling toward a minimum)                -> (1-eps)^2 Vmax
    slope == 0                                                  -> hold

Switching low at the signal's maxima and high at its minima extracts work
every cycle; the slope-sign rule is the continuous-time version of that
extremal schedule and tolerates noisy signals because the window fit acts as
a smoothing filter.

The fit is evaluated in the shifted time tau = t - t_now, where the basis
[tau^2, tau, 1] is well conditioned for any absolute time; the slope at the
newest sample is then simply the linear coefficient.  On a uniform grid the
least-squares solution is a fixed linear functional of the window, so the
solver rows are precomputed per window length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ControlConfig

# drive amplitude codes
NOMINAL, LOW, HIGH = 0, 1, 2


def amplitude_table(vmax: float, epsilon: float) -> np.ndarray:
    """Allowed V(t) values indexed by code: nominal, extreme low, extreme high."""
    return np.array([vmax, (1.0 - epsilon) ** 2 * vmax, (1.0 + epsilon) ** 2 * vmax])


@dataclass
class QuadraticFit:
    """s(t_now + tau) ~= a tau^2 + b tau + c over the current window."""

    a: float
    b: float
    c: float
    t_now: float
    n_points: int

    @property
    def slope_at_now(self) -> float:
        return self.b


class _FitWeights:
    """Pseudoinverse rows for the [tau^2, tau, 1] basis on uniform windows."""

    def __init__(self, dt: float):
        self.dt = dt
        self._cache: dict[int, np.ndarray] = {}

    def rows(self, n: int) -> np.ndarray:
        w = self._cache.get(n)
        if w is None:
            tau = (np.arange(n) - (n - 1)) * self.dt
            design = np.stack([tau**2, tau, np.ones(n)], axis=1)
            w = np.linalg.pinv(design)          # (3, n)
            self._cache[n] = w
        return w

    def slope_row(self, n: int) -> np.ndarray:
        return self.rows(n)[1]


@dataclass
class ControllerState:
    """Signal history plus the currently commanded amplitude."""

    config: ControlConfig
    vmax: float
    history: np.ndarray = field(init=False)
    n_filled: int = 0
    last_time: float | None = None
    amplitude_code: int = NOMINAL
    active: bool = False

    def __post_init__(self):
        self.history = np.zeros(self.config.fit_window)
        self._weights = _FitWeights(self.config.dt)
        self._amps = amplitude_table(self.vmax, self.config.epsilon)

    @property
    def current_amplitude(self) -> float:
        return float(self._amps[self.amplitude_code])


def push_and_fit(cs: ControllerState, t: float, signal: float) -> QuadraticFit | None:
    """Append a signal sample and fit the window; None while under 3 samples."""
    if not np.isfinite(signal):
        raise ValueError(f"controller signal must be finite, got {signal!r}")
    dt = cs.config.dt
    if cs.last_time is not None and abs(t - (cs.last_time + dt)) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(
            f"non-monotonic controller time: expected {cs.last_time + dt}, got {t}")
    cs.last_time = t
    w = cs.config.fit_window
    if cs.n_filled < w:
        cs.history[cs.n_filled] = signal
        cs.n_filled += 1
    else:
        cs.history[:-1] = cs.history[1:]
        cs.history[-1] = signal
    n = cs.n_filled
    if n < 3:
        return None
    window = cs.history[:n]
    a, b, c = cs._weights.rows(n) @ window
    return QuadraticFit(a=float(a), b=float(b), c=float(c), t_now=t, n_points=n)


def decide_code(slope, previous_code):
    """Slope-sign switching rule; broadcasts over trajectory batches.

    NaN slopes (failed trajectories) hold the previous amplitude.
    """
    return np.where(slope > 0, HIGH, np.where(slope < 0, LOW, previous_code))


def decide(cs: ControllerState, fit: QuadraticFit | None, cc: ControlConfig,
           t: float) -> float:
    """Amplitude to command for the next step (updates the controller state)."""
    cs.active = t >= cc.feedback_start_time
    if not cs.active or fit is None:
        cs.amplitude_code = NOMINAL
        return cs.current_amplitude
    cs.amplitude_code = int(decide_code(fit.slope_at_now, cs.amplitude_code))
    return cs.current_amplitude


def photocurrent_signal(dr, p_gamma_eff: float, eta: float, dt: float):
    """Rescale a record increment so its mean is -<cos^2(ktilde X)>.

    The record satisfies E[dr] = -eta*sqrt(8*G_m)*<cos^2> dt, so dividing by
    eta*sqrt(8*G_m)*dt gives an unbiased (noisy) sample of the trigger signal.
    """
    return dr / (eta * np.sqrt(8.0 * p_gamma_eff) * dt)


def select_signal_source(source: str, *, est_cos_sq=None, true_cos_sq=None,
                         dr=None, gamma_eff=None, eta=None, dt=None):
    """Trigger-signal sample for the configured source (all share units)."""
    if source == "estimator":
        return -np.asarray(est_cos_sq)
    if source == "truestate":
        return -np.asarray(true_cos_sq)
    if source == "photocurrent":
        return photocurrent_signal(dr, gamma_eff, eta, dt)
    raise ValueError(f"no trigger signal for source {source!r}")
