"""Population-fluctuation spectrum of the driven emitter and noise kernels.

The spectrum S_t(omega) of emitter population fluctuations is computed with
the quantum regression theorem from the 3x3 generator of the zero-temperature
Bloch dynamics, evaluated at the instantaneous detuning.  Averaging its real
part at zero frequency over one mechanical period, with and without a phase
factor at twice the mechanical frequency, yields the two kernels (s0, s2)
that drive the mechanical quadrature scattering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bloch import BlochVector, PhysParams, bloch_steady_state

MIN_WINDOW_PANELS = 64


class UnsupportedConfigError(ValueError):
    """Raised for configurations outside the implemented regime."""


@dataclass(frozen=True)
class NoiseKernels:
    """Windowed noise kernels over one coarse-graining window.

    ``s0`` is the window average of twice the zero-frequency spectrum
    (real, non-negative); ``s2`` the same average weighted by
    exp(-2i Omega t') (complex, |s2| <= s0).
    """

    s0: float
    s2: complex
    window_start: float = 0.0
    window_length: float = 0.0

    def __post_init__(self) -> None:
        scale = max(abs(self.s0), 1.0)
        if self.s0 < -1e-12 * scale:
            raise ValueError(f"s0 must be non-negative, got {self.s0}")
        if abs(self.s2) > self.s0 * (1.0 + 1e-9) + 1e-300:
            raise ValueError(
                f"|s2|={abs(self.s2):.6g} exceeds s0={self.s0:.6g}; "
                "kernels are not a valid window average"
            )


def _require_zero_occupation(params: PhysParams) -> None:
    if params.n_q != 0:
        raise UnsupportedConfigError(
            "the regression generator is only implemented for n_q = 0; "
            f"got n_q = {params.n_q}"
        )


def qrt_matrix(params: PhysParams, delta: float) -> np.ndarray:
    """3x3 generator of centred (population, raising, lowering) correlators."""
    _require_zero_occupation(params)
    g, gamma = params.g, params.gamma
    return np.array(
        [
            [-gamma, -1j * g, 1j * g],
            [-0.5j * g, 1j * delta - 0.5 * gamma, 0.0],
            [0.5j * g, 0.0, -1j * delta - 0.5 * gamma],
        ],
        dtype=complex,
    )


def g_vector(steady: BlochVector) -> np.ndarray:
    """Initial correlator vector built from the steady emitter state."""
    sz = 2.0 * steady.pe - 1.0
    s = steady.s
    return np.array(
        [
            1.0 - sz**2,
            -np.conjugate(s) * (1.0 + sz),
            s * (1.0 - sz),
        ],
        dtype=complex,
    )


def spectrum_qrt(params: PhysParams, delta: float, omega: float) -> complex:
    """Population fluctuation spectrum S(omega) via the regression theorem."""
    _require_zero_occupation(params)
    a = qrt_matrix(params, delta)
    steady = bloch_steady_state(params, delta)
    gvec = g_vector(steady)
    try:
        x = np.linalg.solve(1j * omega * np.eye(3) + a, gvec)
    except np.linalg.LinAlgError as exc:  # unreachable for gamma > 0, real omega
        raise RuntimeError("internal error: singular regression system") from exc
    return complex(-0.25 * params.g_m**2 * x[0])


def spectrum_closed_form(params: PhysParams, delta):
    """Closed form of Re S(0) at detuning ``delta`` (scalar or array).

    Vanishes for an undriven emitter and decays as delta**-4 at large
    detuning; non-negative everywhere.
    """
    _require_zero_occupation(params)
    g, gamma, g_m = params.g, params.gamma, params.g_m
    delta = np.asarray(delta, dtype=float)
    num = g_m**2 * g**2 * (4.0 * delta**2 + gamma**2) * (g**2 + 2.0 * gamma**2)
    den = gamma * (4.0 * delta**2 + 2.0 * g**2 + gamma**2) ** 3
    out = num / den
    if out.ndim == 0:
        return float(out)
    return out


def _trapezoid_weights(panels: int) -> np.ndarray:
    w = np.ones(panels + 1)
    w[0] = w[-1] = 0.5
    return w / panels


def window_kernels(
    params: PhysParams,
    delta_m_of_t,
    t: float,
    dt_sample: float | None = None,
) -> NoiseKernels:
    """Noise kernels averaged over the window [t, t + one mechanical period].

    ``delta_m_of_t`` gives the mechanically induced detuning at absolute time
    t'; the spectrum is evaluated at delta0 + delta_m(t').  The window is
    sampled on a closed trapezoid grid; ``dt_sample`` must divide the window
    into at least ``MIN_WINDOW_PANELS`` panels (default: exactly that many).
    """
    window = params.mechanical_period
    if dt_sample is None:
        panels = MIN_WINDOW_PANELS
    else:
        if dt_sample <= 0:
            raise ValueError("dt_sample must be positive")
        panels = int(round(window / dt_sample))
        if panels < MIN_WINDOW_PANELS:
            raise ValueError(
                f"dt_sample={dt_sample:.3g} gives {panels} panels; "
                f"need at least {MIN_WINDOW_PANELS}"
            )
    t_prime = t + window * np.arange(panels + 1) / panels
    delta = params.delta0 + np.asarray(
        [delta_m_of_t(tp) for tp in t_prime], dtype=float
    )
    values = 2.0 * spectrum_closed_form(params, delta)
    weights = _trapezoid_weights(panels)
    phases = np.exp(-2j * params.Omega * t_prime)
    s0 = float(np.sum(weights * values))
    s2 = complex(np.sum(weights * values * phases))
    return NoiseKernels(s0=s0, s2=s2, window_start=t, window_length=window)
