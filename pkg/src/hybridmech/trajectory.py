"""Stochastic Gaussian-moment trajectories of the mechanical oscillator.

Each trajectory tracks a Gaussian mechanical state through its complex
amplitude beta and conditional variances (v_a, v_b).  The engine alternates
two steps per mechanical period: (1) from the induced detuning recorded over
the previous window, build the windowed noise kernels and diagonalise the
dissipation matrix; (2) integrate the moments across the window with the
scattering rates and operators frozen.

The amplitude follows an Euler-Maruyama step driven by two independent
complex Wiener increments, with the free rotation applied as an exact phase
factor.  The variances follow deterministic fourth-order steps of their
moment equations, including the quadratic localisation terms that keep the
trajectory variances conditional: ensemble-averaged first and second moments
then reproduce the mechanical master equation exactly, and pure Gaussian
states stay pure along a trajectory.

Reproducibility: every trajectory owns a generator seeded by a SplitMix64
mix of (master seed, trajectory index), so results are independent of batch
partitioning and execution order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bloch import PhysParams, bloch_step_batch, bloch_steady_state, pe_closed_form
from .lindblad import QuadratureDecomposition, eigenpairs
from .spectrum import spectrum_closed_form

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Negative conditional-variance threshold that aborts a trajectory.
ABORT_VA_TOL = 1e-9


class TrajectoryAbort(RuntimeError):
    """A trajectory left the physical domain (conditional variance < 0)."""

    def __init__(self, index: int, time: float):
        super().__init__(
            f"trajectory {index} aborted at t={time:.6g}: "
            "conditional variance went negative"
        )
        self.index = index
        self.time = time


class EnsembleAbortError(RuntimeError):
    """More than the tolerated fraction of trajectories aborted."""


def derive_trajectory_seed(master_seed: int, index: int) -> int:
    """Per-trajectory seed: SplitMix64 output at stream position index+1."""
    z = (master_seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def complex_wiener(rng: np.random.Generator, dt: float) -> complex:
    """One normalized complex Wiener increment: E|dW|^2 = dt, E[dW^2] = 0."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = rng.standard_normal(2)
    return complex(x[0], x[1]) * math.sqrt(0.5 * dt)


@dataclass(frozen=True)
class MechGaussianState:
    """Gaussian mechanical state: amplitude and conditional variances."""

    beta: complex
    v_a: float
    v_b: complex
    t: float = 0.0

    def physicality_defect(self) -> float:
        """|v_b|^2 - v_a (v_a + 1); non-positive for physical states."""
        return abs(self.v_b) ** 2 - self.v_a * (self.v_a + 1.0)


@dataclass(frozen=True)
class WindowCoefficients:
    """Frozen per-window scattering data used in scheduled runs."""

    decomp: QuadratureDecomposition
    pe: float


@dataclass
class TrajectoryOptions:
    """Tuning knobs of the trajectory engine.

    ``schedule`` switches the engine to scheduled mode: kernels are not
    recomputed, the windows partition the run duration evenly, and the
    population is frozen per window.  Otherwise the two-step loop runs with
    one-period windows and the adiabatic closed-form population (or the full
    Bloch equations when ``full_bloch`` is set).
    """

    steps_per_window: int = 256
    panels_per_window: int = 64
    record_stride: int = 4
    full_bloch: bool = False
    schedule: Sequence[WindowCoefficients] | None = None
    histogram_bins: int = 41
    histogram_times: Sequence[float] | None = None
    workers: int = 1


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled time series of one trajectory (or the noise-free reference)."""

    times: np.ndarray
    beta: np.ndarray
    v_a: np.ndarray
    v_b: np.ndarray
    delta_m: np.ndarray
    pe: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    theta: np.ndarray
    seed: int | None
    window_length: float


@dataclass(frozen=True)
class EnsembleResult:
    """Cross-trajectory statistics on the shared record grid."""

    times: np.ndarray
    mean_beta: np.ndarray
    mean_pe: np.ndarray
    mean_n: np.ndarray
    mean_b2: np.ndarray
    var_dbeta_x: np.ndarray
    var_dbeta_p: np.ndarray
    se_beta: np.ndarray
    se_n: np.ndarray
    se_b2: np.ndarray
    mean_lambda_plus: np.ndarray
    mean_lambda_minus: np.ndarray
    mean_theta: np.ndarray
    histograms: list[tuple[float, np.ndarray, np.ndarray]]
    reference: TrajectoryRecord
    n_traj: int
    master_seed: int
    aborted: list[tuple[int, float]] = field(default_factory=list)


def resolve_windows(
    params: PhysParams,
    duration: float,
    schedule: Sequence[WindowCoefficients] | None,
) -> tuple[int, float]:
    """Number and length of coarse-graining windows for a run.

    Self-scheduled runs use one mechanical period per window and require the
    duration to cover at least one; scheduled runs partition the duration
    evenly among the schedule entries.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if schedule is None:
        window = params.mechanical_period
        if duration < window * (1.0 - 1e-9):
            raise ValueError(
                "duration must cover at least one mechanical period "
                f"({window:.6g}); got {duration:.6g}"
            )
        n_windows = max(1, math.ceil(duration / window - 1e-9))
        return n_windows, window
    if len(schedule) == 0:
        raise ValueError("schedule must contain at least one window")
    return len(schedule), duration / len(schedule)


def _check_step(params: PhysParams, dt: float, lambda_max: float | None = None) -> None:
    """Step-size preconditions: every slow scale must be well resolved.

    The free rotation is applied as an exact phase, so Omega only needs mild
    resolution (force phasing); the dissipative and coupling scales are
    integrated at first order and must stay well below a tenth per step.
    """
    rates = {"Omega": params.Omega, "g_m": params.g_m}
    if lambda_max is not None:
        rates["lambda_plus"] = lambda_max
    for name, rate in rates.items():
        if dt * rate > 0.1 + 1e-12:
            raise ValueError(
                f"dt*{name} = {dt * rate:.3g} too large; need <= 0.1 "
                "to resolve the slow scales"
            )


def _channel_constants(lam_p, lam_m, u_p, w_p, u_m, w_m):
    """Window constants of the moment equations."""
    c_damp = lam_p * (np.abs(u_p) ** 2 - np.abs(w_p) ** 2) + lam_m * (
        np.abs(u_m) ** 2 - np.abs(w_m) ** 2
    )
    src_a = lam_p * np.abs(w_p) ** 2 + lam_m * np.abs(w_m) ** 2
    src_b = lam_p * np.conjugate(u_p) * w_p + lam_m * np.conjugate(u_m) * w_m
    return c_damp, src_a, src_b


def _variance_rhs(va, vb, omega, lam_p, lam_m, u_p, w_p, u_m, w_m, c_damp, src_a, src_b):
    """Coupled conditional-variance derivatives (with localisation terms)."""
    a_p = u_p * vb + w_p * (va + 1.0)
    c_p = np.conjugate(u_p) * va + np.conjugate(w_p) * vb
    a_m = u_m * vb + w_m * (va + 1.0)
    c_m = np.conjugate(u_m) * va + np.conjugate(w_m) * vb
    loc = lam_p * (np.abs(a_p) ** 2 + np.abs(c_p) ** 2) + lam_m * (
        np.abs(a_m) ** 2 + np.abs(c_m) ** 2
    )
    cross = lam_p * a_p * c_p + lam_m * a_m * c_m
    dva = -c_damp * va + src_a - loc
    dvb = -(2j * omega + c_damp) * vb - src_b - 2.0 * cross
    return dva, dvb


def _variance_step(va, vb, dt, omega, lam_p, lam_m, u_p, w_p, u_m, w_m, consts):
    """One classical fourth-order step of the variance equations."""
    c_damp, src_a, src_b = consts

    def rhs(a, b):
        return _variance_rhs(
            a, b, omega, lam_p, lam_m, u_p, w_p, u_m, w_m, c_damp, src_a, src_b
        )

    k1a, k1b = rhs(va, vb)
    k2a, k2b = rhs(va + 0.5 * dt * k1a, vb + 0.5 * dt * k1b)
    k3a, k3b = rhs(va + 0.5 * dt * k2a, vb + 0.5 * dt * k2b)
    k4a, k4b = rhs(va + dt * k3a, vb + dt * k3b)
    va = va + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    vb = vb + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
    return va, vb


def step_moments(
    state: MechGaussianState,
    decomp: QuadratureDecomposition,
    pe: float,
    params: PhysParams,
    dt: float,
    dW_plus: complex,
    dW_minus: complex,
) -> MechGaussianState:
    """One stochastic step of the Gaussian moments with frozen scattering data.

    The amplitude takes an Euler-Maruyama step (exact free rotation, noise
    coefficients built from the conditional variances); the variances take a
    deterministic fourth-order step.  Variance fluctuations are not fed back
    onto the amplitude.
    """
    _check_step(params, dt, decomp.lambda_plus)
    lam_p, lam_m = decomp.lambda_plus, decomp.lambda_minus
    u_p, w_p = decomp.v_plus
    u_m, w_m = decomp.v_minus
    consts = _channel_constants(lam_p, lam_m, u_p, w_p, u_m, w_m)
    c_damp = consts[0]

    va, vb, beta = state.v_a, state.v_b, state.beta
    a_p = u_p * vb + w_p * (va + 1.0)
    c_p = np.conjugate(u_p) * va + np.conjugate(w_p) * vb
    a_m = u_m * vb + w_m * (va + 1.0)
    c_m = np.conjugate(u_m) * va + np.conjugate(w_m) * vb
    noise = math.sqrt(lam_p) * (a_p * dW_plus + c_p * np.conjugate(dW_plus)) + math.sqrt(
        lam_m
    ) * (a_m * dW_minus + c_m * np.conjugate(dW_minus))

    rot = cmath.exp(-1j * params.Omega * dt)
    rot_half = cmath.exp(-0.5j * params.Omega * dt)
    beta = rot * (1.0 - 0.5 * c_damp * dt) * beta + rot_half * (
        -1j * params.g_m * pe * dt + noise
    )
    va, vb = _variance_step(
        va, vb, dt, params.Omega, lam_p, lam_m, u_p, w_p, u_m, w_m, consts
    )
    if not va >= -ABORT_VA_TOL:
        raise TrajectoryAbort(0, state.t + dt)
    return MechGaussianState(
        beta=complex(beta), v_a=float(va), v_b=complex(vb), t=state.t + dt
    )


def _draw_window_noise(gens, steps: int, dt: float):
    """Per-trajectory complex Wiener increments for one window: (n, steps)."""
    n = len(gens)
    dw_p = np.empty((n, steps), dtype=complex)
    dw_m = np.empty((n, steps), dtype=complex)
    scale = math.sqrt(0.5 * dt)
    for i, gen in enumerate(gens):
        x = gen.standard_normal((steps, 4))
        dw_p[i] = (x[:, 0] + 1j * x[:, 1]) * scale
        dw_m[i] = (x[:, 2] + 1j * x[:, 3]) * scale
    return dw_p, dw_m


def _batch_run(
    params: PhysParams,
    beta0: complex,
    v_a0: float,
    v_b0: complex,
    duration: float,
    seeds: Sequence[int] | None,
    options: TrajectoryOptions,
    *,
    dissipation: bool = True,
) -> dict:
    """Run a batch of trajectories on a shared grid; returns raw arrays.

    ``seeds is None`` disables the noise (semiclassical reference); setting
    ``dissipation`` False additionally drops the scattering channels.
    """
    noise = seeds is not None
    n = len(seeds) if noise else 1
    schedule = options.schedule
    n_windows, window = resolve_windows(params, duration, schedule)
    steps = options.steps_per_window
    panels = options.panels_per_window
    stride = options.record_stride
    if steps % panels != 0:
        raise ValueError("steps_per_window must be a multiple of panels_per_window")
    if steps % stride != 0:
        raise ValueError("steps_per_window must be a multiple of record_stride")
    dt = window / steps
    lam_bound = (
        max(wc.decomp.lambda_plus for wc in schedule) if schedule is not None else None
    )
    _check_step(params, dt, lam_bound)

    omega, g_m, gamma, delta0 = params.Omega, params.g_m, params.gamma, params.delta0
    Gamma, n_m = params.Gamma, params.n_m
    rot = cmath.exp(-1j * omega * dt)
    rot_half = cmath.exp(-0.5j * omega * dt)
    spp = steps // panels
    panel_rel_t = np.arange(panels + 1) * (spp * dt)
    panel_phases = np.exp(-2j * omega * panel_rel_t)
    panel_weights = np.ones(panels + 1) / panels
    panel_weights[0] = panel_weights[-1] = 0.5 / panels

    gens = (
        [np.random.Generator(np.random.PCG64(int(s))) for s in seeds] if noise else None
    )

    beta = np.full(n, complex(beta0), dtype=complex)
    va = np.full(n, float(v_a0))
    vb = np.full(n, complex(v_b0), dtype=complex)
    alive = np.ones(n, dtype=bool)
    abort_time = np.full(n, np.nan)

    n_rec = n_windows * steps // stride + 1
    rec = {
        name: np.empty((n, n_rec), dtype=dtype)
        for name, dtype in [
            ("beta", complex),
            ("v_a", float),
            ("v_b", complex),
            ("delta_m", float),
            ("pe", float),
            ("lambda_plus", float),
            ("lambda_minus", float),
            ("theta", float),
        ]
    }
    times = np.empty(n_rec)

    # Kernel input for window 0: induced detuning predicted from free rotation.
    delta_panel = 2.0 * g_m * np.real(
        beta[:, None] * np.exp(-1j * omega * panel_rel_t)[None, :]
    )

    if options.full_bloch:
        st0 = bloch_steady_state(params, delta0 + 2.0 * g_m * beta0.real)
        y_bloch = np.tile([st0.pe, st0.s.real, st0.s.imag], (n, 1))
        n_sub = max(1, math.ceil(dt * gamma / 0.045))

    zeros = np.zeros(n)
    czeros = np.zeros(n, dtype=complex)
    i_rec = 0
    with np.errstate(invalid="ignore"):
        for w in range(n_windows):
            if not dissipation:
                lam_p, lam_m = zeros, zeros
                u_p = w_p = u_m = w_m = czeros
                theta_w = zeros
                pe_frozen = (
                    np.full(n, schedule[w].pe) if schedule is not None else None
                )
            elif schedule is not None:
                wc = schedule[w]
                lam_p = np.full(n, wc.decomp.lambda_plus)
                lam_m = np.full(n, wc.decomp.lambda_minus)
                u_p = np.full(n, wc.decomp.v_plus[0])
                w_p = np.full(n, wc.decomp.v_plus[1])
                u_m = np.full(n, wc.decomp.v_minus[0])
                w_m = np.full(n, wc.decomp.v_minus[1])
                theta_w = np.full(n, wc.decomp.theta)
                pe_frozen = np.full(n, wc.pe)
            else:
                # fixed-axis sums keep results independent of batch chunking
                f = 2.0 * spectrum_closed_form(params, delta0 + delta_panel)
                s0 = np.sum(f * panel_weights, axis=-1)
                s2 = np.sum(f * (panel_phases * panel_weights), axis=-1)
                h11 = Gamma * (n_m + 1.0) + s0
                h22 = Gamma * n_m + s0
                lam_p, lam_m, v_p, v_m, theta_w = eigenpairs(Gamma, h11, h22, s2)
                lam_p = np.broadcast_to(np.asarray(lam_p), (n,))
                lam_m = np.broadcast_to(np.asarray(lam_m), (n,))
                u_p, w_p = v_p[..., 0], v_p[..., 1]
                u_m, w_m = v_m[..., 0], v_m[..., 1]
                theta_w = np.broadcast_to(np.asarray(theta_w), (n,))
                pe_frozen = None

            consts = _channel_constants(lam_p, lam_m, u_p, w_p, u_m, w_m)
            c_damp = consts[0]
            damp_fac = rot * (1.0 - 0.5 * c_damp * dt)
            sq_lp = np.sqrt(lam_p)
            sq_lm = np.sqrt(lam_m)
            if noise:
                dw_p, dw_m = _draw_window_noise(gens, steps, dt)

            delta_panel_next = np.empty_like(delta_panel)
            for j in range(steps):
                gstep = w * steps + j
                delta_m_now = 2.0 * g_m * beta.real
                if options.full_bloch:
                    pe_now = y_bloch[:, 0].copy()
                elif pe_frozen is not None:
                    pe_now = pe_frozen
                else:
                    pe_now = pe_closed_form(params.g, gamma, delta0 + delta_m_now)
                if gstep % stride == 0:
                    times[i_rec] = gstep * dt
                    rec["beta"][:, i_rec] = beta
                    rec["v_a"][:, i_rec] = va
                    rec["v_b"][:, i_rec] = vb
                    rec["delta_m"][:, i_rec] = delta_m_now
                    rec["pe"][:, i_rec] = pe_now
                    rec["lambda_plus"][:, i_rec] = lam_p
                    rec["lambda_minus"][:, i_rec] = lam_m
                    rec["theta"][:, i_rec] = theta_w
                    i_rec += 1
                if j % spp == 0:
                    delta_panel_next[:, j // spp] = delta_m_now

                if noise:
                    a_p = u_p * vb + w_p * (va + 1.0)
                    c_p = np.conjugate(u_p) * va + np.conjugate(w_p) * vb
                    a_m = u_m * vb + w_m * (va + 1.0)
                    c_m = np.conjugate(u_m) * va + np.conjugate(w_m) * vb
                    noise_term = sq_lp * (
                        a_p * dw_p[:, j] + c_p * np.conjugate(dw_p[:, j])
                    ) + sq_lm * (a_m * dw_m[:, j] + c_m * np.conjugate(dw_m[:, j]))
                else:
                    noise_term = 0.0
                beta = damp_fac * beta + rot_half * (
                    -1j * g_m * pe_now * dt + noise_term
                )
                if dissipation:
                    va, vb = _variance_step(
                        va, vb, dt, omega, lam_p, lam_m, u_p, w_p, u_m, w_m, consts
                    )
                    # catches NaN as well: ~(va >= -tol) is True for NaN
                    bad = alive & ~(va >= -ABORT_VA_TOL)
                    if bad.any():
                        alive[bad] = False
                        abort_time[bad] = (gstep + 1) * dt
                        beta[bad] = np.nan
                        va[bad] = np.nan
                        vb[bad] = np.nan
                if options.full_bloch:
                    y_bloch = bloch_step_batch(
                        y_bloch, delta0 + delta_m_now, params, dt, n_sub
                    )
            delta_panel_next[:, panels] = 2.0 * g_m * beta.real
            delta_panel = delta_panel_next

        # closing record
        delta_m_now = 2.0 * g_m * beta.real
        if options.full_bloch:
            pe_now = y_bloch[:, 0].copy()
        elif pe_frozen is not None:
            pe_now = pe_frozen
        else:
            pe_now = pe_closed_form(params.g, gamma, delta0 + delta_m_now)
        times[i_rec] = n_windows * steps * dt
        rec["beta"][:, i_rec] = beta
        rec["v_a"][:, i_rec] = va
        rec["v_b"][:, i_rec] = vb
        rec["delta_m"][:, i_rec] = delta_m_now
        rec["pe"][:, i_rec] = pe_now
        rec["lambda_plus"][:, i_rec] = lam_p
        rec["lambda_minus"][:, i_rec] = lam_m
        rec["theta"][:, i_rec] = theta_w

    rec["times"] = times
    rec["alive"] = alive
    rec["abort_time"] = abort_time
    rec["window_length"] = window
    return rec


def _record_from_batch(batch: dict, lane: int, seed: int | None) -> TrajectoryRecord:
    return TrajectoryRecord(
        times=batch["times"].copy(),
        beta=batch["beta"][lane].copy(),
        v_a=batch["v_a"][lane].copy(),
        v_b=batch["v_b"][lane].copy(),
        delta_m=batch["delta_m"][lane].copy(),
        pe=batch["pe"][lane].copy(),
        lambda_plus=batch["lambda_plus"][lane].copy(),
        lambda_minus=batch["lambda_minus"][lane].copy(),
        theta=batch["theta"][lane].copy(),
        seed=seed,
        window_length=batch["window_length"],
    )


def run_trajectory(
    params: PhysParams,
    beta0: complex,
    v_a0: float,
    v_b0: complex,
    duration: float,
    seed: int,
    options: TrajectoryOptions | None = None,
) -> TrajectoryRecord:
    """Run a single stochastic trajectory (same code path as ensembles)."""
    options = options or TrajectoryOptions()
    batch = _batch_run(params, beta0, v_a0, v_b0, duration, [seed], options)
    if not batch["alive"][0]:
        raise TrajectoryAbort(0, float(batch["abort_time"][0]))
    return _record_from_batch(batch, 0, seed)


def semiclassical_run(
    params: PhysParams,
    beta0: complex,
    duration: float,
    options: TrajectoryOptions | None = None,
) -> TrajectoryRecord:
    """Noise-free mean-field evolution: rotation plus population force."""
    options = options or TrajectoryOptions()
    batch = _batch_run(
        params, beta0, 0.0, 0.0, duration, None, options, dissipation=False
    )
    return _record_from_batch(batch, 0, None)


def _sample_variance(values: np.ndarray, axis=0) -> np.ndarray:
    n = values.shape[axis]
    if n < 2:
        return np.zeros(values.shape[1 - axis] if values.ndim > 1 else ())
    return np.var(values, axis=axis, ddof=1)


def run_ensemble(
    params: PhysParams,
    beta0: complex,
    duration: float,
    n_traj: int,
    master_seed: int,
    options: TrajectoryOptions | None = None,
    v_a0: float = 0.0,
    v_b0: complex = 0.0,
) -> EnsembleResult:
    """Run independent trajectories and aggregate cross-trajectory statistics.

    Per-trajectory seeds derive deterministically from the master seed;
    ``options.workers`` only chunks the batch (fixed index-ordered reduction),
    so results are identical for any worker count.  Fails when more than 1%
    of trajectories abort.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    options = options or TrajectoryOptions()
    seeds = [derive_trajectory_seed(master_seed, i) for i in range(n_traj)]

    workers = max(1, int(options.workers))
    chunks = np.array_split(np.arange(n_traj), min(workers, n_traj))
    parts = [
        _batch_run(params, beta0, v_a0, v_b0, duration, [seeds[i] for i in idx], options)
        for idx in chunks
        if len(idx)
    ]
    batch = parts[0]
    if len(parts) > 1:
        merged = {}
        for key in ("beta", "v_a", "v_b", "delta_m", "pe", "lambda_plus",
                    "lambda_minus", "theta", "alive", "abort_time"):
            merged[key] = np.concatenate([p[key] for p in parts], axis=0)
        merged["times"] = batch["times"]
        merged["window_length"] = batch["window_length"]
        batch = merged

    alive = batch["alive"]
    aborted = [
        (int(i), float(batch["abort_time"][i])) for i in np.flatnonzero(~alive)
    ]
    if len(aborted) > 0.01 * n_traj:
        raise EnsembleAbortError(
            f"{len(aborted)}/{n_traj} trajectories aborted: {aborted[:10]}"
        )

    reference = semiclassical_run(
        params, beta0, duration, replace_options_for_reference(options)
    )

    beta = batch["beta"][alive]
    va = batch["v_a"][alive]
    vb = batch["v_b"][alive]
    n_alive = int(alive.sum())

    n_vals = va + np.abs(beta) ** 2
    b2_vals = vb + beta**2
    dbeta = beta - reference.beta[None, :]

    sqrt_n = math.sqrt(n_alive)
    se_beta = np.sqrt(
        _sample_variance(dbeta.real) + _sample_variance(dbeta.imag)
    ) / sqrt_n
    result = EnsembleResult(
        times=batch["times"].copy(),
        mean_beta=beta.mean(axis=0),
        mean_pe=batch["pe"][alive].mean(axis=0),
        mean_n=n_vals.mean(axis=0),
        mean_b2=b2_vals.mean(axis=0),
        var_dbeta_x=_sample_variance(dbeta.real),
        var_dbeta_p=_sample_variance(dbeta.imag),
        se_beta=se_beta,
        se_n=np.sqrt(_sample_variance(n_vals)) / sqrt_n,
        se_b2=np.sqrt(
            _sample_variance(b2_vals.real) + _sample_variance(b2_vals.imag)
        ) / sqrt_n,
        mean_lambda_plus=batch["lambda_plus"][alive].mean(axis=0),
        mean_lambda_minus=batch["lambda_minus"][alive].mean(axis=0),
        mean_theta=batch["theta"][alive].mean(axis=0),
        histograms=_histograms(
            batch["times"], dbeta, params, duration, options
        ),
        reference=reference,
        n_traj=n_traj,
        master_seed=master_seed,
        aborted=aborted,
    )
    return result


def replace_options_for_reference(options: TrajectoryOptions) -> TrajectoryOptions:
    """Options for the noise-free reference run on the same grid."""
    ref = TrajectoryOptions(
        steps_per_window=options.steps_per_window,
        panels_per_window=options.panels_per_window,
        record_stride=options.record_stride,
        full_bloch=options.full_bloch,
        schedule=options.schedule,
    )
    return ref


def _histograms(times, dbeta, params, duration, options):
    """Histograms of the stochastic induced detuning at selected times."""
    if options.histogram_times is None:
        targets = [duration / 3.0, 2.0 * duration / 3.0, duration]
    else:
        targets = list(options.histogram_times)
    out = []
    for target in targets:
        idx = int(np.argmin(np.abs(times - target)))
        values = 2.0 * params.g_m * dbeta[:, idx].real
        counts, edges = np.histogram(values, bins=options.histogram_bins)
        out.append((float(times[idx]), edges, counts))
    return out
