"""Brute-force validation backends on a truncated Fock space.

Two independent routes integrate the mechanical master equation: one built
from the diagonalised scattering channels (lambda_+/-, b_+/-), one directly
from the (s0, s2, Gamma, n_m) form with the anomalous two-photon
superoperator.  A full stochastic wave-function unraveling of the same
master equation provides the Monte Carlo cross-check for the Gaussian-moment
trajectory engine.  All of it is desk-scale machinery: dense matrices,
dimension a few tens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bloch import PhysParams, pe_closed_form
from .lindblad import QuadratureDecomposition, eigenpairs
from .spectrum import NoiseKernels, window_kernels
from .trajectory import (
    TrajectoryOptions,
    WindowCoefficients,
    derive_trajectory_seed,
    resolve_windows,
)

TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = 1e-7
TRUNCATION_TOL = 1e-6
SSE_NORM_TOL = 1e-3


class TruncationError(RuntimeError):
    """Fock-space truncation too small for the requested evolution."""

    def __init__(self, dim: int, population: float):
        suggested = max(dim + 8, int(1.5 * dim))
        super().__init__(
            f"population {population:.3e} in the top two Fock levels exceeds "
            f"{TRUNCATION_TOL:.0e} of the trace at dim={dim}; "
            f"rerun with dim >= {suggested}"
        )
        self.dim = dim
        self.suggested = suggested


# ---------------------------------------------------------------------------
# Ladder-operator applications via index shifts (no dense matmuls needed).

def _sqrt_ladder(dim: int) -> np.ndarray:
    return np.sqrt(np.arange(1.0, dim))


def destroy_matrix(dim: int) -> np.ndarray:
    """Dense annihilation operator, mostly for tests and assembly."""
    return np.diag(_sqrt_ladder(dim), k=1).astype(complex)


def lower_state(psi: np.ndarray) -> np.ndarray:
    """b |psi> for state arrays shaped (dim, ...)."""
    out = np.zeros_like(psi)
    s = _sqrt_ladder(psi.shape[0])
    out[:-1] = s.reshape((-1,) + (1,) * (psi.ndim - 1)) * psi[1:]
    return out


def raise_state(psi: np.ndarray) -> np.ndarray:
    """b^dagger |psi> for state arrays shaped (dim, ...)."""
    out = np.zeros_like(psi)
    s = _sqrt_ladder(psi.shape[0])
    out[1:] = s.reshape((-1,) + (1,) * (psi.ndim - 1)) * psi[:-1]
    return out


def _b_left(x: np.ndarray) -> np.ndarray:
    """b X on the last two axes."""
    out = np.zeros_like(x)
    s = _sqrt_ladder(x.shape[-2])
    out[..., :-1, :] = s[:, None] * x[..., 1:, :]
    return out


def _bdag_left(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    s = _sqrt_ladder(x.shape[-2])
    out[..., 1:, :] = s[:, None] * x[..., :-1, :]
    return out


def _b_right(x: np.ndarray) -> np.ndarray:
    """X b on the last two axes."""
    out = np.zeros_like(x)
    s = _sqrt_ladder(x.shape[-1])
    out[..., :, 1:] = s[None, :] * x[..., :, :-1]
    return out


def _bdag_right(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    s = _sqrt_ladder(x.shape[-1])
    out[..., :, :-1] = s[None, :] * x[..., :, 1:]
    return out


def _number_left(x: np.ndarray) -> np.ndarray:
    n = np.arange(x.shape[-2])
    return n[:, None] * x


def _number_right(x: np.ndarray) -> np.ndarray:
    n = np.arange(x.shape[-1])
    return n[None, :] * x


# ---------------------------------------------------------------------------
# State containers.

@dataclass
class FockDensityMatrix:
    """Truncated-Fock density matrix with invariant checks."""

    dim: int
    entries: np.ndarray
    t: float = 0.0

    def trace_defect(self) -> float:
        return abs(np.trace(self.entries) - 1.0)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T))[0])

    def top_population(self) -> float:
        """Population in the top two Fock levels, relative to the trace."""
        pops = np.real(np.diagonal(self.entries))
        return float((pops[-1] + pops[-2]) / max(np.real(np.trace(self.entries)), 1e-300))

    def validate(self) -> None:
        if self.trace_defect() > TRACE_TOL:
            raise RuntimeError(f"trace drifted by {self.trace_defect():.3e} at t={self.t}")
        if self.hermiticity_defect() > HERMITICITY_TOL:
            raise RuntimeError(
                f"hermiticity defect {self.hermiticity_defect():.3e} at t={self.t}"
            )
        if self.min_eigenvalue() < -POSITIVITY_TOL:
            raise RuntimeError(
                f"negative eigenvalue {self.min_eigenvalue():.3e} at t={self.t}"
            )
        if self.top_population() > TRUNCATION_TOL:
            raise TruncationError(self.dim, self.top_population())


@dataclass
class FockStateVector:
    """Truncated-Fock pure state."""

    dim: int
    amplitudes: np.ndarray
    t: float = 0.0

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def coherent_amplitudes(dim: int, beta: complex) -> np.ndarray:
    """Normalised coherent-state amplitudes on the truncated space."""
    amps = np.empty(dim, dtype=complex)
    amps[0] = 1.0
    for k in range(1, dim):
        amps[k] = amps[k - 1] * beta / math.sqrt(k)
    amps *= math.exp(-0.5 * abs(beta) ** 2)
    norm = np.linalg.norm(amps)
    if norm < 1.0 - 1e-6:
        raise TruncationError(dim, 1.0 - norm**2)
    return amps / norm


def coherent_state(dim: int, beta: complex) -> FockStateVector:
    return FockStateVector(dim=dim, amplitudes=coherent_amplitudes(dim, beta))


def coherent_density(dim: int, beta: complex) -> FockDensityMatrix:
    amps = coherent_amplitudes(dim, beta)
    return FockDensityMatrix(dim=dim, entries=np.outer(amps, amps.conj()))


def thermal_density(dim: int, n_m: float) -> FockDensityMatrix:
    """Thermal state, renormalised on the truncation."""
    if n_m <= 0:
        pops = np.zeros(dim)
        pops[0] = 1.0
    else:
        ratio = n_m / (n_m + 1.0)
        pops = ratio ** np.arange(dim)
        pops /= pops.sum()
    return FockDensityMatrix(dim=dim, entries=np.diag(pops).astype(complex))


# ---------------------------------------------------------------------------
# Generators (two independent routes).

def _hamiltonian_part(x: np.ndarray, omega: float, force: float) -> np.ndarray:
    """-i [Omega n + force (b + b^dag), X] acting on the last two axes."""
    comm = omega * (_number_left(x) - _number_right(x))
    if force != 0.0:
        comm = comm + force * (
            _b_left(x) + _bdag_left(x) - _b_right(x) - _bdag_right(x)
        )
    return -1j * comm


def _channel_dissipator(x, lam, u, w):
    """lam D[u b + w b^dag] applied to the last two axes of x."""
    if lam == 0.0:
        return 0.0
    bs_x = u * _b_left(x) + w * _bdag_left(x)
    sandwich = np.conjugate(u) * _bdag_right(bs_x) + np.conjugate(w) * _b_right(bs_x)
    # b_s^dag b_s X and X b_s^dag b_s
    left = np.conjugate(u) * _bdag_left(bs_x) + np.conjugate(w) * _b_left(bs_x)
    x_bsdag = np.conjugate(u) * _bdag_right(x) + np.conjugate(w) * _b_right(x)
    right = u * _b_right(x_bsdag) + w * _bdag_right(x_bsdag)
    return lam * (sandwich - 0.5 * left - 0.5 * right)


def lindblad_rhs(
    rho, pe: float, decomp: QuadratureDecomposition, params: PhysParams
) -> np.ndarray:
    """Master-equation generator assembled from the scattering channels.

    Accepts a FockDensityMatrix or a plain array (stacks allowed on leading
    axes); returns the plain derivative array.
    """
    x = rho.entries if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    out = _hamiltonian_part(x, params.Omega, params.g_m * pe)
    out = out + _channel_dissipator(
        x, decomp.lambda_plus, decomp.v_plus[0], decomp.v_plus[1]
    )
    out = out + _channel_dissipator(
        x, decomp.lambda_minus, decomp.v_minus[0], decomp.v_minus[1]
    )
    return out


def kernel_form_rhs(
    rho,
    pe: float,
    Gamma: float,
    n_m: float,
    kernels: NoiseKernels,
    params: PhysParams,
) -> np.ndarray:
    """Same generator written directly from (s0, s2, Gamma, n_m).

    Uses the anomalous superoperator A[X] rho = X rho X - {X^2, rho}/2 for
    the s2 terms; serves as the independent counterpart of
    :func:`lindblad_rhs` in equivalence tests.
    """
    x = rho.entries if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    s0, s2 = kernels.s0, kernels.s2
    out = _hamiltonian_part(x, params.Omega, params.g_m * pe)

    rate_down = Gamma * (n_m + 1.0) + s0
    rate_up = Gamma * n_m + s0
    # D[b]; operator products composed on the truncated space throughout
    out = out + rate_down * (
        _bdag_right(_b_left(x))
        - 0.5 * (_bdag_left(_b_left(x)) + _b_right(_bdag_right(x)))
    )
    # D[b^dag]
    out = out + rate_up * (
        _b_right(_bdag_left(x))
        - 0.5 * (_b_left(_bdag_left(x)) + _bdag_right(_b_right(x)))
    )
    if s2 != 0:
        b_x_b = _b_right(_b_left(x))
        b2_x = _b_left(_b_left(x))
        x_b2 = _b_right(_b_right(x))
        out = out + s2 * (b_x_b - 0.5 * (b2_x + x_b2))
        bd_x_bd = _bdag_right(_bdag_left(x))
        bd2_x = _bdag_left(_bdag_left(x))
        x_bd2 = _bdag_right(_bdag_right(x))
        out = out + np.conjugate(s2) * (bd_x_bd - 0.5 * (bd2_x + x_bd2))
    return out


def superoperator(apply_fn, dim: int) -> np.ndarray:
    """Matrix of a superoperator in the flattened matrix-unit basis."""
    basis = np.eye(dim * dim, dtype=complex).reshape(dim * dim, dim, dim)
    images = apply_fn(basis)
    return images.reshape(dim * dim, dim * dim).T


# ---------------------------------------------------------------------------
# Moment utilities.

@dataclass(frozen=True)
class MomentSeries:
    """Time series of the first and second mechanical moments."""

    times: np.ndarray
    b: np.ndarray
    n: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class MomentComparison:
    """Worst-case differences between two moment series."""

    max_abs_b: float
    max_abs_n: float
    max_abs_b2: float
    diff_b: np.ndarray
    diff_n: np.ndarray
    diff_b2: np.ndarray

    @property
    def max_abs(self) -> float:
        return max(self.max_abs_b, self.max_abs_n, self.max_abs_b2)


def compare_moments(a: MomentSeries, b: MomentSeries) -> MomentComparison:
    """Per-time differences of two moment series on congruent grids."""
    if a.times.shape != b.times.shape or np.max(
        np.abs(a.times - b.times)
    ) > 1e-9 * max(1.0, float(np.max(np.abs(a.times)))):
        raise ValueError("moment series are on different time grids")
    diff_b = a.b - b.b
    diff_n = a.n - b.n
    diff_b2 = a.b2 - b.b2
    return MomentComparison(
        max_abs_b=float(np.max(np.abs(diff_b))),
        max_abs_n=float(np.max(np.abs(diff_n))),
        max_abs_b2=float(np.max(np.abs(diff_b2))),
        diff_b=diff_b,
        diff_n=diff_n,
        diff_b2=diff_b2,
    )


def moments_from_density(rho: FockDensityMatrix | np.ndarray):
    """(⟨b⟩, ⟨b†b⟩, ⟨b²⟩) from a density matrix."""
    x = rho.entries if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    dim = x.shape[-1]
    s1 = _sqrt_ladder(dim)
    ks = np.arange(dim)
    mean_b = complex(np.sum(s1 * np.diagonal(x, offset=-1)))
    mean_n = float(np.real(np.sum(ks * np.diagonal(x))))
    s2 = np.sqrt(ks[2:] * (ks[2:] - 1.0))
    mean_b2 = complex(np.sum(s2 * np.diagonal(x, offset=-2)))
    return mean_b, mean_n, mean_b2


def moments_from_state(psi: np.ndarray):
    """(⟨b⟩, ⟨b†b⟩, ⟨b²⟩) per column of a normalised state array (dim, n)."""
    bpsi = lower_state(psi)
    mean_b = np.sum(np.conjugate(psi) * bpsi, axis=0)
    mean_n = np.real(np.sum(np.abs(bpsi) ** 2, axis=0))
    mean_b2 = np.sum(np.conjugate(psi) * lower_state(bpsi), axis=0)
    return mean_b, mean_n, mean_b2


def quadrature_variances(mean_b, mean_n, mean_b2):
    """Ensemble variances of X = (b+b†)/√2 and P = (b−b†)/(i√2)."""
    mean_b = np.asarray(mean_b)
    mean_n = np.asarray(mean_n)
    mean_b2 = np.asarray(mean_b2)
    var_x = np.real(mean_b2) + mean_n + 0.5 - 2.0 * np.real(mean_b) ** 2
    var_p = -np.real(mean_b2) + mean_n + 0.5 - 2.0 * np.imag(mean_b) ** 2
    return var_x, var_p


# ---------------------------------------------------------------------------
# Master-equation integrator.

@dataclass(frozen=True)
class MasterResult:
    """Recorded density matrices and their moments."""

    times: np.ndarray
    states: list
    moments: MomentSeries


def _window_plan(
    params: PhysParams,
    duration: float,
    dt: float,
    schedule: Sequence[WindowCoefficients] | None,
):
    n_windows, window = resolve_windows(params, duration, schedule)
    steps = max(1, round(window / dt))
    return n_windows, window, steps, window / steps


def integrate_master(
    params: PhysParams,
    rho0: FockDensityMatrix,
    duration: float,
    dt: float,
    kernel_schedule: Sequence[WindowCoefficients] | None = None,
    *,
    self_consistent: bool = False,
    record_stride: int = 16,
) -> MasterResult:
    """Fourth-order integration of the mechanical master equation.

    With a ``kernel_schedule`` the scattering data follow the supplied
    frozen per-window sequence (the same object the trajectory engine
    consumes).  With ``self_consistent=True`` the kernels are recomputed each
    window from the mean-field induced detuning Tr[rho (b+b^dag)] g_m,
    propagated across the window by free rotation, with the population frozen
    at its window-start value.  State invariants are validated at every
    record; a failing truncation-health check raises with a suggested size.
    """
    if kernel_schedule is None and not self_consistent:
        raise ValueError("integrate_master needs a kernel_schedule or self_consistent")
    if duration == 0:
        snap = FockDensityMatrix(dim=rho0.dim, entries=rho0.entries.copy(), t=0.0)
        snap.validate()
        mb, mn, mb2 = moments_from_density(snap)
        times = np.zeros(1)
        return MasterResult(
            times=times,
            states=[snap],
            moments=MomentSeries(
                times=times,
                b=np.array([mb]),
                n=np.array([mn]),
                b2=np.array([mb2]),
            ),
        )
    n_windows, window, steps, h = _window_plan(params, duration, dt, kernel_schedule)
    if steps % record_stride != 0 and record_stride <= steps:
        raise ValueError("record_stride must divide the steps per window")

    rho = np.array(rho0.entries, dtype=complex)
    dim = rho0.dim

    def rhs_for(decomp, pe):
        def rhs(x):
            return lindblad_rhs(x, pe, decomp, params)

        return rhs

    def window_data(w_idx, rho_now):
        if kernel_schedule is not None:
            wc = kernel_schedule[w_idx]
            return wc.decomp, wc.pe
        mean_b, _, _ = moments_from_density(rho_now)
        t_w = w_idx * window

        def delta_m(tp):
            return 2.0 * params.g_m * (mean_b * np.exp(-1j * params.Omega * (tp - t_w))).real

        kernels = window_kernels(params, delta_m, t_w)
        lam_p, lam_m, v_p, v_m, theta = eigenpairs(
            params.Gamma,
            params.Gamma * (params.n_m + 1.0) + kernels.s0,
            params.Gamma * params.n_m + kernels.s0,
            kernels.s2,
        )
        decomp = QuadratureDecomposition(
            lambda_plus=float(lam_p),
            lambda_minus=float(lam_m),
            v_plus=np.asarray(v_p, dtype=complex),
            v_minus=np.asarray(v_m, dtype=complex),
            theta=float(theta),
        )
        pe = float(pe_closed_form(params.g, params.gamma, params.delta0 + delta_m(t_w)))
        return decomp, pe

    # Step-halving accuracy probe on the first window's generator.
    decomp0, pe0 = window_data(0, rho)
    rhs0 = rhs_for(decomp0, pe0)
    full = _rk4_step(rho, h, rhs0)
    half = _rk4_step(_rk4_step(rho, 0.5 * h, rhs0), 0.5 * h, rhs0)
    local_err = float(np.max(np.abs(full - half)))
    if local_err > 1e-6:
        raise ValueError(
            f"dt={dt:.3g} fails the step-halving accuracy check "
            f"(local error {local_err:.2e}); reduce dt"
        )

    times = []
    states = []

    def record(t):
        snap = FockDensityMatrix(dim=dim, entries=rho.copy(), t=t)
        snap.validate()
        times.append(t)
        states.append(snap)

    record(0.0)
    for w in range(n_windows):
        decomp, pe = window_data(w, rho)
        rhs = rhs_for(decomp, pe)
        for j in range(steps):
            rho = _rk4_step(rho, h, rhs)
            gstep = w * steps + j + 1
            if gstep % record_stride == 0 or gstep == n_windows * steps:
                rho = 0.5 * (rho + rho.conj().T)
                t = gstep * h
                trace = float(np.real(np.trace(rho)))
                if abs(trace - 1.0) > TRACE_TOL * (1.0 + t):
                    raise RuntimeError(f"trace drift {trace - 1.0:.3e} at t={t}")
                record(t)

    times_arr = np.array(times)
    mb = np.empty(len(states), dtype=complex)
    mn = np.empty(len(states))
    mb2 = np.empty(len(states), dtype=complex)
    for i, snap in enumerate(states):
        mb[i], mn[i], mb2[i] = moments_from_density(snap)
    return MasterResult(
        times=times_arr,
        states=states,
        moments=MomentSeries(times=times_arr, b=mb, n=mn, b2=mb2),
    )


def _rk4_step(x, h, rhs):
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h * k2)
    k4 = rhs(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Stochastic wave-function unraveling.

def _sse_batch(
    params: PhysParams,
    psi0: np.ndarray,
    duration: float,
    dt: float,
    seeds: Sequence[int],
    schedule: Sequence[WindowCoefficients],
    record_stride: int,
):
    """Normalised state-diffusion trajectories in the interaction picture.

    The free rotation is removed exactly by time-dependent channel
    coefficients; the remaining drift, drift-restoration and noise terms take
    one Euler-Maruyama step per dt, followed by explicit renormalisation.
    Returns per-trajectory moment arrays in the lab frame.
    """
    n_windows, window, steps, h = _window_plan(params, duration, dt, schedule)
    lam_max = max(wc.decomp.lambda_plus for wc in schedule)
    if h * lam_max > 1e-3 + 1e-12:
        raise ValueError(
            f"dt*lambda_plus = {h * lam_max:.3g} too large for the unraveling; "
            "need <= 1e-3"
        )
    n = len(seeds)
    dim = psi0.shape[0]
    psi = np.tile(psi0[:, None], (1, n)).astype(complex)
    gens = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
    omega, g_m = params.Omega, params.g_m

    n_rec = n_windows * steps // record_stride + 1
    out_b = np.empty((n, n_rec), dtype=complex)
    out_n = np.empty((n, n_rec))
    out_b2 = np.empty((n, n_rec), dtype=complex)
    times = np.empty(n_rec)
    i_rec = 0

    def record(t):
        nonlocal i_rec
        mb, mn, mb2 = moments_from_state(psi)
        ph = cmath_exp(-omega * t)
        out_b[:, i_rec] = ph * mb
        out_n[:, i_rec] = mn
        out_b2[:, i_rec] = ph * ph * mb2
        times[i_rec] = t
        i_rec += 1

    def cmath_exp(x):
        return complex(math.cos(x), math.sin(x))

    scale = math.sqrt(0.5 * h)
    record(0.0)
    for w in range(n_windows):
        wc = schedule[w]
        lam = (wc.decomp.lambda_plus, wc.decomp.lambda_minus)
        uu = (wc.decomp.v_plus[0], wc.decomp.v_minus[0])
        ww = (wc.decomp.v_plus[1], wc.decomp.v_minus[1])
        sqlam = (math.sqrt(lam[0]), math.sqrt(lam[1]))
        force = g_m * wc.pe
        dw = np.empty((2, n, steps), dtype=complex)
        for i, gen in enumerate(gens):
            x = gen.standard_normal((steps, 4))
            dw[0, i] = (x[:, 0] + 1j * x[:, 1]) * scale
            dw[1, i] = (x[:, 2] + 1j * x[:, 3]) * scale
        for j in range(steps):
            t = (w * steps + j) * h
            ph = cmath_exp(-omega * t)
            phc = ph.conjugate()
            bpsi = lower_state(psi)
            bdpsi = raise_state(psi)
            delta = np.zeros_like(psi)
            if force != 0.0:
                delta += (-1j * force * h) * (ph * bpsi + phc * bdpsi)
            for s in range(2):
                if lam[s] == 0.0:
                    continue
                u_t = uu[s] * ph
                w_t = ww[s] * phc
                lpsi = u_t * bpsi + w_t * bdpsi
                expl = np.sum(np.conjugate(psi) * lpsi, axis=0)
                ldl = np.conjugate(u_t) * raise_state(lpsi) + np.conjugate(
                    w_t
                ) * lower_state(lpsi)
                delta += (lam[s] * h) * (
                    np.conjugate(expl)[None, :] * lpsi
                    - 0.5 * ldl
                    - 0.5 * (np.abs(expl) ** 2)[None, :] * psi
                )
                delta += sqlam[s] * (lpsi - expl[None, :] * psi) * dw[s, :, j][None, :]
            psi = psi + delta
            norms = np.sqrt(np.sum(np.abs(psi) ** 2, axis=0))
            drift = np.max(np.abs(norms - 1.0))
            if drift > SSE_NORM_TOL:
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise RuntimeError(
                    f"norm drifted by {drift:.3e} in one step "
                    f"(trajectory {bad}, t={t:.6g}); reduce dt"
                )
            psi = psi / norms[None, :]
            gstep = w * steps + j + 1
            if gstep % record_stride == 0 or gstep == n_windows * steps:
                record(gstep * h)
    return times, out_b, out_n, out_b2


def sse_run(
    params: PhysParams,
    psi0: FockStateVector,
    duration: float,
    dt: float,
    seed: int,
    kernel_schedule: Sequence[WindowCoefficients],
    record_stride: int = 16,
) -> MomentSeries:
    """One stochastic wave-function trajectory; emits mechanical moments."""
    amps = psi0.amplitudes / np.linalg.norm(psi0.amplitudes)
    times, b, n, b2 = _sse_batch(
        params, amps, duration, dt, [seed], kernel_schedule, record_stride
    )
    return MomentSeries(times=times, b=b[0], n=n[0], b2=b2[0])


@dataclass(frozen=True)
class SseEnsemble:
    """Trajectory-averaged moments with Monte Carlo standard errors."""

    moments: MomentSeries
    se_b: np.ndarray
    se_n: np.ndarray
    se_b2: np.ndarray
    n_traj: int


def sse_ensemble(
    params: PhysParams,
    psi0: FockStateVector,
    duration: float,
    dt: float,
    n_traj: int,
    master_seed: int,
    kernel_schedule: Sequence[WindowCoefficients],
    record_stride: int = 16,
) -> SseEnsemble:
    """Average many unraveling trajectories (deterministic per-index seeds)."""
    amps = psi0.amplitudes / np.linalg.norm(psi0.amplitudes)
    seeds = [derive_trajectory_seed(master_seed, i) for i in range(n_traj)]
    times, b, n, b2 = _sse_batch(
        params, amps, duration, dt, seeds, kernel_schedule, record_stride
    )
    rt = math.sqrt(n_traj)
    moments = MomentSeries(
        times=times, b=b.mean(axis=0), n=n.mean(axis=0), b2=b2.mean(axis=0)
    )
    return SseEnsemble(
        moments=moments,
        se_b=np.sqrt(np.var(b.real, axis=0, ddof=1) + np.var(b.imag, axis=0, ddof=1))
        / rt,
        se_n=np.std(n, axis=0, ddof=1) / rt,
        se_b2=np.sqrt(np.var(b2.real, axis=0, ddof=1) + np.var(b2.imag, axis=0, ddof=1))
        / rt,
        n_traj=n_traj,
    )


def make_frozen_schedule(
    decomp: QuadratureDecomposition, pe: float, n_windows: int
) -> list[WindowCoefficients]:
    """Repeat one set of scattering data over every window."""
    return [WindowCoefficients(decomp=decomp, pe=pe)] * n_windows


def gaussian_ensemble_options(
    schedule: Sequence[WindowCoefficients],
    steps_per_window: int = 256,
    record_stride: int = 16,
) -> TrajectoryOptions:
    """Trajectory options matching an oracle comparison grid."""
    return TrajectoryOptions(
        steps_per_window=steps_per_window,
        record_stride=record_stride,
        schedule=list(schedule),
    )
