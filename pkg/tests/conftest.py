import numpy as np
import pytest

from hybridmech.bloch import PhysParams
from hybridmech.lindblad import QuadratureDecomposition, eigenpairs
from hybridmech.spectrum import NoiseKernels


@pytest.fixture
def adiabatic_params():
    return PhysParams(gamma=1.0, g=1.0, Omega=0.01, g_m=0.02)


def random_kernel_set(rng, s0_range=(-3, 3), gamma_range=(-3, 3), n_range=(-2, 3)):
    """One random valid (Gamma, n_m, s0, s2) draw on log scales."""
    s0 = 10.0 ** rng.uniform(*s0_range)
    s2 = s0 * rng.uniform(0.0, 1.0) * np.exp(2j * np.pi * rng.uniform())
    Gamma = 10.0 ** rng.uniform(*gamma_range)
    n_m = 10.0 ** rng.uniform(*n_range)
    return Gamma, n_m, s0, s2


def decomposition_from_set(Gamma, n_m, s0, s2):
    kernels = NoiseKernels(s0=s0, s2=s2)
    lam_p, lam_m, v_p, v_m, theta = eigenpairs(
        Gamma, Gamma * (n_m + 1.0) + s0, Gamma * n_m + s0, s2
    )
    decomp = QuadratureDecomposition(
        lambda_plus=float(lam_p),
        lambda_minus=float(lam_m),
        v_plus=np.asarray(v_p, dtype=complex),
        v_minus=np.asarray(v_m, dtype=complex),
        theta=float(theta),
    )
    return kernels, decomp
