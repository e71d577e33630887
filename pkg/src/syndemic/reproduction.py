"""Reproduction numbers, by closed form and by a next-generation matrix.

The closed forms carry an explicit reference-population argument because the
published benchmark values mix two conventions: the table sweeps use the
disease-free population (prefactor exactly 1), while the stability examples
use the initial census of 50000 (prefactor 0.9996).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .model import (DomainError, INFECTED_INDICES, Parameters,
                    force_of_infection, full_rhs)
from .stability import eigenvalues, fd_jacobian


class ReproductionNumbers(NamedTuple):
    r1: float
    r2: float
    r0: float
    n_ref: float


def _prefactor(params: Parameters, n_ref: Optional[float]) -> float:
    s0 = params.Lambda / params.mu
    if n_ref is None:
        return 1.0
    if n_ref <= 0:
        raise DomainError("n_ref must be positive")
    return s0 / n_ref


def r1_closed(params: Parameters, n_ref: Optional[float] = None) -> float:
    """TB reproduction number: new latent cases per active case, times the
    fraction progressing to active disease."""
    p = params
    d1 = p.k1 + p.tau1 + p.mu
    d2 = p.tau2 + p.dT + p.mu
    return _prefactor(p, n_ref) * p.beta1 * p.k1 / (d1 * d2)


def r2_closed(params: Parameters, n_ref: Optional[float] = None) -> float:
    """HIV reproduction number, AIDS stage weighted by its infectivity."""
    p = params
    d3 = p.rho1 + p.mu
    d4 = p.alpha1 + p.mu + p.dA
    return (_prefactor(p, n_ref) * p.beta2 * (d4 + p.eta * p.rho1)
            / (d3 * d4 - p.alpha1 * p.rho1))


def r0(params: Parameters, n_ref: Optional[float] = None) -> ReproductionNumbers:
    """Bundle r1, r2, and their max under one population convention."""
    r1 = r1_closed(params, n_ref)
    r2 = r2_closed(params, n_ref)
    return ReproductionNumbers(r1=r1, r2=r2, r0=max(r1, r2),
                               n_ref=params.Lambda / params.mu if n_ref is None else float(n_ref))


def spectral_radius(m) -> float:
    """Max |eigenvalue| of a small matrix."""
    return max(abs(lam) for lam in eigenvalues(m))


@dataclass
class NextGenDecomposition:
    infected_indices: Tuple[int, ...]
    F: np.ndarray            # 8x8 new-infection matrix
    V: np.ndarray            # 8x8 transition matrix
    rho: float


def _infection_gains(y: np.ndarray, params: Parameters) -> np.ndarray:
    """New-infection inflow for each compartment (zero outside infected).

    Counted as new infections: both routes out of S and the reinfection
    routes out of the recovered classes, plus the two cross-infections of
    already singly-infected people. Progression, treatment, and death flows
    are transitions.
    """
    lam = force_of_infection(y, params)
    g = np.zeros(10)
    g[1] = lam.lambdaT * y[0] + params.beta1p * lam.lambdaT * y[3]
    g[4] = lam.lambdaH * (y[0] + y[3])
    g[6] = params.beta2p * lam.lambdaT * y[8]
    g[7] = params.delta * lam.lambdaH * y[2] + params.psi * lam.lambdaT * y[4]
    return g


def ngm_decomposition(params: Parameters) -> NextGenDecomposition:
    """Next-generation matrices at the disease-free state.

    F and V are the derivatives of the new-infection and transition parts of
    the infected block, by central finite differences over the 8 infected
    coordinates. rho must reproduce max(r1, r2) at the disease-free
    population scale; the test suite enforces that agreement.
    """
    idx = np.array(INFECTED_INDICES)
    dfe = np.zeros(10)
    dfe[0] = params.Lambda / params.mu

    def embed(z: np.ndarray) -> np.ndarray:
        y = dfe.copy()
        y[idx] = z
        return y

    gains = fd_jacobian(lambda z: _infection_gains(embed(z), params)[idx],
                        dfe[idx])
    jac_inf = fd_jacobian(lambda z: full_rhs(embed(z), params)[idx], dfe[idx])
    f_mat = gains
    v_mat = gains - jac_inf
    try:
        k_mat = f_mat @ np.linalg.inv(v_mat)
    except np.linalg.LinAlgError as exc:
        raise DomainError("transition matrix is singular") from exc
    return NextGenDecomposition(infected_indices=tuple(int(i) for i in idx),
                                F=f_mat, V=v_mat,
                                rho=spectral_radius(k_mat))
