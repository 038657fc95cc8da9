"""Lifted, finite-dimensional model of the sampled-data delay error system.

Signal flow being modelled::

    w --> W(s) --> v --+--> e^{-Ds} --> sample(T) ---------> u_d --+--> e_d
                       |                                           |  (+)
                       +--> sample(T) --> v_d --> K(z) --> u_bar --+  (-)

With ``D = mT + d`` the lifted system has state
``xi = [x(nT); v(nT - d); delay line of length m]`` and an input operator
from L2[0, T) to R^{nu+1}. Only the composition of that operator with
its adjoint (a (nu+1)x(nu+1) PSD matrix) is ever formed; any factor of it
yields a discrete system with the same H-infinity norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fdh.errors import InvalidInputError
from fdh.statespace import (
    ContinuousStateSpace,
    DiscreteStateSpace,
    matrix_exponential,
    van_loan_gramian,
)

__all__ = [
    "DelaySpec",
    "LiftedSystem",
    "split_delay",
    "delay_chain",
    "lift_error_system",
    "psd_factor",
    "assemble_ed",
]

_SNAP = 1e-12


@dataclass(frozen=True)
class DelaySpec:
    """Total delay ``D = m T + d`` with integer ``m >= 0`` and ``0 <= d < T``."""

    T: float
    D: float
    m: int
    d: float

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidInputError(f"sampling period T must be > 0, got {self.T}")
        if not (np.isfinite(self.D) and self.D >= 0):
            raise InvalidInputError(f"delay D must be >= 0, got {self.D}")
        if self.m < 0 or not (0 <= self.d < self.T):
            raise InvalidInputError(f"inconsistent delay split m={self.m}, d={self.d}")

    def to_dict(self) -> dict:
        return {"T": self.T, "D": self.D, "m": self.m, "d": self.d}


def split_delay(T: float, D: float) -> DelaySpec:
    """Split D into whole sample periods and a fractional remainder.

    Remainders within ``1e-12 T`` of 0 or T are snapped, so e.g.
    ``D = 3 * 0.2`` splits as ``m=3, d=0`` rather than ``m=2, d=0.2-eps``.
    """
    if not (np.isfinite(T) and T > 0):
        raise InvalidInputError(f"sampling period T must be > 0, got {T}")
    if not (np.isfinite(D) and D >= 0):
        raise InvalidInputError(f"delay D must be >= 0, got {D}")
    m = math.floor(D / T)
    d = D - m * T
    if d >= T or abs(d - T) <= _SNAP * T:
        m, d = m + 1, 0.0
    elif d < 0 or abs(d) <= _SNAP * T:
        d = 0.0
    return DelaySpec(T=float(T), D=float(D), m=int(m), d=float(d))


def delay_chain(m: int, sample_period: float = 1.0) -> DiscreteStateSpace:
    """Shift-register realization of ``z^-m`` (a pure gain 1 for m = 0)."""
    if m < 0:
        raise InvalidInputError(f"delay length must be >= 0, got {m}")
    if m == 0:
        return DiscreteStateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)),
                                  np.ones((1, 1)), sample_period)
    A = np.eye(m, k=-1)
    B = np.zeros((m, 1))
    B[0, 0] = 1.0
    C = np.zeros((1, m))
    C[0, -1] = 1.0
    return DiscreteStateSpace(A, B, C, np.zeros((1, 1)), sample_period)


def psd_factor(M, rtol: float = 1e-12) -> np.ndarray:
    """Return F with ``F @ F.T == M`` for a symmetric PSD matrix M.

    Eigenvalues below ``rtol * lambda_max`` are dropped, so the number
    of columns is the numerical rank. Small negative eigenvalues (down to
    ``-1e-10 * ||M||``) are treated as rounding and clamped to zero.
    """
    M = np.array(M, dtype=float, ndmin=2)
    if M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"psd_factor needs a square matrix, got {M.shape}")
    scale = np.linalg.norm(M, 2) if M.size else 0.0
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > 1e-10 * max(scale, 1e-300):
        raise InvalidInputError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})")
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    if lam.size and lam[0] < -1e-10 * scale:
        raise InvalidInputError(f"matrix is indefinite: eigenvalue {lam[0]:.6e}")
    if scale == 0.0:
        return np.zeros((M.shape[0], 0))
    keep = lam > rtol * lam[-1]
    return V[:, keep] * np.sqrt(lam[keep])


@dataclass(frozen=True)
class LiftedSystem:
    """Finite-dimensional data of the lifted error system.

    ``A_d``, ``C1`` (ideal branch output u_d) and ``C2`` (sampled signal
    v_d) act on ``xi = [x1; x2; x3]``; ``BBstar`` is the input operator
    composed with its adjoint and ``Bd_factor`` a rank-revealing factor
    of it.
    """

    A_d: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    BBstar: np.ndarray
    Bd_factor: np.ndarray
    source: ContinuousStateSpace
    delay: DelaySpec

    @property
    def order(self) -> int:
        return self.A_d.shape[0]

    @property
    def input_matrix(self) -> np.ndarray:
        """``[Bd_factor; 0]``, the factor padded with zero rows for the delay line."""
        n, r = self.order, self.Bd_factor.shape[1]
        B = np.zeros((n, r))
        B[: self.Bd_factor.shape[0]] = self.Bd_factor
        return B

    def to_dict(self) -> dict:
        return {
            "delay": self.delay.to_dict(),
            "source": self.source.to_dict(),
            "A_d": self.A_d.tolist(),
            "C1": self.C1.tolist(),
            "C2": self.C2.tolist(),
            "BBstar": self.BBstar.tolist(),
            "Bd_factor": self.Bd_factor.tolist(),
        }


def lift_error_system(sys: ContinuousStateSpace, delay: DelaySpec) -> LiftedSystem:
    """Build the lifted realization and its norm-equivalent input factor."""
    A, C = sys.A, sys.C
    nu, m = sys.order, delay.m
    T, d = delay.T, delay.d
    n = nu + 1 + m

    eAT = matrix_exponential(A, T)
    A_d = np.zeros((n, n))
    A_d[:nu, :nu] = eAT
    A_d[nu, :nu] = (C @ matrix_exponential(A, T - d))[0]
    C1 = np.zeros((1, n))
    C2 = np.zeros((1, n))
    C2[0, :nu] = C[0]
    if m == 0:
        C1[0, nu] = 1.0
    else:
        chain = delay_chain(m)
        A_d[nu + 1:, nu] = chain.Bd[:, 0]
        A_d[nu + 1:, nu + 1:] = chain.Ad
        C1[0, nu + 1:] = chain.Cd[0]

    M_T = van_loan_gramian(sys, T).M
    M_Td = van_loan_gramian(sys, T - d).M
    cross = matrix_exponential(A, d) @ M_Td @ C.T
    BB = np.empty((nu + 1, nu + 1))
    BB[:nu, :nu] = M_T
    BB[:nu, nu:] = cross
    BB[nu:, :nu] = cross.T
    BB[nu:, nu:] = C @ M_Td @ C.T

    for arr in (A_d, C1, C2, BB):
        arr.setflags(write=False)
    return LiftedSystem(A_d=A_d, C1=C1, C2=C2, BBstar=BB, Bd_factor=psd_factor(BB),
                        source=sys, delay=delay)


def assemble_ed(lifted: LiftedSystem, filter) -> DiscreteStateSpace:
    """Realize ``E_d(z) = (C1 - K(z) C2)(zI - A_d)^-1 [Bd; 0]``.

    ``filter`` is any object with a ``taps`` vector (causal FIR). K is
    realized as a tapped delay line fed by ``v_d = C2 xi`` and subtracted
    from the ideal branch. Input dimension is the rank of BB*.
    """
    k = np.asarray(filter.taps, dtype=float)
    n = lifted.order
    L = len(k) - 1
    B_in = lifted.input_matrix
    r = B_in.shape[1]

    A = np.zeros((n + L, n + L))
    A[:n, :n] = lifted.A_d
    B = np.zeros((n + L, r))
    B[:n] = B_in
    C = np.zeros((1, n + L))
    C[0, :n] = lifted.C1[0] - k[0] * lifted.C2[0]
    if L:
        A[n, :n] = lifted.C2[0]
        A[n + 1:, n:n + L - 1] = np.eye(L - 1)
        C[0, n:] = -k[1:]
    return DiscreteStateSpace(A, B, C, np.zeros((1, r)), sample_period=lifted.delay.T)
