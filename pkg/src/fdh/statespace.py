"""Continuous- and discrete-time LTI state-space primitives.

Everything downstream (lifting, design, analysis) is built from the
handful of objects here: a strictly proper, stable SISO continuous model
``{A, B, C}``, a generic discrete realization ``{Ad, Bd, Cd, Dd}``, the
matrix exponential and the finite-horizon controllability gramian

    M(t) = int_0^t exp(A s) B B^T exp(A^T s) ds

evaluated with a single exponential of a doubled block matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fdh.errors import InvalidInputError, NumericalError

__all__ = [
    "ContinuousStateSpace",
    "DiscreteStateSpace",
    "GramianResult",
    "first_order_lowpass",
    "matrix_exponential",
    "van_loan_gramian",
    "impulse_invariant_discretize",
    "transfer_at",
    "frequency_response",
]

HURWITZ_MARGIN = 1e-10

# Higham (2005) scaling-and-squaring: Pade degrees and their 1-norm bounds.
_PADE_DEGREES = (3, 5, 7, 9, 13)
_PADE_THETA = (
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
)
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}


def _as_matrix(x, name, shape=None) -> np.ndarray:
    arr = np.array(x, dtype=float, ndmin=2)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if shape is not None and arr.shape != shape:
        raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ContinuousStateSpace:
    """Minimal realization ``x' = A x + B w, v = C x`` of a SISO model W(s).

    Strictly proper by construction (there is no feedthrough term) and
    checked to be Hurwitz unless built through :meth:`unchecked`.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    check_stability: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        nu = A.shape[0]
        if nu < 1 or A.shape != (nu, nu):
            raise InvalidInputError(f"A must be square and non-empty, got {A.shape}")
        B = _as_matrix(np.reshape(np.asarray(self.B, dtype=float), (-1, 1)), "B", (nu, 1))
        C = _as_matrix(np.reshape(np.asarray(self.C, dtype=float), (1, -1)), "C", (1, nu))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if self.check_stability:
            eigs = np.linalg.eigvals(A)
            worst = float(np.max(eigs.real))
            if worst >= -HURWITZ_MARGIN:
                raise InvalidInputError(
                    f"A is not Hurwitz: eigenvalue with real part {worst:.3e} "
                    f"(need < {-HURWITZ_MARGIN:g})"
                )

    @classmethod
    def unchecked(cls, A, B, C) -> "ContinuousStateSpace":
        """Build without the Hurwitz check (tests, marginal examples)."""
        return cls(A, B, C, check_stability=False)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def transfer(self, s) -> np.ndarray:
        """Evaluate W(s) = C (sI - A)^-1 B at one or many complex points."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        nu = self.order
        M = s[:, None, None] * np.eye(nu) - self.A
        x = np.linalg.solve(M, np.broadcast_to(self.B, (len(s), nu, 1)))
        return (self.C @ x)[:, 0, 0]

    def impulse_response(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([(self.C @ matrix_exponential(self.A, ti) @ self.B)[0, 0] for ti in t])

    def similarity(self, S) -> "ContinuousStateSpace":
        """Return the realization in coordinates ``x_new = S x``."""
        S = np.asarray(S, dtype=float)
        Si = np.linalg.inv(S)
        return ContinuousStateSpace(S @ self.A @ Si, S @ self.B, self.C @ Si,
                                    check_stability=self.check_stability)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ContinuousStateSpace":
        return cls(data["A"], data["B"], data["C"])


def first_order_lowpass(omega_c: float) -> ContinuousStateSpace:
    """Realization of W(s) = wc / (s + wc)."""
    if not omega_c > 0:
        raise InvalidInputError(f"cutoff omega_c must be > 0, got {omega_c}")
    return ContinuousStateSpace([[-omega_c]], [[omega_c]], [[1.0]])


@dataclass(frozen=True)
class DiscreteStateSpace:
    """Generic realization ``x[n+1] = Ad x + Bd u, y = Cd x + Dd u``.

    The state may be empty (n = 0), in which case only ``Dd`` matters.
    """

    Ad: np.ndarray
    Bd: np.ndarray
    Cd: np.ndarray
    Dd: np.ndarray
    sample_period: float = 1.0

    def __post_init__(self):
        Ad = np.array(self.Ad, dtype=float)
        Bd = np.array(self.Bd, dtype=float)
        Cd = np.array(self.Cd, dtype=float)
        Dd = np.array(self.Dd, dtype=float, ndmin=2)
        if Ad.size == 0:
            n = 0
            Ad = Ad.reshape(0, 0)
        else:
            Ad = np.atleast_2d(Ad)
            n = Ad.shape[0]
        q, p = Dd.shape
        Bd = Bd.reshape(n, p)
        Cd = Cd.reshape(q, n)
        if Ad.shape != (n, n):
            raise InvalidInputError(f"Ad must be square, got {Ad.shape}")
        for name, arr in (("Ad", Ad), ("Bd", Bd), ("Cd", Cd), ("Dd", Dd)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} has non-finite entries")
            arr.setflags(write=False)
        if not self.sample_period > 0:
            raise InvalidInputError(f"sample_period must be > 0, got {self.sample_period}")
        object.__setattr__(self, "Ad", Ad)
        object.__setattr__(self, "Bd", Bd)
        object.__setattr__(self, "Cd", Cd)
        object.__setattr__(self, "Dd", Dd)

    @property
    def order(self) -> int:
        return self.Ad.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        """(outputs, inputs)."""
        return self.Dd.shape

    def is_schur(self, margin: float = 0.0) -> bool:
        if self.order == 0:
            return True
        return bool(np.max(np.abs(np.linalg.eigvals(self.Ad))) < 1.0 - margin)

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.Ad) if self.order else np.empty(0, complex)

    def impulse_response(self, n_samples: int) -> np.ndarray:
        """Markov parameters h[0..n-1], each of shape (q, p)."""
        out = np.empty((n_samples,) + self.shape)
        out[0] = self.Dd
        x = self.Bd.copy()
        for k in range(1, n_samples):
            out[k] = self.Cd @ x
            x = self.Ad @ x
        return out


@dataclass(frozen=True)
class GramianResult:
    M: np.ndarray
    horizon: float


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """Return ``exp(A t)`` by scaling and squaring with a diagonal Pade approximant.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Real square matrix.
    t : float
        Time multiplier, any sign.

    Returns
    -------
    ndarray, shape (n, n)
    """
    A = np.array(A, dtype=float, ndmin=2)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"matrix_exponential needs a square matrix, got {A.shape}")
    if not (np.all(np.isfinite(A)) and np.isfinite(t)):
        raise InvalidInputError("matrix_exponential: non-finite input")
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    X = A * t
    norm1 = np.linalg.norm(X, 1)
    ident = np.eye(n)
    if norm1 == 0.0:
        return ident

    squarings = 0
    for degree, theta in zip(_PADE_DEGREES, _PADE_THETA):
        if norm1 <= theta:
            break
    else:
        degree = 13
        squarings = max(0, int(np.ceil(np.log2(norm1 / _PADE_THETA[-1]))))
        X = X / 2.0**squarings

    b = _PADE_COEFFS[degree]
    X2 = X @ X
    if degree < 13:
        powers = [ident, X2]
        for _ in range(2, degree // 2 + 1):
            powers.append(powers[-1] @ X2)
        U = sum(b[2 * k + 1] * powers[k] for k in range(degree // 2 + 1))
        V = sum(b[2 * k] * powers[k] for k in range(degree // 2 + 1))
        U = X @ U
    else:
        X4 = X2 @ X2
        X6 = X4 @ X2
        U = X @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
                 + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident)
        V = (X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
             + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        F = F @ F
    return F


def van_loan_gramian(sys: ContinuousStateSpace, t: float) -> GramianResult:
    """Finite-horizon gramian ``M(t) = int_0^t e^{As} B B^T e^{A^T s} ds``.

    Uses one exponential of ``[[-A, B B^T], [0, A^T]] s``; with ``F12``
    and ``F22`` its upper-right and lower-right blocks,
    ``M(s) = F22^T F12``. Exact for singular A, no quadrature.

    The block exponential contains ``e^{-As}``, which grows quickly for
    long horizons and costs accuracy through cancellation. The formula is
    therefore applied on ``s = t / 2^k`` with ``||A s||_1 <= 1`` and
    extended by ``M(2s) = M(s) + e^{As} M(s) e^{A^T s}``, which only adds
    PSD terms.
    """
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError(f"gramian horizon must be finite and >= 0, got {t}")
    A, B = sys.A, sys.B
    nu = A.shape[0]
    norm1 = np.linalg.norm(A, 1) * t
    doublings = max(0, int(np.ceil(np.log2(norm1)))) if norm1 > 1.0 else 0
    s = t / 2.0**doublings
    H = np.zeros((2 * nu, 2 * nu))
    H[:nu, :nu] = -A
    H[:nu, nu:] = B @ B.T
    H[nu:, nu:] = A.T
    F = matrix_exponential(H, s)
    M = F[nu:, nu:].T @ F[:nu, nu:]
    M = 0.5 * (M + M.T)
    if doublings:
        Phi = F[nu:, nu:].T  # e^{A s}
        for _ in range(doublings):
            M = M + Phi @ M @ Phi.T
            M = 0.5 * (M + M.T)
            Phi = Phi @ Phi
    M.setflags(write=False)
    return GramianResult(M=M, horizon=float(t))


def impulse_invariant_discretize(sys: ContinuousStateSpace, T: float,
                                 scale_by_period: bool = True) -> DiscreteStateSpace:
    """Impulse-invariant discretization of W(s) with sampling period T.

    The discrete impulse response is ``h_d[n] = T h(nT)`` for ``n >= 0``,
    realized as ``{e^{AT}, T e^{AT} B, C, T C B}``. With
    ``scale_by_period=False`` the leading T is dropped.
    """
    if not T > 0:
        raise InvalidInputError(f"sampling period must be > 0, got {T}")
    gain = T if scale_by_period else 1.0
    eAT = matrix_exponential(sys.A, T)
    return DiscreteStateSpace(eAT, gain * eAT @ sys.B, sys.C, gain * sys.C @ sys.B,
                              sample_period=T)


def frequency_response(sys: DiscreteStateSpace, z) -> np.ndarray:
    """Vectorized ``Cd (zI - Ad)^-1 Bd + Dd``; returns shape (len(z), q, p)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    q, p = sys.shape
    n = sys.order
    out = np.broadcast_to(sys.Dd.astype(complex), (len(z), q, p)).copy()
    if n == 0:
        return out
    M = z[:, None, None] * np.eye(n) - sys.Ad
    # guard against evaluating on (or numerically at) a pole
    cond = np.linalg.cond(M)
    if not np.all(np.isfinite(cond)) or np.any(cond > 1e14):
        bad = z[~np.isfinite(cond) | (cond > 1e14)][0]
        raise NumericalError(f"transfer evaluated at a pole of the system (z={bad})")
    X = np.linalg.solve(M, np.broadcast_to(sys.Bd, (len(z), n, p)))
    out += sys.Cd @ X
    return out


def transfer_at(sys: DiscreteStateSpace, z: complex) -> np.ndarray:
    """Transfer matrix ``Cd (zI - Ad)^-1 Bd + Dd`` at a single point z."""
    return frequency_response(sys, [z])[0]
