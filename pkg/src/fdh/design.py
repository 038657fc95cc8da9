"""Fractional delay filter designers.

* :func:`closed_form_hinf` - optimal two-tap filter for a first-order
  signal model ``W(s) = wc / (s + wc)``, with :func:`closed_form_optimal_norm`
  giving the attained worst-case gain.
* :func:`minimax_fir_design` - FIR filter minimizing the worst-case gain
  of the lifted error system over a frequency grid (any stable W).
* :func:`h2_fir_design` - the classical weighted least-squares baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from fdh.errors import ConvergenceError, DesignError, InvalidInputError
from fdh.lifting import DelaySpec, LiftedSystem
from fdh.statespace import DiscreteStateSpace, frequency_response

__all__ = [
    "FirFilter",
    "MinimaxResult",
    "ideal_response",
    "closed_form_taps",
    "closed_form_hinf",
    "closed_form_optimal_norm",
    "h2_normal_equations",
    "h2_fir_design",
    "minimax_fir_design",
    "minimax_fir_solve",
]

_LOG_SPACE_THRESHOLD = 700.0


@dataclass(frozen=True)
class FirFilter:
    """Causal FIR filter ``K(z) = sum_n taps[n] z^-n``."""

    taps: np.ndarray
    sample_period: float = 1.0

    def __post_init__(self):
        taps = np.array(self.taps, dtype=float).ravel()
        if taps.size < 1:
            raise InvalidInputError("FIR filter needs at least one tap")
        if not np.all(np.isfinite(taps)):
            raise InvalidInputError("FIR taps must be finite")
        if not self.sample_period > 0:
            raise InvalidInputError(f"sample_period must be > 0, got {self.sample_period}")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "sample_period", float(self.sample_period))

    def __len__(self):
        return self.taps.size

    def transfer(self, z) -> np.ndarray:
        """Evaluate K(z) at complex points z (array in, array out)."""
        z = np.asarray(z, dtype=complex)
        zinv = 1.0 / z
        # Horner in z^-1
        acc = np.zeros_like(z)
        for k in self.taps[::-1]:
            acc = acc * zinv + k
        return acc

    def to_dict(self) -> dict:
        return {"taps": self.taps.tolist(), "sample_period": self.sample_period}

    @classmethod
    def from_dict(cls, data: dict) -> "FirFilter":
        return cls(data["taps"], data.get("sample_period", 1.0))

    def to_text(self) -> str:
        """One tap per line, shortest round-trip repr."""
        return "".join(f"{float(k)!r}\n" for k in self.taps)

    @classmethod
    def from_text(cls, text: str, sample_period: float = 1.0) -> "FirFilter":
        return cls([float(line) for line in text.split()], sample_period)


def ideal_response(n, D: float, T: float):
    """Impulse response ``sinc(n - D/T)`` of the ideal (band-limited) delay."""
    if not T > 0:
        raise InvalidInputError(f"sampling period must be > 0, got {T}")
    x = np.asarray(n, dtype=float) - D / T
    # np.sinc leaves ~1e-17 residue at nonzero integers
    return np.where(x == np.round(x), (x == 0).astype(float), np.sinc(x))


def _neg_expm1(x):
    # 1 - exp(-x), accurate for small x
    return -math.expm1(-x)


def closed_form_taps(omega_c: float, T: float, d: float) -> tuple[float, float]:
    """Coefficients ``(a0, a1)`` of the optimal filter for fractional delay d."""
    if not omega_c > 0:
        raise InvalidInputError(f"cutoff omega_c must be > 0, got {omega_c}")
    if not (T > 0 and 0 <= d < T):
        raise InvalidInputError(f"need T > 0 and 0 <= d < T, got T={T}, d={d}")
    wT = omega_c * T
    if wT <= _LOG_SPACE_THRESHOLD:
        a0 = math.sinh(omega_c * (T - d)) / math.sinh(wT)
    else:
        a0 = math.exp(-omega_c * d) * _neg_expm1(2 * omega_c * (T - d)) / _neg_expm1(2 * wT)
    a1 = math.exp(-omega_c * (T - d)) - math.exp(-wT) * a0
    return a0, a1


def closed_form_hinf(omega_c: float, delay: DelaySpec) -> FirFilter:
    """Optimal filter ``a0 z^-m + a1 z^-(m+1)`` for ``W(s) = wc/(s + wc)``.

    The filter has ``m + 2`` taps; with ``d = 0`` it reduces to ``z^-m``.
    """
    a0, a1 = closed_form_taps(omega_c, delay.T, delay.d)
    taps = np.zeros(delay.m + 2)
    taps[delay.m] = a0
    taps[delay.m + 1] = a1
    return FirFilter(taps, delay.T)


def closed_form_optimal_norm(omega_c: float, delay: DelaySpec) -> float:
    """Worst-case L2 -> l2 gain attained by :func:`closed_form_hinf`."""
    if not omega_c > 0:
        raise InvalidInputError(f"cutoff omega_c must be > 0, got {omega_c}")
    T, d = delay.T, delay.d
    if d == 0:
        return 0.0
    a, b = omega_c * d, omega_c * (T - d)
    if omega_c * T <= _LOG_SPACE_THRESHOLD:
        ratio = math.sinh(a) * math.sinh(b) / math.sinh(omega_c * T)
    else:
        ratio = 0.5 * _neg_expm1(2 * a) * _neg_expm1(2 * b) / _neg_expm1(2 * (a + b))
    return math.sqrt(omega_c * ratio)


def _simpson_weights(n: int, h: float) -> np.ndarray:
    if n < 3 or n % 2 == 0:
        raise InvalidInputError(f"composite Simpson needs an odd node count >= 3, got {n}")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def h2_normal_equations(Wd: DiscreteStateSpace, D: float, N: int,
                        grid_points: int = 1025) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrix G and right-hand side b of the weighted least-squares design.

    ``G[n, l] = (1/W_N) int |Wd|^2 cos(w (n - l) T) dw`` and
    ``b[n] = (1/W_N) int |Wd|^2 cos(w (n T - D)) dw`` over ``[0, W_N]``,
    ``W_N = pi/T``, by composite Simpson. An even ``grid_points`` is
    bumped to the next odd count.
    """
    if N < 1:
        raise InvalidInputError(f"number of taps must be >= 1, got {N}")
    if grid_points < 64:
        raise InvalidInputError(f"grid_points must be >= 64, got {grid_points}")
    if not Wd.is_schur():
        raise InvalidInputError("weighting Wd must be stable (Schur)")
    T = Wd.sample_period
    npts = grid_points + (1 - grid_points % 2)
    wn = math.pi / T
    omega = np.linspace(0.0, wn, npts)
    weight = _simpson_weights(npts, omega[1] - omega[0]) / wn
    mag2 = np.abs(frequency_response(Wd, np.exp(1j * omega * T))[:, 0, 0]) ** 2
    q = weight * mag2
    n = np.arange(N)
    # G is Toeplitz in (n - l)
    lags = np.cos(np.outer(n * T, omega)) @ q
    G = scipy.linalg.toeplitz(lags)
    b = np.cos(np.outer(n * T, omega) - omega * D) @ q
    return G, b


def h2_fir_design(Wd: DiscreteStateSpace, D: float, N: int,
                  grid_points: int = 1025) -> FirFilter:
    """Weighted least-squares (H2) FIR approximation of ``e^{-jwD}`` on the baseband."""
    G, b = h2_normal_equations(Wd, D, N, grid_points)
    try:
        factor = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise DesignError(f"H2 normal equations are singular: {exc}") from exc
    if np.linalg.cond(G) > 1e14:
        raise DesignError("H2 normal equations are numerically singular (cond > 1e14)")
    taps = scipy.linalg.cho_solve(factor, b)
    return FirFilter(taps, Wd.sample_period)


@dataclass
class MinimaxResult:
    filter: FirFilter
    objective: float
    lower_bound: float
    iterations: int
    history: list = field(default_factory=list)
    grid: np.ndarray = field(default=None, repr=False)


def _branch_responses(lifted: LiftedSystem, omega: np.ndarray):
    """Row vectors ``C_i (zI - A_d)^-1 [Bd; 0]`` for i = 1, 2 on ``z = e^{jwT}``."""
    T = lifted.delay.T
    z = np.exp(1j * omega * T)
    n = lifted.order
    B = lifted.input_matrix
    X = np.linalg.solve(z[:, None, None] * np.eye(n) - lifted.A_d,
                        np.broadcast_to(B, (len(z),) + B.shape))
    g1 = (lifted.C1 @ X)[:, 0, :]
    g2 = (lifted.C2 @ X)[:, 0, :]
    return z, g1, g2


def minimax_fir_solve(lifted: LiftedSystem, N: int, grid_points: int = 1024,
                      tol: float = 1e-6, max_iter: int = 200,
                      regularization: float = 1e-12) -> MinimaxResult:
    """Grid minimax FIR design, returning the full solver record.

    Minimizes ``max_i ||E_d(e^{j w_i T})||_2`` over ``w_i`` uniformly
    spaced on ``[0, pi/T]``. ``E_d`` is affine in the taps, so the problem
    is a convex minimax of Euclidean norms. It is solved in epigraph form
    (``min t`` s.t. ``||a_i - B_i k||^2 <= t``) by a log-barrier method:
    every Newton step is a reweighted least-squares solve with weights
    ``1 / (t - q_i)``. The duality gap of each central point gives a
    certified lower bound; iteration stops when best upper bound minus
    lower bound is below ``tol``. ``history`` is the non-increasing
    sequence of incumbent objective values.
    """
    if N < 1:
        raise InvalidInputError(f"number of taps must be >= 1, got {N}")
    if grid_points < 64:
        raise InvalidInputError(f"grid_points must be >= 64, got {grid_points}")
    T = lifted.delay.T
    omega = np.linspace(0.0, math.pi / T, grid_points)
    z, g1, g2 = _branch_responses(lifted, omega)
    # real stacking: residual_i = a_i - Bm_i k, shape (P, 2r) and (P, 2r, N)
    a = np.concatenate([g1.real, g1.imag], axis=1)
    zpow = z[:, None] ** (-np.arange(N))[None, :]
    cg = zpow[:, None, :] * g2[:, :, None]
    Bm = np.concatenate([cg.real, cg.imag], axis=1)

    def objective(k):
        res = a - np.einsum("pin,n->pi", Bm, k)
        return math.sqrt(float(np.max(np.sum(res**2, axis=1))))

    scale = objective(np.zeros(N))
    if scale == 0.0 or a.shape[1] == 0:
        k = np.zeros(N)
        return MinimaxResult(FirFilter(k, T), 0.0, 0.0, 0, [0.0], omega)
    a = a / scale
    Bm = Bm / scale
    P = len(omega)

    # least-squares start (exact when the delay is an integer number of samples)
    k = np.linalg.lstsq(Bm.reshape(-1, N), a.reshape(-1), rcond=None)[0]
    best_k, best = k.copy(), objective(k) * scale
    history = [best]
    lower = 0.0
    if best - lower <= tol:
        return MinimaxResult(FirFilter(best_k, T), best, lower, 0, history, omega)

    def q_and_grad(k):
        res = np.einsum("pin,n->pi", Bm, k) - a
        q = np.sum(res**2, axis=1)
        gq = 2.0 * np.einsum("pin,pi->pn", Bm, res)
        return q, gq

    BtB = 2.0 * np.einsum("pin,pim->pnm", Bm, Bm)
    q, _ = q_and_grad(k)
    t = 1.1 * float(np.max(q)) + 1e-9
    s = P / max(t, 1e-12)
    iterations = 0
    while True:
        # centering by damped Newton on  s*(t + eps|k|^2) - sum log(t - q)
        for _ in range(50):
            q, gq = q_and_grad(k)
            c = t - q
            inv_c = 1.0 / c
            grad = np.empty(N + 1)
            grad[:N] = 2 * s * regularization * k + gq.T @ inv_c
            grad[N] = s - inv_c.sum()
            H = np.empty((N + 1, N + 1))
            H[:N, :N] = (np.einsum("pn,pm,p->nm", gq, gq, inv_c**2)
                         + np.einsum("pnm,p->nm", BtB, inv_c)
                         + 2 * s * regularization * np.eye(N))
            H[:N, N] = H[N, :N] = -(gq.T @ inv_c**2)
            H[N, N] = np.sum(inv_c**2)
            step = -np.linalg.solve(H, grad)
            decrement = -grad @ step
            iterations += 1
            if iterations > max_iter:
                raise ConvergenceError(
                    f"minimax design did not converge in {max_iter} iterations "
                    f"(best objective {best:.9g})",
                    best=FirFilter(best_k, T), objective=best)
            if decrement / 2 <= 1e-12:
                break

            def phi(kk, tt):
                cc = tt - np.sum((np.einsum("pin,n->pi", Bm, kk) - a) ** 2, axis=1)
                if np.any(cc <= 0):
                    return np.inf
                return s * (tt + regularization * kk @ kk) - np.sum(np.log(cc))

            f0 = phi(k, t)
            alpha = 1.0
            while alpha > 1e-12:
                k_new, t_new = k + alpha * step[:N], t + alpha * step[N]
                if phi(k_new, t_new) <= f0 - 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            k, t = k_new, t_new
            val = objective(k) * scale
            if val < best:
                best, best_k = val, k.copy()
            history.append(best)

        # central point: t - P/s is a lower bound on the scaled squared optimum
        lower = max(lower, math.sqrt(max(t - P / s, 0.0)) * scale)
        if best - lower <= tol:
            break
        s *= 10.0
    return MinimaxResult(FirFilter(best_k, T), best, lower, iterations, history, omega)


def minimax_fir_design(lifted: LiftedSystem, N: int, grid_points: int = 1024,
                       tol: float = 1e-6, max_iter: int = 200) -> FirFilter:
    """FIR filter with ``N`` taps minimizing the grid worst-case error gain."""
    return minimax_fir_solve(lifted, N, grid_points, tol, max_iter).filter
