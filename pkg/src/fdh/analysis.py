"""Evaluation of fractional delay filters against the sampled-data error system."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from fdh.design import FirFilter
from fdh.errors import InvalidInputError, NumericalError
from fdh.lifting import DelaySpec, LiftedSystem, assemble_ed
from fdh.statespace import ContinuousStateSpace, frequency_response, matrix_exponential

__all__ = [
    "FrequencyGrid",
    "ErrorSystemReport",
    "SimulationResult",
    "TestSignal",
    "hinf_norm",
    "error_gains",
    "pointwise_error_gain",
    "filter_frequency_response",
    "make_test_signal",
    "worst_case_input",
    "simulate",
    "fmt",
    "rounded",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def fmt(x) -> str:
    """Nine significant digits, used for every float written to disk."""
    return f"{float(x):.9g}"


def rounded(obj):
    """Copy of a JSON-ready structure with every float cut to nine significant digits."""
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    return obj


@dataclass(frozen=True)
class FrequencyGrid:
    omegas: np.ndarray

    def __post_init__(self):
        w = np.array(self.omegas, dtype=float).ravel()
        if w.size < 1 or w[0] < 0 or np.any(np.diff(w) <= 0):
            raise InvalidInputError("frequency grid must be non-negative and strictly increasing")
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    @property
    def count(self) -> int:
        return self.omegas.size

    @classmethod
    def uniform(cls, omega_max: float, count: int, omega_min: float = 0.0) -> "FrequencyGrid":
        return cls(np.linspace(omega_min, omega_max, count))


@dataclass
class ErrorSystemReport:
    grid: FrequencyGrid
    gains: np.ndarray
    hinf_norm: float
    peak_frequency: float
    filter: FirFilter
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["omega_rad_s", "gain", "gain_db"])
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(self.gains)
        for w, g, gdb in zip(self.grid.omegas, self.gains, db):
            writer.writerow([fmt(w), fmt(g), fmt(gdb)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "hinf_norm": float(self.hinf_norm),
            "peak_frequency": float(self.peak_frequency),
            "grid_points": int(self.grid.count),
            "filter": self.filter.to_dict(),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(rounded(self.to_dict()), indent=2, sort_keys=True) + "\n"


def error_gains(lifted: LiftedSystem, filter: FirFilter, omegas) -> np.ndarray:
    """Largest singular value of ``E_d(e^{jwT})`` at each frequency in ``omegas``."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    Ed = assemble_ed(lifted, filter)
    if Ed.shape[1] == 0:
        return np.zeros_like(omegas)
    resp = frequency_response(Ed, np.exp(1j * omegas * lifted.delay.T))
    return np.linalg.norm(resp[:, 0, :], axis=1)


def _golden_max(f, lo: float, hi: float, xtol: float):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def hinf_norm(lifted: LiftedSystem, filter: FirFilter, grid_points: int = 4096,
              refine: bool = True, metadata: dict | None = None) -> ErrorSystemReport:
    """Worst-case L2 -> l2 gain of the sampled-data error system for ``filter``.

    The gain of the norm-equivalent discrete system is swept on a uniform
    grid over ``[0, pi/T]``; a golden-section search then refines the
    maximum between the neighbours of the grid argmax (and the refined
    point is merged into the reported grid).
    """
    if grid_points < 64:
        raise InvalidInputError(f"grid_points must be >= 64, got {grid_points}")
    T = lifted.delay.T
    omegas = np.linspace(0.0, math.pi / T, grid_points)
    gains = error_gains(lifted, filter, omegas)
    if not np.all(np.isfinite(gains)):
        raise NumericalError("non-finite error gain on the unit circle")
    i = int(np.argmax(gains))
    if refine:
        lo = omegas[max(i - 1, 0)]
        hi = omegas[min(i + 1, grid_points - 1)]
        w_star, g_star = _golden_max(lambda w: float(error_gains(lifted, filter, w)[0]),
                                     lo, hi, 1e-8)
        if g_star > gains[i] and not np.any(omegas == w_star):
            j = int(np.searchsorted(omegas, w_star))
            omegas = np.insert(omegas, j, w_star)
            gains = np.insert(gains, j, g_star)
            i = j
    meta = {"T": T, "D": lifted.delay.D, "m": lifted.delay.m, "d": lifted.delay.d}
    meta.update(metadata or {})
    return ErrorSystemReport(grid=FrequencyGrid(omegas), gains=gains,
                             hinf_norm=float(gains[i]), peak_frequency=float(omegas[i]),
                             filter=filter, metadata=meta)


def pointwise_error_gain(sys: ContinuousStateSpace, filter: FirFilter, delay: DelaySpec,
                         omega):
    """Steady-state gain ``|W(jw)| |e^{-jwD} - K(e^{jwT})|`` for a single sinusoid.

    Defined for any ``w >= 0``, including beyond the Nyquist frequency
    where K's argument wraps around the unit circle. This is not the
    induced (alias-aggregated) gain bounded by :func:`hinf_norm`.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise InvalidInputError("frequencies must be >= 0")
    wa = np.atleast_1d(w)
    gain = np.abs(sys.transfer(1j * wa)) * np.abs(
        np.exp(-1j * wa * delay.D) - filter.transfer(np.exp(1j * wa * delay.T)))
    return gain if w.ndim else float(gain[0])


def filter_frequency_response(filter: FirFilter, grid: FrequencyGrid) -> np.ndarray:
    """``K(e^{jwT})`` at each grid frequency."""
    return filter.transfer(np.exp(1j * grid.omegas * filter.sample_period))


@dataclass(frozen=True)
class TestSignal:
    """A signal sampled on a uniform fine grid starting at t = 0."""

    __test__ = False  # not a pytest class

    kind: str
    values: np.ndarray
    fine_step: float
    params: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.fine_step

    @property
    def duration(self) -> float:
        return (self.values.size - 1) * self.fine_step


def _piecewise_regular(t: np.ndarray, seed: int) -> np.ndarray:
    # Arcs of random cubic polynomials (16-48 s long) separated by jumps;
    # zero before the first arc at 8 s, peak amplitude normalized to 1.
    rng = np.random.default_rng(seed)
    v = np.zeros_like(t)
    start = 8.0
    end = t[-1] if t.size else 0.0
    while start < end:
        length = float(rng.uniform(16.0, 48.0))
        coeffs = rng.uniform(-1.0, 1.0, size=4)
        level = float(rng.uniform(-1.0, 1.0))
        mask = (t >= start) & (t < start + length)
        u = (t[mask] - start) / length
        v[mask] = level + np.polynomial.polynomial.polyval(u, coeffs)
        start += length
    peak = np.max(np.abs(v)) if v.size else 0.0
    return v / peak if peak > 0 else v


def make_test_signal(kind: str, duration: float, fine_step: float, omega: float = 0.05,
                     seed: int = 42) -> TestSignal:
    """Deterministic test signal on ``t = 0, h, 2h, ... <= duration``.

    kind : ``"zero"``, ``"step"``, ``"ramp"``, ``"sine"`` (``sin(omega t)``)
        or ``"piecewise_regular"`` (seeded polynomial arcs with jumps).
    """
    if not duration > 0:
        raise InvalidInputError(f"signal duration must be > 0, got {duration}")
    if not fine_step > 0:
        raise InvalidInputError(f"fine_step must be > 0, got {fine_step}")
    n = int(round(duration / fine_step)) + 1
    t = np.arange(n) * fine_step
    params = {}
    if kind == "zero":
        v = np.zeros(n)
    elif kind == "step":
        v = np.ones(n)
    elif kind == "ramp":
        v = t.copy()
    elif kind == "sine":
        v = np.sin(omega * t)
        params["omega"] = omega
    elif kind == "piecewise_regular":
        v = _piecewise_regular(t, seed)
        params["seed"] = seed
    else:
        raise InvalidInputError(f"unknown signal kind {kind!r}")
    v.setflags(write=False)
    return TestSignal(kind=kind, values=v, fine_step=fine_step, params=params)


def worst_case_input(lifted: LiftedSystem, filter: FirFilter, omega: float,
                     periods: int, oversample: int) -> TestSignal:
    """Continuous-time input that excites the error system at its gain at ``omega``.

    In every sampling period the input is ``Re(e^{j w T n} phi(tau))`` with
    ``phi`` the adjoint of the lifted input operator applied to the
    conjugated error row at ``z = e^{jwT}``; ``phi`` is evaluated at
    fine-step midpoints so that a zero-order hold reproduces it. The
    signal is zero after ``periods`` sampling periods.
    """
    sys, delay = lifted.source, lifted.delay
    T, d, nu = delay.T, delay.d, sys.order
    h = T / oversample
    z = np.exp(1j * omega * T)
    k = np.asarray(filter.taps, dtype=float)
    kz = np.sum(k * z ** (-np.arange(k.size)))
    row = (lifted.C1 - kz * lifted.C2) @ np.linalg.inv(z * np.eye(lifted.order) - lifted.A_d)
    u = np.conj(row[0, : nu + 1])
    tau = (np.arange(oversample) + 0.5) * h
    phi = np.empty(oversample, dtype=complex)
    for i, ti in enumerate(tau):
        b1 = (sys.B.T @ matrix_exponential(sys.A.T, T - ti))[0]
        val = b1 @ u[:nu]
        if ti < T - d:
            val += (sys.B.T @ matrix_exponential(sys.A.T, T - d - ti) @ sys.C.T)[0, 0] * u[nu]
        phi[i] = val
    phi /= max(np.sqrt(h * np.sum(np.abs(phi) ** 2)), 1e-300)
    w = (np.exp(1j * omega * T * np.arange(periods))[:, None] * phi[None, :]).real.ravel()
    w = np.append(w, 0.0)
    return TestSignal(kind="worst_case", values=w, fine_step=h,
                      params={"omega": float(omega), "periods": periods})


@dataclass
class SimulationResult:
    fine_times: np.ndarray
    v: np.ndarray
    sample_times: np.ndarray
    v_d: np.ndarray
    u_d: np.ndarray
    u_bar: np.ndarray
    e_d: np.ndarray
    l2_error: float
    sample_period: float

    def to_csv(self) -> str:
        """One row per fine-grid instant; sampled columns are NaN between samples."""
        oversample = int(round(self.sample_period / (self.fine_times[1] - self.fine_times[0])))
        buf = io.StringIO()
        buf.write("t,v,u_d,u_bar,e\n")
        n_samples = self.u_d.size
        for i, (t, v) in enumerate(zip(self.fine_times, self.v)):
            n, rem = divmod(i, oversample)
            if rem == 0 and n < n_samples:
                buf.write(f"{fmt(t)},{fmt(v)},{fmt(self.u_d[n])},{fmt(self.u_bar[n])},"
                          f"{fmt(self.e_d[n])}\n")
            else:
                buf.write(f"{fmt(t)},{fmt(v)},nan,nan,nan\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "l2_error": float(self.l2_error),
            "max_abs_error": float(np.max(np.abs(self.e_d))) if self.e_d.size else 0.0,
            "samples": int(self.e_d.size),
        }


def _zoh_response(sys: ContinuousStateSpace, w: np.ndarray, h: float) -> np.ndarray:
    nu = sys.order
    blk = np.zeros((nu + 1, nu + 1))
    blk[:nu, :nu] = sys.A
    blk[:nu, nu:] = sys.B
    E = matrix_exponential(blk, h)
    Phi, Gam = E[:nu, :nu], E[:nu, nu]
    x = np.zeros(nu)
    v = np.empty(w.size)
    for i, wi in enumerate(w):
        v[i] = sys.C[0] @ x
        x = Phi @ x + Gam * wi
    return v


def simulate(sys: ContinuousStateSpace, filter: FirFilter, delay: DelaySpec,
             signal: TestSignal, oversample: int, drive_model: bool = False
             ) -> SimulationResult:
    """Run the fractional delay experiment on a fine time grid.

    By default ``signal`` is the analog signal v itself. With
    ``drive_model=True`` it is the input w, held constant over each fine
    step and passed through W exactly (zero-order-hold discretization).

    ``u_d[n] = v(nT - D)`` is read off the fine grid by linear
    interpolation (v = 0 for t < 0), ``v_d[n] = v(nT)`` feeds the filter,
    and ``e_d = u_d - u_bar``.
    """
    if oversample < 2:
        raise InvalidInputError(f"oversample must be >= 2, got {oversample}")
    T = delay.T
    h = T / oversample
    if not math.isclose(signal.fine_step, h, rel_tol=1e-9):
        raise InvalidInputError(
            f"signal fine step {signal.fine_step} does not match T/oversample = {h}")
    if signal.duration < delay.D:
        raise InvalidInputError(
            f"signal duration {signal.duration} is shorter than the delay D = {delay.D}")
    w = np.asarray(signal.values, dtype=float)
    v = _zoh_response(sys, w, h) if drive_model else w.copy()
    t = signal.times

    n_samples = int(math.floor(signal.duration / T + 1e-9)) + 1
    sample_times = np.arange(n_samples) * T
    v_d = v[np.arange(n_samples) * oversample]
    shifted = sample_times - delay.D
    u_d = np.where(shifted < 0, 0.0, np.interp(shifted, t, v))
    k = np.asarray(filter.taps, dtype=float)
    u_bar = np.convolve(k, v_d)[:n_samples]
    e_d = u_d - u_bar
    return SimulationResult(fine_times=t, v=v, sample_times=sample_times, v_d=v_d,
                            u_d=u_d, u_bar=u_bar, e_d=e_d,
                            l2_error=float(math.sqrt(T * np.sum(e_d**2))),
                            sample_period=T)
