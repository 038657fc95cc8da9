"""Shared oracles and generators for the test suite."""

import numpy as np
import scipy.linalg


def random_stable(rng, nu, margin=(0.1, 2.0)):
    """Random SISO realization with spectral abscissa in -margin."""
    A = rng.normal(size=(nu, nu))
    shift = np.max(np.linalg.eigvals(A).real) + rng.uniform(*margin)
    A = A - shift * np.eye(nu)
    return A, rng.normal(size=(nu, 1)), rng.normal(size=(1, nu))


def gauss_legendre(f, a, b, nodes=48):
    """Integrate a matrix-valued f over [a, b]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    return half * sum(wi * f(a + half * (xi + 1.0)) for xi, wi in zip(x, w))


def bbstar_by_quadrature(A, B, C, T, d, nodes=48):
    """Blocks of the lifted input operator composed with its adjoint.

    Integrates the defining kernels directly with scipy's expm; the
    indicator of [0, T - d) in the second adjoint component truncates
    the cross and lower blocks to [0, T - d].
    """
    E = scipy.linalg.expm
    b1 = lambda th: E(A * (T - th)) @ B  # noqa: E731
    b2 = lambda th: C @ E(A * (T - d - th)) @ B  # noqa: E731
    top = gauss_legendre(lambda th: b1(th) @ b1(th).T, 0.0, T, nodes)
    cross = gauss_legendre(lambda th: b1(th) @ b2(th).T, 0.0, T - d, nodes) if d < T else 0
    low = gauss_legendre(lambda th: b2(th) @ b2(th).T, 0.0, T - d, nodes)
    return np.block([[top, cross], [np.atleast_2d(cross).T, low]])


def fit_sinusoid_amplitude(x, omega, T):
    """Least-squares amplitude of x[n] ~ a cos(w n T) + b sin(w n T)."""
    n = np.arange(x.size)
    M = np.column_stack([np.cos(omega * n * T), np.sin(omega * n * T)])
    coef = np.linalg.lstsq(M, x, rcond=None)[0]
    return float(np.hypot(*coef))


def lifted_recursion_error(sys, T, D, steps, rng, pieces=8):
    """Max deviation between the lifted state recursion and an ODE solve.

    The input w is piecewise constant on ``pieces`` equal sub-intervals
    of each period. The ODE ``x' = A x + B w`` is integrated piece by
    piece with a high-order Runge-Kutta method. The lifted side applies
    the input operator by Gauss-Legendre quadrature of its kernels and
    iterates ``xi[n+1] = A_d xi[n] + [B1 w; B2 w; 0]``. Compares
    ``x1[n] = x(nT)``, ``x2[n] = v(nT - d)`` and ``u_d[n] = v(nT - D)``.
    """
    from scipy.integrate import solve_ivp

    from fdh import lift_error_system, split_delay

    delay = split_delay(T, D)
    d, m = delay.d, delay.m
    lifted = lift_error_system(sys, delay)
    A, B, C = sys.A, sys.B, sys.C
    nu = sys.order
    E = scipy.linalg.expm
    w = rng.normal(size=(steps, pieces))
    edges = np.linspace(0.0, T, pieces + 1)

    # lifted recursion
    xi = np.zeros(lifted.order)
    lifted_x1, lifted_x2, lifted_ud = [xi[:nu].copy()], [xi[nu]], [(lifted.C1 @ xi)[0]]
    for n in range(steps):
        b1 = np.zeros((nu, 1))
        b2 = 0.0
        for k in range(pieces):
            a, b = edges[k], edges[k + 1]
            b1 += w[n, k] * gauss_legendre(lambda tau: E(A * (T - tau)) @ B, a, b, 12)
            hi = min(b, T - d)
            if hi > a:
                b2 += w[n, k] * gauss_legendre(lambda tau: C @ E(A * (T - d - tau)) @ B,
                                               a, hi, 12)[0, 0]
        inp = np.zeros(lifted.order)
        inp[:nu] = b1[:, 0]
        inp[nu] = b2
        xi = lifted.A_d @ xi + inp
        lifted_x1.append(xi[:nu].copy())
        lifted_x2.append(xi[nu])
        lifted_ud.append((lifted.C1 @ xi)[0])

    # reference ODE solve; record x(nT) and v(nT + T - d)
    def rhs(t, x, wk):
        return A @ x + B[:, 0] * wk

    x = np.zeros(nu)
    ode_x1, ode_v_shift = [x.copy()], []
    for n in range(steps):
        for k in range(pieces):
            a, b = edges[k], edges[k + 1]
            stops = [b]
            if a + 1e-12 * T < T - d < b - 1e-12 * T:
                stops = [T - d, b]
            for stop in stops:
                sol = solve_ivp(rhs, (a, stop), x, method="DOP853", args=(w[n, k],),
                                rtol=1e-12, atol=1e-14)
                x = sol.y[:, -1]
                a = stop
                if abs(stop - (T - d)) <= 1e-12 * T:
                    ode_v_shift.append((C @ x)[0])
        ode_x1.append(x.copy())
    if len(ode_v_shift) < steps:  # T - d fell on an interior edge without a split
        raise AssertionError("reference solve missed the sampling instant T - d")

    err = max(np.max(np.abs(np.array(lifted_x1) - np.array(ode_x1))),
              np.max(np.abs(np.array(lifted_x2[1:]) - np.array(ode_v_shift[:steps]))))
    # u_d[n] = v(nT - D) = x2[n - m]
    ud = np.array(lifted_ud)
    err = max(err, np.max(np.abs(ud[m + 1:] - np.array(lifted_x2[1:steps + 1 - m]))))
    return float(err)
