"""Benchmark ODE systems with exact matrix-free Jacobian-vector products.

All problems are autonomous: the ``t`` argument of ``rhs``/``jvp`` is
accepted and ignored.
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InstabilityError


@dataclass(frozen=True)
class OdeProblem:
    name: str
    dim: int
    rhs: Callable
    jvp: Callable
    tspan: tuple
    y0: np.ndarray = field(repr=False)
    params: dict = field(default_factory=dict)

    def initial_state(self):
        return np.array(self.y0, dtype=float, copy=True)


def lorenz96(N=40, F=8.0, tspan=(0.0, 0.3), spinup=10.0):
    """Lorenz-96 with periodic indices.

    The seed state is ``y = F`` with ``y_20 += 0.01``.  That point sits next
    to the equilibrium ``y = F``, where short-horizon errors are at round-off
    level, so by default it is advanced ``spinup`` time units with classical
    RK4 (step 0.01) onto the attractor.  ``spinup=0`` keeps the seed state.
    """
    if N < 4:
        raise ValueError("Lorenz-96 needs N >= 4")
    if spinup < 0:
        raise ValueError("spinup must be non-negative")

    def rhs(t, y):
        return -np.roll(y, 1) * (np.roll(y, 2) - np.roll(y, -1)) - y + F

    def jvp(t, y, v):
        ym1 = np.roll(y, 1)
        return (-np.roll(v, 1) * (np.roll(y, 2) - np.roll(y, -1))
                - ym1 * (np.roll(v, 2) - np.roll(v, -1)) - v)

    y0 = np.full(N, float(F))
    y0[min(19, N - 1)] += 0.01
    dt = 0.01
    for _ in range(int(round(spinup / dt))):
        a = rhs(0, y0)
        b = rhs(0, y0 + dt / 2 * a)
        c = rhs(0, y0 + dt / 2 * b)
        d = rhs(0, y0 + dt * c)
        y0 = y0 + dt / 6 * (a + 2 * b + 2 * c + d)
    return OdeProblem("lorenz96", N, rhs, jvp, tuple(tspan), y0,
                      {"N": N, "F": F, "spinup": spinup})


def shallow_water(nx=32, ny=32, g=9.81, tspan=(0.0, 0.1)):
    """2-D shallow water on the periodic unit square, state ``[u, v, h]``.

    Fluxes are taken in conservative form and differenced with second-order
    centred stencils; the primitive tendencies follow from
    ``u_t = ((uh)_t - u h_t) / h``.  The height starts as a Gaussian bump
    ``1 + 0.5 exp(-100 r^2)`` at rest.
    """
    if nx < 8 or ny < 8:
        raise ValueError("shallow water grid needs at least 8 points per direction")
    dx, dy = 1.0 / nx, 1.0 / ny
    n = nx * ny

    def Dx(a):
        return (np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)) / (2 * dx)

    def Dy(a):
        return (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) / (2 * dy)

    def split(y):
        return (y[:n].reshape(nx, ny), y[n:2 * n].reshape(nx, ny), y[2 * n:].reshape(nx, ny))

    def tendencies(y):
        u, v, h = split(y)
        if not np.all(np.isfinite(y)) or np.min(h) <= 0.0:
            raise InstabilityError("shallow water state has non-positive or non-finite height")
        q1, q2 = u * h, v * h
        ht = -(Dx(q1) + Dy(q2))
        q1t = -(Dx(u * q1 + 0.5 * g * h * h) + Dy(v * q1))
        q2t = -(Dx(u * q2) + Dy(v * q2 + 0.5 * g * h * h))
        return u, v, h, q1, q2, ht, q1t, q2t

    def rhs(t, y):
        u, v, h, _, _, ht, q1t, q2t = tendencies(y)
        return np.concatenate([((q1t - u * ht) / h).ravel(),
                               ((q2t - v * ht) / h).ravel(), ht.ravel()])

    def jvp(t, y, w):
        u, v, h, q1, q2, ht, q1t, q2t = tendencies(y)
        du, dv, dh = split(w)
        ut = (q1t - u * ht) / h
        vt = (q2t - v * ht) / h
        dq1 = du * h + u * dh
        dq2 = dv * h + v * dh
        dht = -(Dx(dq1) + Dy(dq2))
        dq1t = -(Dx(du * q1 + u * dq1 + g * h * dh) + Dy(dv * q1 + v * dq1))
        dq2t = -(Dx(du * q2 + u * dq2) + Dy(dv * q2 + v * dq2 + g * h * dh))
        dut = (dq1t - du * ht - u * dht - ut * dh) / h
        dvt = (dq2t - dv * ht - v * dht - vt * dh) / h
        return np.concatenate([dut.ravel(), dvt.ravel(), dht.ravel()])

    x = (np.arange(nx) + 0.5) * dx
    yy = (np.arange(ny) + 0.5) * dy
    X, Y = np.meshgrid(x, yy, indexing="ij")
    h0 = 1.0 + 0.5 * np.exp(-100.0 * ((X - 0.5) ** 2 + (Y - 0.5) ** 2))
    y0 = np.concatenate([np.zeros(n), np.zeros(n), h0.ravel()])
    return OdeProblem(f"shallow_water_{nx}x{ny}", 3 * n, rhs, jvp, tuple(tspan), y0,
                      {"nx": nx, "ny": ny, "g": g})


def allen_cahn(n=50, alpha=0.1, gamma=1.0, tspan=(0.0, 0.2)):
    """Allen-Cahn on the unit square, cell-centred grid, homogeneous Neumann walls."""
    if n < 8:
        raise ValueError("Allen-Cahn grid needs n >= 8")
    dx = 1.0 / n

    def lap(u):
        p = np.pad(u.reshape(n, n), 1, mode="edge")
        c = p[1:-1, 1:-1]
        return ((p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4 * c) / dx ** 2).ravel()

    def rhs(t, u):
        return alpha * lap(u) + gamma * (u - u ** 3)

    def jvp(t, u, v):
        return alpha * lap(v) + gamma * (1.0 - 3.0 * u ** 2) * v

    x = (np.arange(n) + 0.5) * dx
    X, Y = np.meshgrid(x, x, indexing="ij")
    u0 = 0.4 + 0.1 * (X + Y) + 0.1 * np.sin(10 * X) * np.sin(20 * Y)
    return OdeProblem(f"allen_cahn_{n}x{n}", n * n, rhs, jvp, tuple(tspan), u0.ravel(),
                      {"n": n, "alpha": alpha, "gamma": gamma})


def linear_problem(J, y0, tspan=(0.0, 1.0)):
    """``y' = J y`` for a dense matrix; used by exactness checks."""
    J = np.asarray(J, dtype=float)
    return OdeProblem("linear", J.shape[0], lambda t, y: J @ y, lambda t, y, v: J @ v,
                      tuple(tspan), np.asarray(y0, dtype=float))


PROBLEMS = {
    "lorenz96": lorenz96,
    "shallow_water": shallow_water,
    "allen_cahn": allen_cahn,
}


def make_problem(name, **params):
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**params)
