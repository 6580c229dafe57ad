"""Reference conformal maps and the local angle-sum expansion of ``log|f'|``.

Every map carries ``g = log f'`` and its first four derivatives in closed form.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import OutsideDomain, UnknownMap
from .geometry import theta

__all__ = [
    "ConformalMap",
    "builtin_maps",
    "get_map",
    "schwarzian",
    "lattice_shape_factor",
    "predicted_constant",
    "star_directions",
    "angle_sum_defect",
]


@dataclass(frozen=True)
class ConformalMap:
    name: str
    f: Callable
    fprime: Callable
    log_fprime: Callable  # a branch of log f'; its imaginary part is arg f'
    g_derivs: Callable  # z -> (g', g'', g''', g'''') with g = log f'
    domain_check: Callable
    params: tuple = ()

    def check(self, z):
        zs = np.atleast_1d(np.asarray(z, dtype=complex))
        if not all(self.domain_check(complex(w)) for w in zs):
            raise OutsideDomain(f"{self.name}: point outside the domain")

    def log_abs_fprime(self, z):
        return np.log(np.abs(self.fprime(np.asarray(z, dtype=complex))))

    def arg_fprime(self, z):
        return float(np.imag(self.log_fprime(complex(z))))


def _affine(c=1.0, d=0.0):
    c, d = complex(c), complex(d)
    if c == 0:
        raise ValueError("affine map needs c != 0")
    logc = cmath.log(c)
    return ConformalMap(
        name="affine",
        f=lambda z: c * np.asarray(z) + d,
        fprime=lambda z: np.full(np.shape(z), c, dtype=complex) if np.ndim(z) else c,
        log_fprime=lambda z: np.full(np.shape(z), logc, dtype=complex) if np.ndim(z) else logc,
        g_derivs=lambda z: (0j, 0j, 0j, 0j),
        domain_check=lambda z: True,
        params=(("c", c), ("d", d)),
    )


def _identity():
    m = _affine(1.0, 0.0)
    return ConformalMap("identity", m.f, m.fprime, m.log_fprime, m.g_derivs, m.domain_check)


def _exp():
    return ConformalMap(
        name="exp",
        f=np.exp,
        fprime=np.exp,
        log_fprime=lambda z: np.asarray(z, dtype=complex) if np.ndim(z) else complex(z),
        g_derivs=lambda z: (1 + 0j, 0j, 0j, 0j),
        domain_check=lambda z: True,
    )


def _power_rational(name, f, fprime, lin_a, lin_b, k, log_const, domain_check, params=()):
    """Maps with ``g = log_const + k * log(lin_a*z + lin_b)``."""

    def log_fprime(z):
        z = np.asarray(z, dtype=complex)
        return log_const + k * np.log(lin_a * z + lin_b)

    def g_derivs(z):
        w = lin_a / (lin_a * complex(z) + lin_b)
        return (k * w, -k * w**2, 2 * k * w**3, -6 * k * w**4)

    return ConformalMap(name, f, fprime, log_fprime, g_derivs, domain_check, params)


def _square(min_radius=1e-3):
    return _power_rational(
        "square",
        f=lambda z: np.asarray(z) ** 2,
        fprime=lambda z: 2 * np.asarray(z),
        lin_a=1.0,
        lin_b=0.0,
        k=1.0,
        log_const=math.log(2.0),
        domain_check=lambda z: abs(z) > min_radius,
        params=(("min_radius", min_radius),),
    )


def _cubic_perturbation(mu=0.1):
    mu = complex(mu)
    return _power_rational(
        "cubic_perturbation",
        f=lambda z: np.asarray(z) + mu * np.asarray(z) ** 2,
        fprime=lambda z: 1 + 2 * mu * np.asarray(z),
        lin_a=2 * mu,
        lin_b=1.0,
        k=1.0,
        log_const=0.0,
        domain_check=lambda z: abs(1 + 2 * mu * z) > 1e-6,
        params=(("mu", mu),),
    )


def _moebius(a=1.0, b=0.0, c=0.0, d=1.0):
    a, b, c, d = (complex(v) for v in (a, b, c, d))
    det = a * d - b * c
    if det == 0:
        raise ValueError("moebius map needs ad - bc != 0")
    return _power_rational(
        "moebius",
        f=lambda z: (a * np.asarray(z) + b) / (c * np.asarray(z) + d),
        fprime=lambda z: det / (c * np.asarray(z) + d) ** 2,
        lin_a=c,
        lin_b=d,
        k=-2.0,
        log_const=cmath.log(det),
        domain_check=lambda z: abs(c * z + d) > 1e-9,
        params=(("a", a), ("b", b), ("c", c), ("d", d)),
    )


_REGISTRY = {
    "identity": _identity,
    "affine": _affine,
    "exp": _exp,
    "square": _square,
    "cubic_perturbation": _cubic_perturbation,
    "moebius": _moebius,
}


def builtin_maps():
    """Name -> factory for the reference maps (factories accept keyword parameters)."""
    return dict(_REGISTRY)


def get_map(name, **params):
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownMap(f"unknown map {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


def schwarzian(cmap, z):
    """``(f''/f')' - (f''/f')^2 / 2``."""
    cmap.check(z)
    g1, g2, _, _ = cmap.g_derivs(complex(z))
    return g2 - 0.5 * g1 * g1


def lattice_shape_factor(alpha, beta, gamma):
    """Weight of ``g'**2 g''/2 - g''''/3`` in the defect constant of a general lattice.

    ``sum_e cos(phi_e) sin(phi_e)**3 exp(4i dir_e) / (sin a sin b sin c)`` over
    the edge directions ``dir_e`` = 0, alpha, alpha+beta with opposite angles
    ``phi_e`` = beta, gamma, alpha.  Vanishes on the equilateral lattice.
    """
    total = (
        math.cos(beta) * math.sin(beta) ** 3
        + math.cos(gamma) * math.sin(gamma) ** 3 * cmath.exp(4j * alpha)
        + math.cos(alpha) * math.sin(alpha) ** 3 * cmath.exp(4j * (alpha + beta))
    )
    return total / (math.sin(alpha) * math.sin(beta) * math.sin(gamma))


def predicted_constant(cmap, v0, spec):
    """Leading ``eps**4`` coefficient of the angle-sum defect of ``log|f'|`` at ``v0``."""
    cmap.check(v0)
    g1, g2, _, g4 = cmap.g_derivs(complex(v0))
    s = g2 - 0.5 * g1 * g1
    a, b, c = spec.angles
    core = s * g2.conjugate()
    equilateral = all(abs(x - math.pi / 3) < 1e-12 for x in spec.angles)
    if equilateral:
        return -(3 * math.sqrt(3) / 32) * core.real
    shape = lattice_shape_factor(a, b, c)
    extra = shape * (0.5 * g1 * g1 * g2 - g4 / 3)
    return -(math.sin(a) * math.sin(b) * math.sin(c) / 4) * (core + extra).real


def star_directions(spec):
    """Offsets of the six neighbours of a vertex at scale 1, counterclockwise."""
    a, b, c = spec.angles
    base = (
        math.sin(b),
        math.sin(c) * cmath.exp(1j * a),
        math.sin(a) * cmath.exp(1j * (a + b)),
    )
    return np.array(base + tuple(-x for x in base), dtype=complex)


def angle_sum_defect(cmap, v0, spec, epsilon):
    """Angle sum at ``v0`` minus ``2*pi`` for scale factors ``log|f'|`` on the lattice star.

    ``epsilon`` may be negative (reflected star).  Works for obtuse lattices.
    """
    v0 = complex(v0)
    nbrs = v0 + epsilon * star_directions(spec)
    cmap.check(np.concatenate([[v0], nbrs]))
    u0 = float(cmap.log_abs_fprime(v0))
    un = cmap.log_abs_fprime(nbrs)
    d = nbrs - v0
    nxt = np.roll(np.arange(6), -1)
    opp = np.abs(d[nxt] - d)
    # angle at v0 in triangle (v0, n_j, n_{j+1})
    x = 2 * np.log(opp / np.abs(d)) + un[nxt] - u0
    y = 2 * np.log(opp / np.abs(d[nxt])) + un - u0
    return float(np.sum(theta(x, y)) - 2 * math.pi)
