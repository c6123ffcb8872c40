"""Torus-level scalars derived from the single shape parameter rho.

The rhombic torus with shape rho in (-pi/2, pi/2) has half-periods
omega1 = a - i b, omega2 = a + i b where, with alpha = pi/4 + rho/2,

    a = 2 * int_0^{sqrt(tan a)}   dz / sqrt((cot a + z^2)(tan a - z^2))
    b = 2 * int_0^{i sqrt(cot a)} -i dz / sqrt((cot a + z^2)(tan a - z^2))

Both integrands are singular at the upper endpoint, so the production route
substitutes z = sqrt(tan a) - (sqrt(sqrt(tan a) - i sqrt(cot a)) - Z^2)^2
(the inner root computed as -sqrt(st - i*sc)), which removes every
singularity from the path.  The Z-image of the straight z-path is traced by
continuous branch-following and integrated with composite 5-point panels.
Closed elliptic-integral forms (a = 2 sqrt(tan a) K(-tan^2 a)) serve as an
independent oracle in the tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .quadrature import BOOLE_W

VALIDATED_RHO = math.pi / 3.0


class RhoDomainError(ValueError):
    """rho outside the open interval (-pi/2, pi/2)."""


class BranchTraceError(RuntimeError):
    """Continuous branch tracking of the substitution failed."""


@dataclass(frozen=True)
class TorusParams:
    """All lattice-level scalars for one rhombic torus.

    The period lattice is {2 m omega1 + 2 n omega2}; the fundamental rhombus
    has diagonals 4a (real axis) and 4b (imaginary axis), area = 8ab, and
    k = 2 sqrt(2 a b) rescales the plane to unit area.
    """

    rho: float
    alpha: float
    a: float
    b: float
    omega1: complex
    omega2: complex
    area: float
    k: float
    tau: complex

    @property
    def lattice_corner(self) -> complex:
        """Location of the Green's function source: omega1 + omega2 = 2a."""
        return complex(self.omega1 + self.omega2)


def _st_sc(alpha: float) -> tuple:
    return math.sqrt(math.tan(alpha)), math.sqrt(1.0 / math.tan(alpha))


def trace_substitution(z_samples: np.ndarray, alpha: float, inner_seed: int = -1) -> np.ndarray:
    """Continuously invert the desingularizing substitution along a z-path.

    Returns Z-samples with z(Z) = z_samples, following the sheet selected by
    the sign of the inner square root at the first sample.
    """
    st, sc = _st_sc(alpha)
    u = -np.sqrt(complex(st, -sc))
    inner_p = np.sqrt(st - np.asarray(z_samples, dtype=complex))
    Z = np.empty(len(z_samples), dtype=complex)
    cur_inner = inner_seed * inner_p[0]
    cur = np.sqrt(u - cur_inner)
    Z[0] = cur
    for i in range(1, len(z_samples)):
        ci = inner_p[i]
        if abs(ci - cur_inner) > abs(ci + cur_inner):
            ci = -ci
        cur_inner = ci
        c = np.sqrt(u - ci)
        if abs(c - cur) > abs(c + cur):
            c = -c
        cur = c
        Z[i] = c
    return Z


def _nice_integrand_chain(Z_chain: np.ndarray, alpha: float, panels: int) -> complex:
    """Integrate 8/sqrt((z+i sc)(z+st)(2u-Z^2)) dZ along the polyline Z_chain.

    The square root is continued phase-continuously across the whole chain.
    """
    st, sc = _st_sc(alpha)
    u = -np.sqrt(complex(st, -sc))
    total = 0.0 + 0.0j
    prev_root = None
    for Z0, Z1 in zip(Z_chain, Z_chain[1:]):
        t = np.linspace(0.0, 1.0, 4 * panels + 1)
        Z = Z0 + (Z1 - Z0) * t
        z = st - (u - Z * Z) ** 2
        prod = (z + 1j * sc) * (z + st) * (2 * u - Z * Z)
        root = np.sqrt(prod)
        if not np.all(np.isfinite(root)) or np.any(root == 0):
            raise BranchTraceError("period integrand hit a singularity; wrong sheet")
        sign = np.ones(len(root))
        if prev_root is not None and abs(root[0] - prev_root) > abs(root[0] + prev_root):
            sign[0] = -1.0
        for i in range(1, len(root)):
            if abs(root[i] - sign[i - 1] * root[i - 1]) > abs(root[i] + sign[i - 1] * root[i - 1]):
                sign[i] = -sign[i - 1]
            else:
                sign[i] = sign[i - 1]
        root = root * sign
        prev_root = root[-1]
        f = 8.0 / root
        step = (Z1 - Z0) / panels
        for p in range(panels):
            total += step * np.dot(BOOLE_W, f[4 * p : 4 * p + 5])
    return total


def period_integrals(alpha: float, cells: int = 48, panels: int = 6) -> tuple:
    """Evaluate the two period integrals; returns (a, b) as positive reals.

    cells fixes the number of straight chords used for the traced Z-path and
    panels the 5-point panels per chord, so the quadrature resolution is a
    reproducible function of the mesh profile.
    """
    st, sc = _st_sc(alpha)
    za = np.linspace(0.0, st, cells + 1)
    zb = 1j * np.linspace(0.0, sc, cells + 1)
    fa = _nice_integrand_chain(trace_substitution(za, alpha), alpha, panels)
    fb = _nice_integrand_chain(trace_substitution(zb, alpha), alpha, panels)
    if abs(fa.imag) > 1e-6 * abs(fa) or abs(fb.real) > 1e-6 * abs(fb):
        raise BranchTraceError("period integral came out off-axis; wrong sheet")
    return abs(fa.real), abs(fb.imag)


def torus_from_rho(rho: float, cells: int = 48, panels: int = 6) -> TorusParams:
    """Build TorusParams, evaluating the period integrals by quadrature."""
    if not -math.pi / 2 < rho < math.pi / 2:
        raise RhoDomainError(f"rho must lie in (-pi/2, pi/2), got {rho}")
    if abs(rho) > VALIDATED_RHO + 1e-12:
        warnings.warn(
            "accuracy is validated only for rho in [-pi/3, pi/3]",
            RuntimeWarning,
            stacklevel=2,
        )
    alpha = math.pi / 4 + rho / 2
    a, b = period_integrals(alpha, cells=cells, panels=panels)
    omega1 = a - 1j * b
    omega2 = a + 1j * b
    return TorusParams(
        rho=float(rho),
        alpha=alpha,
        a=a,
        b=b,
        omega1=omega1,
        omega2=omega2,
        area=8.0 * a * b,
        k=2.0 * math.sqrt(2.0 * a * b),
        tau=omega2 / omega1,
    )


def periods_reference(rho: float) -> tuple:
    """Independent oracle for (a, b): complete elliptic integrals."""
    from scipy.special import ellipk

    alpha = math.pi / 4 + rho / 2
    ta = math.tan(alpha)
    ca = 1.0 / ta
    return 2 * math.sqrt(ta) * ellipk(-ta * ta), 2 * math.sqrt(ca) * ellipk(-ca * ca)


def scale_to_unit_area(params: TorusParams, z):
    """Rescale a coordinate so the torus has unit area: z -> z / k."""
    return z / params.k
