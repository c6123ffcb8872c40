"""Complex path integration with composite degree-4 (5-point closed Newton-Cotes) panels.

Every line integral in this package reduces to sums of panel integrals of an
analytic integrand sampled at 5 equally spaced points per panel.  The rule
integrates polynomials of degree <= 4 exactly (degree 5 in fact, by symmetry),
and cumulative values at interior panel nodes come from partial integrals of
the same interpolating quartic, so a single sampled ladder supports chained
integrands (w, then zeta(w), then integrals of zeta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Closed 5-point Newton-Cotes (Boole) weights for a panel of length L:
#   integral = L/90 * (7 f0 + 32 f1 + 12 f2 + 32 f3 + 7 f4)
BOOLE_W = np.array([7.0, 32.0, 12.0, 32.0, 7.0]) / 90.0


def _cumulative_weights() -> np.ndarray:
    """Partial integrals of the quartic interpolant on nodes t = 0..4.

    Returns P with shape (4, 5) such that integral of the interpolant from
    t=0 to t=m equals sum_k P[m-1, k] * f_k (unit node spacing).
    """
    # Solve for Lagrange cardinal polynomials on 0..4 and integrate.
    V = np.vander(np.arange(5.0), 5, increasing=True)  # V[i, j] = i**j
    coeffs = np.linalg.inv(V)  # column k = monomial coeffs of L_k
    P = np.zeros((4, 5))
    for m in range(1, 5):
        powers = np.array([m ** (j + 1) / (j + 1) for j in range(5)])
        P[m - 1] = powers @ coeffs
    return P


CUM_W = _cumulative_weights()


class QuadratureError(ValueError):
    """A sample of the integrand was not finite (missed singularity)."""


@dataclass(frozen=True)
class Path:
    """Polyline in the complex plane with a fixed panel count per segment."""

    nodes: tuple
    panel_count_per_segment: int = 8

    def __post_init__(self):
        nodes = tuple(complex(z) for z in self.nodes)
        if len(nodes) < 2:
            raise ValueError("path needs at least 2 nodes")
        for u, v in zip(nodes, nodes[1:]):
            if u == v:
                raise ValueError("consecutive path nodes must be distinct")
        if self.panel_count_per_segment < 1:
            raise ValueError("panel_count_per_segment must be positive")
        object.__setattr__(self, "nodes", nodes)

    def reversed(self) -> "Path":
        return Path(tuple(reversed(self.nodes)), self.panel_count_per_segment)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    cumulative: tuple

    def __post_init__(self):
        object.__setattr__(self, "cumulative", tuple(complex(v) for v in self.cumulative))


def panel_nodes(z0: complex, z1: complex, panels: int) -> np.ndarray:
    """All sample points for `panels` 5-point panels on the segment [z0, z1]."""
    n = 4 * panels
    t = np.linspace(0.0, 1.0, n + 1)
    return z0 + (z1 - z0) * t


def integrate_sampled(fvals: np.ndarray, z0: complex, z1: complex, panels: int) -> complex:
    """Panel-sum a sampled integrand (samples from panel_nodes) over one segment."""
    step = (z1 - z0) / panels
    total = 0.0 + 0.0j
    for p in range(panels):
        seg = fvals[4 * p : 4 * p + 5]
        total += step * np.dot(BOOLE_W, seg)
    return total


def integrate_path(f, path: Path) -> QuadratureResult:
    """Integrate f along the path, one composite 5-point rule per segment.

    Returns the total integral plus cumulative values at every path node.
    Raises QuadratureError naming the sample point if f returns a non-finite
    value anywhere (the caller has a singularity on the path).
    """
    cumulative = [0.0 + 0.0j]
    total = 0.0 + 0.0j
    for z0, z1 in zip(path.nodes, path.nodes[1:]):
        zs = panel_nodes(z0, z1, path.panel_count_per_segment)
        fv = np.array([complex(f(z)) for z in zs])
        bad = ~np.isfinite(fv)
        if bad.any():
            where = zs[np.argmax(bad)]
            raise QuadratureError(f"non-finite integrand sample at z={where}")
        total += integrate_sampled(fv, z0, z1, path.panel_count_per_segment)
        cumulative.append(total)
    return QuadratureResult(value=total, cumulative=tuple(cumulative))


def integrate_segment_sequence(f, paths) -> list:
    """Batch wrapper over integrate_path; value order matches input order."""
    out = []
    for i, p in enumerate(paths):
        try:
            out.append(integrate_path(f, p))
        except QuadratureError as exc:
            raise QuadratureError(f"path {i}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Array-level machinery used by the mesh pipeline.
#
# A "ladder" is a 1-D sequence of cells; each cell is diced into `panels`
# 5-point panels, all sharing a common parametrization.  cumulative_boole
# produces the antiderivative at *every* ladder sample so chained integrands
# (zeta needs w, the Green integrand needs zeta) stay on one node set.
# ---------------------------------------------------------------------------


def ladder_params(cell_edges: np.ndarray, panels: int) -> np.ndarray:
    """Sample parameters: each cell [e_i, e_{i+1}] gets 4*panels+1 uniform nodes.

    Shared endpoints are not duplicated.  Returns the flat parameter array.
    """
    edges = np.asarray(cell_edges)
    sub = np.linspace(0.0, 1.0, 4 * panels + 1)[:-1]
    pts = (edges[:-1, None] + np.diff(edges)[:, None] * sub[None, :]).ravel()
    return np.append(pts, edges[-1])


def cumulative_boole(fvals: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Cumulative integral of f over a ladder at every sample point.

    fvals/params are flat ladders whose length is 4*m+1.  Within each 4-node
    group the interpolating quartic supplies the partial integrals, so the
    result is exact for polynomials of degree <= 4 on uniform groups.
    """
    n = len(params)
    if (n - 1) % 4:
        raise ValueError("ladder length must be 4*m+1")
    m = (n - 1) // 4
    f = fvals.reshape(-1)[: 4 * m + 1]
    out = np.zeros(n, dtype=complex)
    fg = np.lib.stride_tricks.sliding_window_view(f, 5)[::4]  # (m, 5)
    hg = (params[4::4] - params[:-4:4]) / 4.0  # group step
    # partials[g, m-1] = integral over group g from its node 0 to its node m
    partials = np.einsum("ms,gs->gm", CUM_W, fg) * hg[:, None]
    group_tot = partials[:, 3]
    base = np.concatenate(([0.0 + 0.0j], np.cumsum(group_tot)))
    out[0::4] = base
    for m_idx in range(1, 4):
        out[m_idx::4] = base[:-1] + partials[:, m_idx - 1]
    return out


def cumulative_trapezoid(fvals: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid rule on the given samples (mesh-node resolution)."""
    df = 0.5 * (fvals[1:] + fvals[:-1]) * np.diff(params)
    return np.concatenate(([0.0 + 0.0j], np.cumsum(df)))
