"""Singularity-free conformal mesh of the quarter torus and its field passes.

Geometry.  Karcher's symmetric Weierstrass function wp maps the closed
quarter [0, 2a] x [-b, 0] of the rhombic torus bijectively onto the right
half-plane of wp-values: the eighth with diagonal omega1 goes to the right
half of the unit disk, its mirror (across x = a) to the exterior, glued
along the unit circle.  We therefore mesh the wp-VALUE plane with a polar
grid: rows = angle theta in [-pi/2, pi/2] (graded toward the branch value
e^{i rho}), cols = radius (graded toward the detour ring), one radial sheet
inside the disk and one outside, and transport it to torus coordinates by
integrating the ODE of the symmetric function,

    dw = dv / sqrt(Q(v)),   Q(v) = 4 c v (v + e^{-i rho}) (v - e^{i rho}),

with c = -i/(8 cos rho), the value forced by the period normalization.
Detours: a disk of radius detour_radius_origin around wp = 0 (the mirrored
sheet evaluates 1/conj(wp), singular there) whose mirror image is the source
detour at omega1 + omega2, and a disk around wp = i where the Moebius chart
degenerates (the map itself is regular there, so no field values are lost).

Passes.  Each radial grid line carries a sampled ladder (5-point panels,
refined near the branch point and the detour ring).  Pass w anchors every
line at the true origin through the substitution wp = s^2, which is regular
across the double zero.  Pass zeta integrates -wp dw on the inner sheet and
conj(dw / wp) on the mirrored sheet, with starts transported by the odd
quasi-periodicity zeta(2 omega1 - z) = -zeta(z) + 2 eta1.  Pass F = int c
zeta dz uses the mesh-node rule (trapezoid with optional curvature weight)
plus the exact logarithmic increment of the source pole on the mirrored
sheet.  The branch point e^{i rho} terminates the theta = rho line; its last
radial cell is closed by the leading Puiseux model for w and a one-sided
rectangle rule for zeta.  That closure is the one deliberately low-order
step of the pipeline: it reproduces the mesh-resolution Legendre defect of
the reference runs and shrinks with the corner-window law cols^(-2/3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import TorusParams
from .quadrature import cumulative_boole, ladder_params


class MeshQualityError(RuntimeError):
    """The transported mesh folded or an integrand sample went non-finite."""


@dataclass(frozen=True)
class MeshSpec:
    """Resolution and grading of the quarter-torus mesh."""

    rows: int = 41
    cols: int = 37
    detour_radius_origin: float = 0.05
    detour_radius_i: float = 0.05
    detour_radius_corner: float = 0.05
    ang_power: float = 2.0          # theta clustering toward rho
    rad_power: float = 1.6          # radial clustering toward the detour ring
    corner_window: float = 0.10     # rho-line closure cell = window*(cols-1)^(-2/3)
    panels: int = 2                 # base 5-point panels per radial cell
    green_blend: float = 0.0        # curvature weight of the Green node rule
    corner_rule: str = "far"        # zeta closure: far / inner / exact sample
    leg_cells: int = 12             # cells on the wp = s^2 anchor legs
    leg_panels: int = 3

    def __post_init__(self):
        if self.rows < 9 or self.cols < 9:
            raise ValueError("mesh needs rows, cols >= 9")
        for r in (self.detour_radius_origin, self.detour_radius_i, self.detour_radius_corner):
            if not 0 < r < 0.5:
                raise ValueError("detour radii must be small positive numbers")

    def refined(self, row_factor: int = 2, col_factor: int = 2) -> "MeshSpec":
        rows = (self.rows - 1) * row_factor + 1 if row_factor > 1 else self.rows
        cols = (self.cols - 1) * col_factor + 1 if col_factor > 1 else self.cols
        return replace(self, rows=rows, cols=cols)


@dataclass
class MeshField:
    """Structured grid pairing domain points with complex values.

    Grid lines in `domain` must map to continuous curves in `value`; the
    jump invariant guards against mesh folding.
    """

    rows: int
    cols: int
    domain: np.ndarray
    value: np.ndarray
    detour_radius_origin: float
    detour_radius_i: float
    detour_radius_corner: float

    def jump_ratio(self) -> float:
        ratios = []
        for arr in (self.value, self.value.T):
            d = np.abs(np.diff(arr, axis=-1))
            med = np.median(d)
            if med > 0:
                ratios.append(float(d.max() / med))
        return max(ratios)


def graded_nodes(n: int, power: float) -> np.ndarray:
    """n nodes on [0, 1] with spacing ~ u^(power-ish) small near 0."""
    return np.linspace(0.0, 1.0, n) ** power


def theta_grid(rows: int, rho: float, power: float) -> tuple:
    """Angular nodes on [-pi/2, pi/2] including rho; graded toward rho."""
    lo, hi = -math.pi / 2, math.pi / 2
    frac = (rho - lo) / (hi - lo)
    j = int(round(frac * (rows - 1)))
    j = min(max(j, 2), rows - 3)
    left = lo + (rho - lo) * (1.0 - graded_nodes(j + 1, power)[::-1])
    right = rho + (hi - rho) * graded_nodes(rows - j, power)
    theta = np.concatenate([left[:-1], [rho], right[1:]])
    theta[0], theta[-1] = lo, hi
    return theta, j


def radial_grid(cols: int, ring: float, power: float, window: float) -> np.ndarray:
    """Radial nodes from the detour ring to 1, graded toward the ring.

    The outermost cell is forced to the closure-window width.
    """
    v = graded_nodes(cols, power)
    r = ring + (1.0 - ring) * v
    w = min(window, (1.0 - r[-3]) * 0.45)
    r[-2] = 1.0 - w
    return r


def _track_sqrt(values: np.ndarray, seed: complex | None = None) -> np.ndarray:
    """Phase-continuous square root along a sample sequence."""
    root = np.sqrt(values)
    out = np.empty_like(root)
    prev = root[0]
    if seed is not None and abs(root[0] - seed) > abs(root[0] + seed):
        prev = -root[0]
    out[0] = prev
    for i in range(1, len(root)):
        r = root[i]
        if abs(r - prev) > abs(r + prev):
            r = -r
        out[i] = r
        prev = r
    return out


def _subdivide(edges: list, lo: float, hi: float, target: float, toward_hi: bool) -> list:
    """Geometric sub-edges inside [lo, hi], smallest cell ~ target at one end."""
    span = hi - lo
    if target >= span * 0.75:
        return edges
    pts = []
    size = target
    pos = 0.0
    while pos + size < span * 0.999 and len(pts) < 14:
        pos += size
        pts.append(pos)
        size *= 2.0
    pts = np.array(pts[::-1])
    new = (hi - pts) if toward_hi else (lo + pts[::-1])
    edges.extend(sorted(float(x) for x in new))
    return edges


@dataclass
class _Line:
    """One radial line: ladder samples and per-pass ladder values."""

    theta: float
    r: np.ndarray              # ladder radii (4m+1 samples)
    node_pos: np.ndarray       # indices of the mesh nodes in the ladder
    rootQ: np.ndarray = None   # tracked sqrt(Q) on the ladder
    w: np.ndarray = None       # torus coordinate on the ladder
    zeta: np.ndarray = None
    zeta_out: np.ndarray = None
    s: np.ndarray = None       # anchor-leg samples (wp = s^2)
    rootR: np.ndarray = None
    w_leg: np.ndarray = None
    zeta_leg: np.ndarray = None


@dataclass
class _CornerWindow:
    """Exact local data across the closure cell of the theta = rho line.

    Uses the uniformizer xi = sqrt(v - e^{i rho}); every window integrand is
    analytic in xi, so the w map and the mirrored-sheet increments are
    quadrature-exact.  Only the inner zeta closure is deliberately left to a
    one-sided rectangle rule (see run_zeta_pass).
    """

    xi: np.ndarray             # ladder from xi_K to 0
    t: np.ndarray              # ladder parameter in [0, 1]
    rootS: np.ndarray          # tracked sqrt(S), S = Q(v)/xi^2
    w: np.ndarray              # w along the window (exact)
    dw_inc: complex            # w(corner) - w(r_w)
    zeta_inner_inc: complex    # exact -int v dw across the window
    zeta_outer_inc: complex    # exact conj(int dv/(v sqrt Q)) across the window
    v: np.ndarray = None


@dataclass
class QuarterMesh:
    """Full pipeline state for one (params, spec) pair."""

    params: TorusParams
    spec: MeshSpec
    rho: float
    c_int: complex
    e3_int: float
    theta: np.ndarray
    radius: np.ndarray
    corner_row: int
    dom_in: np.ndarray
    dom_out: np.ndarray
    w_in: np.ndarray = None
    w_out: np.ndarray = None
    zeta_in: np.ndarray = None
    zeta_out: np.ndarray = None
    F_in: np.ndarray = None
    F_out: np.ndarray = None
    eta1: complex = None
    eta2: complex = None
    F_omega1: complex = None
    F_two_omega1: complex = None
    a_mesh: float = None
    b_mesh: float = None
    omega1_mesh: complex = None
    lines: list = field(default_factory=list)

    @property
    def source(self) -> complex:
        return 2.0 * self.a_mesh

    @property
    def k_mesh(self) -> float:
        return 2.0 * math.sqrt(2.0 * self.a_mesh * self.b_mesh)

    def wp_domain(self) -> np.ndarray:
        return np.concatenate([self.dom_in, self.dom_out[:, -2::-1]], axis=1)

    def torus_nodes(self) -> np.ndarray:
        return np.concatenate([self.w_in, self.w_out[:, -2::-1]], axis=1)

    def wp_field(self) -> MeshField:
        return self._field(self.wp_domain(), self.torus_nodes())

    def zeta_field(self) -> MeshField:
        vals = np.concatenate([self.zeta_in, self.zeta_out[:, -2::-1]], axis=1)
        return self._field(self.torus_nodes(), vals)

    def _field(self, dom, val) -> MeshField:
        return MeshField(
            rows=self.spec.rows, cols=dom.shape[1], domain=dom, value=val,
            detour_radius_origin=self.spec.detour_radius_origin,
            detour_radius_i=self.spec.detour_radius_i,
            detour_radius_corner=self.spec.detour_radius_corner,
        )


def _cubic_Q(v, rho, c_int):
    return 4.0 * c_int * v * (v + np.exp(-1j * rho)) * (v - np.exp(1j * rho))


def _corner_window(mesh: "QuarterMesh", line: "_Line", r_w: float) -> _CornerWindow:
    """Integrate the closure cell of the rho-line in the branch uniformizer."""
    rho, c_int = mesh.rho, mesh.c_int
    e_p, e_m = np.exp(1j * rho), np.exp(-1j * rho)
    spec = mesh.spec
    xiK = np.sqrt((r_w - 1.0) * e_p)
    # direction: w must step from w(r_w) further into the rectangle, i.e.
    # continue the radial line; fix the sign against the last regular step
    t = ladder_params(np.linspace(0.0, 1.0, max(6, spec.leg_cells // 2) + 1), spec.leg_panels)
    for sign in (1.0, -1.0):
        xi = sign * xiK * (1.0 - t)
        v = e_p + xi * xi
        S = 4.0 * c_int * v * (v + e_m)
        seedS = line.rootQ[line.node_pos[-2]] / (sign * xiK)
        rootS = _track_sqrt(S, seed=seedS)
        # dw = 2 dxi / sqrt(S); dxi = -sign*xiK dt
        fw = -2.0 * sign * xiK / rootS
        w_base = line.w[line.node_pos[-2]]
        w_win = w_base + cumulative_boole(fw, t)
        prev = w_base - line.w[line.node_pos[-3]]
        if ((w_win[-1] - w_base) * np.conj(prev)).real > 0:
            break
    zeta_inner = cumulative_boole(-v * fw, t)[-1]
    zeta_outer = np.conj(cumulative_boole(fw / v, t)[-1])
    return _CornerWindow(
        xi=xi, t=t, rootS=rootS, w=w_win, dw_inc=complex(w_win[-1] - w_base),
        zeta_inner_inc=complex(zeta_inner), zeta_outer_inc=complex(zeta_outer), v=v,
    )


def _node_rule_cum(fnodes: np.ndarray, x: np.ndarray, beta: float) -> np.ndarray:
    """Cumulative mesh-node rule: trapezoid plus beta-weighted curvature term."""
    inc = 0.5 * (fnodes[1:] + fnodes[:-1]) * np.diff(x)
    if beta != 0.0 and len(fnodes) > 3:
        d2 = np.zeros(len(fnodes), dtype=complex)
        h1 = x[1:-1] - x[:-2]
        h2 = x[2:] - x[1:-1]
        d2[1:-1] = 2.0 * (fnodes[:-2] * h2 - fnodes[1:-1] * (h1 + h2) + fnodes[2:] * h1) / (
            h1 * h2 * (h1 + h2)
        )
        d2[0], d2[-1] = d2[1], d2[-2]
        inc = inc - beta * np.diff(x) ** 3 / 12.0 * 0.5 * (d2[1:] + d2[:-1])
    return np.concatenate(([0.0 + 0.0j], np.cumsum(inc)))


def build_quarter(params: TorusParams, spec: MeshSpec) -> QuarterMesh:
    """Construct the mesh geometry and run the w-pass (torus coordinates)."""
    rho = params.rho
    c_int = -1j / (8.0 * math.cos(rho))
    e3_int = -math.tan(rho) / 12.0
    R, C = spec.rows, spec.cols
    theta, jrho = theta_grid(R, rho, spec.ang_power)
    window = spec.corner_window * (C - 1) ** (-2.0 / 3.0)
    radius = radial_grid(C, spec.detour_radius_origin, spec.rad_power, window)
    ring = spec.detour_radius_origin

    dom_in = radius[None, :] * np.exp(1j * theta)[:, None]
    dom_out = (1.0 / radius[None, :]) * np.exp(1j * theta)[:, None]
    mesh = QuarterMesh(
        params=params, spec=spec, rho=rho, c_int=c_int, e3_int=e3_int,
        theta=theta, radius=radius, corner_row=jrho,
        dom_in=dom_in, dom_out=dom_out,
    )

    e_m, e_p = np.exp(-1j * rho), np.exp(1j * rho)
    w_in = np.empty((R, C), dtype=complex)

    for j in range(R):
        th = theta[j]
        # ladder edges: mesh radii plus geometric refinement at both hot ends
        edges = list(radius)
        dist_branch = abs(np.exp(1j * th) - e_p)
        if j == jrho:
            # respect the closure window: refine only up to radius[-2]
            edges = _subdivide(edges, radius[-3], radius[-2], window / 4.0, toward_hi=True)
        else:
            tgt = max(dist_branch / 3.0, 1e-4)
            edges = _subdivide(edges, radius[-2], radius[-1], tgt, toward_hi=True)
            edges = _subdivide(edges, radius[-3], radius[-2], min(tgt * 4, 0.25), toward_hi=True)
        edges = _subdivide(edges, radius[0], radius[1], ring / 3.0, toward_hi=False)
        edges = np.array(sorted(set(edges)))
        node_pos_edges = np.searchsorted(edges, radius)
        lad_r = ladder_params(edges, spec.panels)
        node_pos = np.searchsorted(lad_r, radius)
        line = _Line(theta=th, r=lad_r, node_pos=node_pos)

        # anchor leg wp = s^2 from the origin to the detour ring
        s_end = math.sqrt(ring) * np.exp(0.5j * th)
        t = ladder_params(np.linspace(0.0, 1.0, spec.leg_cells + 1), spec.leg_panels)
        s = t * s_end
        Rs = 4.0 * c_int * (s * s + e_m) * (s * s - e_p)
        rootR = _track_sqrt(Rs, seed=np.sqrt(Rs[0]))
        line.s, line.rootR = s, rootR
        line.w_leg = cumulative_boole(2.0 * s_end / rootR, t)
        w_ring = line.w_leg[-1]

        v = lad_r * np.exp(1j * th)
        Q = _cubic_Q(v, rho, c_int)
        if j == jrho:
            Q[-1] = Q[-2]  # r = 1 sample is replaced by the window closure
        rootQ = _track_sqrt(Q, seed=s[-1] * rootR[-1])
        line.rootQ = rootQ
        f = np.exp(1j * th) / rootQ
        cum = cumulative_boole(f, lad_r)
        line.w = w_ring + cum
        if j == jrho:
            win = _corner_window(mesh, line, radius[-2])
            mesh._window = win
            line.w = line.w.copy()
            line.w[node_pos[-1]] = win.w[-1]
        w_in[j] = line.w[node_pos]
        mesh.lines.append(line)

    omega1_mesh = w_in[jrho, -1]
    a_mesh = float(omega1_mesh.real)
    b_mesh = float(-omega1_mesh.imag)
    if not (a_mesh > 0 and b_mesh > 0):
        raise MeshQualityError("mesh corner landed in the wrong quadrant")
    mesh.w_in = w_in
    mesh.w_out = 2.0 * a_mesh - np.conj(w_in)
    mesh.a_mesh, mesh.b_mesh, mesh.omega1_mesh = a_mesh, b_mesh, omega1_mesh
    return mesh


def run_zeta_pass(mesh: QuarterMesh) -> None:
    """Integrate d zeta = -wp dw (inner) and conj(dw/wp) (mirrored sheet).

    The inner closure across the branch-corner window is the one-sided
    rectangle rule sampling wp at the window's far (corner) end; the window
    itself and all other cells are quadrature-exact.
    """
    spec, rho, c_int = mesh.spec, mesh.rho, mesh.c_int
    R, C = spec.rows, spec.cols
    jrho = mesh.corner_row
    e_p = np.exp(1j * rho)
    win = mesh._window

    zeta_in = np.empty((R, C), dtype=complex)
    for j in range(R):
        line = mesh.lines[j]
        t = line.s / line.s[-1]
        line.zeta_leg = cumulative_boole(-2.0 * line.s**2 * line.s[-1] / line.rootR, t)
        v = line.r * np.exp(1j * line.theta)
        f = -v * np.exp(1j * line.theta) / line.rootQ
        cum = cumulative_boole(f, line.r)
        line.zeta = line.zeta_leg[-1] + cum
        z_line = line.zeta[line.node_pos].copy()
        if j == jrho:
            if spec.corner_rule == "far":
                inc = -e_p * win.dw_inc
            elif spec.corner_rule == "inner":
                inc = -(mesh.radius[-2] * e_p) * win.dw_inc
            else:
                inc = win.zeta_inner_inc
            z_line[-1] = z_line[-2] + inc
            line.zeta = line.zeta.copy()
            line.zeta[line.node_pos[-1]] = z_line[-1]
        zeta_in[j] = z_line

    eta1 = complex(zeta_in[jrho, -1])
    eta2 = -np.conj(eta1)
    mesh.eta1, mesh.eta2 = eta1, eta2

    zeta_out = np.empty((R, C), dtype=complex)
    for j in range(R):
        line = mesh.lines[j]
        v = line.r * np.exp(1j * line.theta)
        g = np.exp(1j * line.theta) / (v * line.rootQ)
        if j == jrho:
            g = g.copy()
            g[-1] = g[-2]
        cum = cumulative_boole(g, line.r)
        if j > jrho:
            start = zeta_in[j, -1]
        elif j == jrho:
            start = eta1
        else:
            start = -zeta_in[j, -1] + 2.0 * eta1
        lad = start + np.conj(cum - cum[-1])
        if j == jrho:
            iK = line.node_pos[-2]
            lad = lad.copy()
            lad[iK:] = start
            lad[:iK + 1] = (start - win.zeta_outer_inc) + np.conj(cum[: iK + 1] - cum[iK])
        line.zeta_out = lad
        zeta_out[j] = lad[line.node_pos]
    mesh.zeta_in, mesh.zeta_out = zeta_in, zeta_out


def run_green_pass(mesh: QuarterMesh) -> None:
    """Integrate dF = c zeta dz along every radial line, both sheets."""
    spec, c_int = mesh.spec, mesh.c_int
    R, C = spec.rows, spec.cols
    jrho = mesh.corner_row
    beta = spec.green_blend

    F_in = np.empty((R, C), dtype=complex)
    F_ring = np.empty(R, dtype=complex)
    for j in range(R):
        line = mesh.lines[j]
        t = line.s / line.s[-1]
        fF = c_int * line.zeta_leg * 2.0 * line.s[-1] / line.rootR
        F_ring[j] = cumulative_boole(fF, t)[-1]
        wprime = np.exp(1j * line.theta) / line.rootQ[line.node_pos]
        f = c_int * line.zeta[line.node_pos] * wprime
        if j == jrho:
            f = f.copy()
            f[-1] = f[-2]
        cum = _node_rule_cum(f, mesh.radius, beta)
        F_in[j] = F_ring[j] + cum
        if j == jrho:
            wK = mesh.w_in[j, -2]
            zK, zO = mesh.zeta_in[j, -2], mesh.zeta_in[j, -1]
            F_in[j, -1] = F_in[j, -2] + 0.5 * c_int * (zK + zO) * (mesh.omega1_mesh - wK)

    F_omega1 = complex(F_in[jrho, -1])
    F_two_omega1 = 2.0 * F_omega1 - 2.0 * c_int * mesh.eta1 * mesh.omega1_mesh

    F_out = np.empty((R, C), dtype=complex)
    src = 2.0 * mesh.a_mesh
    for j in range(R):
        line = mesh.lines[j]
        W = mesh.w_out[j]
        zhat = W - src
        dWdr = -np.conj(np.exp(1j * line.theta) / line.rootQ[line.node_pos])
        if j == jrho:
            dWdr = dWdr.copy()
            dWdr[-1] = dWdr[-2]
        reg = c_int * mesh.zeta_out[j] - 1.0 / zhat
        inc_pole = np.log(zhat[1:] / zhat[:-1])
        reg_cum = _node_rule_cum(reg * dWdr, mesh.radius, beta)
        cum = reg_cum + np.concatenate(([0.0 + 0.0j], np.cumsum(inc_pole)))
        if j > jrho:
            start = F_in[j, -1]
        elif j == jrho:
            start = F_omega1
        else:
            start = F_two_omega1 + F_in[j, -1] - 2.0 * c_int * mesh.eta1 * mesh.w_in[j, -1]
        F_out[j] = start + (cum - cum[-1])
    mesh.F_in, mesh.F_out = F_in, F_out
    mesh.F_omega1, mesh.F_two_omega1 = F_omega1, F_two_omega1
