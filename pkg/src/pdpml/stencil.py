"""Nonlocal kernels and the quadrature-generated difference stencil.

The discrete operator acting on a grid function u is

    (L u)_i = sum_k a_k u_{i+k},        |k1|, |k2| <= p,

where the coefficients come from integrating the kernel against a bilinear
hat basis over the interaction neighborhood:

    a_k = (1 / W(h k)) * integral( phi_k(z) W(z) gamma(z) dz ),   k != 0,

with W(z) = |z|^2 / |z|_1 and phi_k the hat centered at h*k, and
a_0 = -sum_{k != 0} a_k so constants are annihilated exactly.

Each offset's 2h x 2h support square is split into its four h x h cells (the
cell boundaries line up with the hat's ridge lines and with the coordinate
axes where W has kinks, so the integrand is smooth per cell).  Cells fully
inside the horizon disk get tensor Gauss-Legendre; cells cut by the horizon
circle, or touching the origin, are integrated in polar coordinates with
angular breakpoints at cell corners and circle/edge intersections so the
radial limits are smooth on every angular slice.  For kernels with an
r^-(2+2s) singularity the radial rule on origin-touching cells is
Gauss-Jacobi with weight r^(-2s): the polar Jacobian already tames two of
the singular powers, and the Jacobi weight absorbs the rest exactly while
the remaining factor stays smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "KernelSpec",
    "GridConfig",
    "Stencil",
    "eval_kernel",
    "weight",
    "stencil_radius",
    "compute_stencil",
    "apply_operator",
    "apply_stencil",
    "dispersion_omega2",
    "omega2_max",
    "group_speed_max",
    "long_wave_speed",
    "cfl_dt_limit",
    "write_stencil_csv",
]

# Tolerance snap so that p = ceil(delta_eff/h) does not round 4.0000000000001
# up to 5 when delta_eff/h is an exact integer in real arithmetic.
_CEIL_SNAP = 1e-9

_FAMILIES = ("gaussian", "bounded_singular", "heaviside_over_r2")
_SHAPES = ("heaviside", "piecewise_linear", "gaussian")


# ----------------------------------------------------------------------------
# kernel and grid descriptions
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """Radial interaction kernel gamma(r).

    Parameters
    ----------
    family : str
        One of ``"gaussian"`` (amplitude 4/(pi eps^4), scale ``epsilon``),
        ``"bounded_singular"`` (``amplitude * shape(r) / r^(2+2s)`` up to
        radius ``delta``), or ``"heaviside_over_r2"``
        (``4/(pi delta^2 r^2)`` up to radius ``delta``).
    epsilon : float, optional
        Gaussian length scale; also the scale of the gaussian shape factor
        of the bounded-singular family.
    delta : float, optional
        Horizon radius for the bounded families.
    s : float
        Singularity exponent of the bounded-singular family, in [0, 1/2).
    gamma_bar : str
        Bounded shape factor: "heaviside", "piecewise_linear" or "gaussian".
    amplitude : float
        Overall scale of the bounded-singular family (the other two families
        carry their conventional normalization).
    cutoff : float
        Relative threshold below which the gaussian family is treated as
        zero; defines its effective horizon.
    """

    family: str
    epsilon: float | None = None
    delta: float | None = None
    s: float = 0.0
    gamma_bar: str = "heaviside"
    amplitude: float = 1.0
    cutoff: float = 1e-7

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian":
            if self.epsilon is None or self.epsilon <= 0:
                raise ValueError("gaussian kernel needs epsilon > 0")
            if not 0.0 < self.cutoff < 1.0:
                raise ValueError("cutoff must lie in (0, 1)")
        else:
            if self.delta is None or self.delta <= 0:
                raise ValueError(f"{self.family} kernel needs delta > 0")
        if self.family == "bounded_singular":
            if self.s < 0.0:
                raise ValueError("singularity exponent s must be >= 0")
            if self.s >= 0.5:
                raise ValueError(
                    f"s = {self.s} is not integrable in 2D; s must lie in [0, 1/2)"
                )
            if self.gamma_bar not in _SHAPES:
                raise ValueError(f"unknown shape factor {self.gamma_bar!r}")
            if self.gamma_bar == "gaussian" and (
                self.epsilon is None or self.epsilon <= 0
            ):
                raise ValueError("gaussian shape factor needs epsilon > 0")
            if self.amplitude < 0:
                raise ValueError("amplitude must be >= 0")

    # constructors ------------------------------------------------------

    @staticmethod
    def gaussian(epsilon: float, cutoff: float = 1e-7) -> "KernelSpec":
        return KernelSpec(family="gaussian", epsilon=epsilon, cutoff=cutoff)

    @staticmethod
    def heaviside_over_r2(delta: float) -> "KernelSpec":
        return KernelSpec(family="heaviside_over_r2", delta=delta)

    @staticmethod
    def bounded_singular(
        delta: float,
        s: float,
        gamma_bar: str = "heaviside",
        amplitude: float = 1.0,
        epsilon: float | None = None,
    ) -> "KernelSpec":
        return KernelSpec(
            family="bounded_singular",
            delta=delta,
            s=s,
            gamma_bar=gamma_bar,
            amplitude=amplitude,
            epsilon=epsilon,
        )

    @property
    def delta_eff(self) -> float:
        """Effective horizon: where the kernel is treated as zero."""
        if self.family == "gaussian":
            return self.epsilon * math.sqrt(-math.log(self.cutoff))
        return self.delta


@dataclass(frozen=True)
class GridConfig:
    """Uniform grid: mesh h, physical |i| <= n, layer n_p, stencil radius p."""

    h: float
    n: int
    n_p: int
    p: int

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise ValueError("mesh size h must be positive")
        if self.n < 1:
            raise ValueError("physical half-width n must be >= 1")
        if self.n_p < 0:
            raise ValueError("layer thickness n_p must be >= 0")
        if self.p < 1:
            raise ValueError("stencil radius p must be >= 1")

    @property
    def n_total(self) -> int:
        """Outermost stored index; the grid spans |i_alpha| <= n_total."""
        return self.n + self.n_p

    @property
    def n_nodes(self) -> int:
        """Nodes per axis, 2*(n + n_p) + 1."""
        return 2 * self.n_total + 1

    @staticmethod
    def for_kernel(
        spec: KernelSpec, h: float, n: int, n_p: int
    ) -> "GridConfig":
        """Grid with the stencil radius auto-derived from the kernel."""
        return GridConfig(h=h, n=n, n_p=n_p, p=stencil_radius(spec, h))


def stencil_radius(spec: KernelSpec, h: float) -> int:
    """p = ceil(delta_eff / h), snapped against float round-up."""
    return max(1, math.ceil(spec.delta_eff / h - _CEIL_SNAP))


# ----------------------------------------------------------------------------
# pointwise kernel / weight evaluation
# ----------------------------------------------------------------------------


def eval_kernel(spec: KernelSpec, r):
    """Kernel value gamma(r); zero beyond the effective horizon.

    Accepts a scalar or an ndarray of radii.  Negative radii raise.
    Singular families return inf at r = 0.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise ValueError("kernel radius must be nonnegative")
    with np.errstate(divide="ignore"):
        vals = _gamma_nocut(spec, arr)
    vals = np.where(arr > spec.delta_eff, 0.0, vals)
    if np.isscalar(r) or np.ndim(r) == 0:
        return float(vals)
    return vals


def _gamma_nocut(spec: KernelSpec, r):
    """Raw kernel value without the horizon cut (r may be an array)."""
    if spec.family == "gaussian":
        amp = 4.0 / (math.pi * spec.epsilon**4)
        return amp * np.exp(-((r / spec.epsilon) ** 2))
    if spec.family == "heaviside_over_r2":
        return (4.0 / (math.pi * spec.delta**2)) / (r * r)
    return spec.amplitude * _shape_bar(spec, r) / r ** (2.0 + 2.0 * spec.s)


def _shape_bar(spec: KernelSpec, r):
    """Bounded shape factor of the bounded-singular family."""
    if spec.gamma_bar == "heaviside":
        return np.ones_like(r)
    if spec.gamma_bar == "piecewise_linear":
        return np.maximum(1.0 - r / spec.delta, 0.0)
    return np.exp(-((r / spec.epsilon) ** 2))


def weight(z) -> float:
    """W(z) = |z|^2 / |z|_1 for a 2-vector z != 0."""
    z1, z2 = float(z[0]), float(z[1])
    denom = abs(z1) + abs(z2)
    if denom == 0.0:
        raise ValueError("weight is undefined at z = 0")
    return (z1 * z1 + z2 * z2) / denom


def _weight_arr(z1, z2):
    return (z1 * z1 + z2 * z2) / (np.abs(z1) + np.abs(z2))


def _hat_arr(z1, z2, k1, k2, h):
    t1 = 1.0 - np.abs(z1 / h - k1)
    t2 = 1.0 - np.abs(z2 / h - k2)
    return np.maximum(t1, 0.0) * np.maximum(t2, 0.0)


# ----------------------------------------------------------------------------
# stencil assembly
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Stencil:
    """Difference-operator coefficients a_k on offsets |k1|,|k2| <= p.

    ``a[p + k1, p + k2]`` stores a_k.  ``h`` records the mesh the stencil was
    generated for (the dispersion relation needs it).
    """

    p: int
    h: float
    a: np.ndarray

    def coeff(self, k1: int, k2: int) -> float:
        return float(self.a[self.p + k1, self.p + k2])

    def offsets(self):
        """All offsets in lexicographic order (the deterministic sum order)."""
        for k1 in range(-self.p, self.p + 1):
            for k2 in range(-self.p, self.p + 1):
                yield k1, k2


def compute_stencil(
    spec: KernelSpec, grid: GridConfig, quad_order: int = 8
) -> Stencil:
    """Assemble the stencil by per-cell Gauss-Legendre quadrature.

    Parameters
    ----------
    spec : KernelSpec
    grid : GridConfig
        ``grid.p`` must be at least ceil(delta_eff / h).
    quad_order : int
        Gauss-Legendre order per direction on every cell / angular slice.

    Returns
    -------
    Stencil
        Coefficients satisfy: zero row sum exactly (a_0 is set to the
        negated lexicographic sum), a_k >= 0 for k != 0, and the full 8-fold
        symmetry a_(k1,k2) = a_(k2,k1) = a_(+-k1,+-k2) exactly (each value is
        computed once and mirrored).
    """
    if quad_order < 2:
        raise ValueError("quad_order must be >= 2")
    required = stencil_radius(spec, grid.h)
    if grid.p < required:
        raise ValueError(
            f"stencil radius p = {grid.p} cannot cover the horizon "
            f"delta_eff = {spec.delta_eff:.6g} at h = {grid.h:.6g}; "
            f"need p >= {required}"
        )
    p, h = grid.p, grid.h
    nodes, wts = np.polynomial.legendre.leggauss(quad_order)
    if spec.family == "bounded_singular" and spec.s > 0.0:
        jac = roots_jacobi(quad_order, 0.0, -2.0 * spec.s)
    else:
        jac = (nodes, wts)  # s = 0 reduces Gauss-Jacobi to Gauss-Legendre
    a = np.zeros((2 * p + 1, 2 * p + 1))
    for k1 in range(1, p + 1):
        for k2 in range(0, k1 + 1):
            raw = _integrate_offset(spec, k1, k2, h, nodes, wts, jac)
            val = raw / weight((k1 * h, k2 * h))
            for s1 in (1, -1):
                for s2 in (1, -1):
                    a[p + s1 * k1, p + s2 * k2] = val
                    a[p + s1 * k2, p + s2 * k1] = val
    a0 = 0.0
    for k1 in range(-p, p + 1):
        for k2 in range(-p, p + 1):
            if (k1, k2) != (0, 0):
                a0 -= a[p + k1, p + k2]
    a[p, p] = a0
    a.setflags(write=False)
    return Stencil(p=p, h=h, a=a)


def _integrate_offset(spec, k1, k2, h, nodes, wts, jac):
    """integral of phi_k * W * gamma over the support square cap horizon."""
    total = 0.0
    for cx in (k1 - 1, k1):
        for cy in (k2 - 1, k2):
            total += _integrate_cell(
                spec, k1, k2, cx * h, (cx + 1) * h, cy * h, (cy + 1) * h,
                h, nodes, wts, jac,
            )
    return total


def _integrate_cell(spec, k1, k2, x0, x1, y0, y1, h, nodes, wts, jac):
    R = spec.delta_eff
    dmin = math.hypot(max(x0, 0.0, -x1), max(y0, 0.0, -y1))
    if dmin >= R:
        return 0.0
    corners = [(x0, y0), (x0, y1), (x1, y0), (x1, y1)]
    dmax = max(math.hypot(cx, cy) for cx, cy in corners)
    if dmax <= R and dmin > 0.0:
        return _cell_cartesian(spec, k1, k2, x0, x1, y0, y1, h, nodes, wts)
    return _cell_polar(spec, k1, k2, x0, x1, y0, y1, h, nodes, wts, jac, dmin)


def _cell_cartesian(spec, k1, k2, x0, x1, y0, y1, h, nodes, wts):
    xs = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * nodes
    ys = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * nodes
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    r = np.hypot(X, Y)
    f = _hat_arr(X, Y, k1, k2, h) * _weight_arr(X, Y) * _gamma_nocut(spec, r)
    w2d = np.outer(wts, wts)
    return float((w2d * f).sum()) * 0.25 * (x1 - x0) * (y1 - y0)


def _cell_polar(spec, k1, k2, x0, x1, y0, y1, h, nodes, wts, jac, dmin):
    """Polar integration of one cell clipped against the horizon disk."""
    R = spec.delta_eff
    corners = [(x0, y0), (x0, y1), (x1, y0), (x1, y1)]
    angs = [math.atan2(cy, cx) for cx, cy in corners if cx != 0.0 or cy != 0.0]
    th_lo, th_hi = min(angs), max(angs)
    brk = set(angs)
    # circle intersections with vertical cell edges
    for c in (x0, x1):
        if abs(c) < R:
            yint = math.sqrt(R * R - c * c)
            for yy in (yint, -yint):
                if y0 <= yy <= y1 and (c != 0.0 or yy != 0.0):
                    brk.add(math.atan2(yy, c))
    # circle intersections with horizontal cell edges
    for c in (y0, y1):
        if abs(c) < R:
            xint = math.sqrt(R * R - c * c)
            for xx in (xint, -xint):
                if x0 <= xx <= x1 and (c != 0.0 or xx != 0.0):
                    brk.add(math.atan2(c, xx))
    thetas = sorted(t for t in brk if th_lo <= t <= th_hi)

    singular = (
        spec.family in ("bounded_singular", "heaviside_over_r2")
        and dmin == 0.0
    )
    if spec.family == "heaviside_over_r2":
        s_exp, amp = 0.0, 4.0 / (math.pi * spec.delta**2)
    else:
        s_exp, amp = spec.s, spec.amplitude

    total = 0.0
    for ta, tb in zip(thetas[:-1], thetas[1:]):
        if tb - ta < 1e-13:
            continue
        th = 0.5 * (ta + tb) + 0.5 * (tb - ta) * nodes
        ct, st = np.cos(th), np.sin(th)
        rin_x, rout_x = _slab(x0, x1, ct)
        rin_y, rout_y = _slab(y0, y1, st)
        r_in = np.maximum(np.maximum(rin_x, rin_y), 0.0)
        r_out = np.minimum(np.minimum(rout_x, rout_y), R)
        width = np.maximum(r_out - r_in, 0.0)
        if singular:
            # W * gamma * r reduces to amp * bar(r) * r^(-2s) / (|cos|+|sin|);
            # Gauss-Jacobi nodes with weight (1+x)^(-2s) absorb r^(-2s)
            # exactly (r_in = 0 on origin-touching cells).
            xj, wj = jac
            r = 0.5 * width[None, :] * (xj[:, None] + 1.0)
            z1, z2 = r * ct[None, :], r * st[None, :]
            bar = _shape_bar(spec, r) if spec.family == "bounded_singular" else 1.0
            f = (
                _hat_arr(z1, z2, k1, k2, h)
                * amp * bar / (np.abs(ct) + np.abs(st))[None, :]
            )
            w2d = np.outer(wj, wts) * ((0.5 * width) ** (1.0 - 2.0 * s_exp))[None, :]
        else:
            r = r_in[None, :] + 0.5 * width[None, :] * (nodes[:, None] + 1.0)
            z1, z2 = r * ct[None, :], r * st[None, :]
            f = (
                _hat_arr(z1, z2, k1, k2, h)
                * _weight_arr(z1, z2)
                * _gamma_nocut(spec, r)
                * r
            )
            w2d = np.outer(wts, wts * 0.5 * width)
        total += float((w2d * f).sum()) * 0.5 * (tb - ta)
    return total


def _slab(lo, hi, d):
    """Entry/exit parameters of rays r*d crossing the slab lo <= x <= hi."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = lo / d
        t1 = hi / d
    inside = (lo <= 0.0) & (0.0 <= hi)
    t_in = np.where(d > 0, t0, np.where(d < 0, t1,
                    np.where(inside, -np.inf, np.inf)))
    t_out = np.where(d > 0, t1, np.where(d < 0, t0,
                     np.where(inside, np.inf, -np.inf)))
    return t_in, t_out


# ----------------------------------------------------------------------------
# operator application
# ----------------------------------------------------------------------------


def apply_operator(u: np.ndarray, st: Stencil, i: tuple[int, int]) -> float:
    """sum_k a_k u_{i+k} at one node, lexicographic order, Dirichlet 0 outside."""
    n1, n2 = u.shape
    i1, i2 = i
    acc = 0.0
    for k1, k2 in st.offsets():
        a = st.a[st.p + k1, st.p + k2]
        if a == 0.0:
            continue
        j1, j2 = i1 + k1, i2 + k2
        if 0 <= j1 < n1 and 0 <= j2 < n2:
            acc += a * u[j1, j2]
    return acc


def apply_stencil(u: np.ndarray, st: Stencil) -> np.ndarray:
    """Full-grid operator application with Dirichlet-zero outside the array.

    Accumulates shifted slices offset-by-offset in lexicographic order, so
    every node's additions happen in exactly the order apply_operator uses;
    results are bit-reproducible regardless of threading.
    """
    n1, n2 = u.shape
    out = np.zeros_like(u)
    for k1, k2 in st.offsets():
        a = st.a[st.p + k1, st.p + k2]
        if a == 0.0:
            continue
        d1_lo, d1_hi = max(0, -k1), min(n1, n1 - k1)
        d2_lo, d2_hi = max(0, -k2), min(n2, n2 - k2)
        if d1_lo >= d1_hi or d2_lo >= d2_hi:
            continue
        out[d1_lo:d1_hi, d2_lo:d2_hi] += a * u[
            d1_lo + k1 : d1_hi + k1, d2_lo + k2 : d2_hi + k2
        ]
    return out


# ----------------------------------------------------------------------------
# dispersion relation
# ----------------------------------------------------------------------------


def dispersion_omega2(st: Stencil, kappa) -> float | np.ndarray:
    """omega^2(kappa) = sum_{k != 0} a_k (1 - cos(kappa . k h)).

    Each summand is nonnegative, so omega^2 >= 0 holds in floating point as
    well, and kappa = 0 gives exactly 0.  ``kappa`` may be a pair of scalars
    or a pair of broadcastable arrays (kappa1, kappa2).
    """
    kap1 = np.asarray(kappa[0], dtype=float)
    kap2 = np.asarray(kappa[1], dtype=float)
    acc = np.zeros(np.broadcast(kap1, kap2).shape)
    for k1, k2 in st.offsets():
        if (k1, k2) == (0, 0):
            continue
        a = st.a[st.p + k1, st.p + k2]
        if a == 0.0:
            continue
        acc += a * (1.0 - np.cos((kap1 * k1 + kap2 * k2) * st.h))
    if acc.ndim == 0:
        return float(acc)
    return acc


def _dispersion_grad(st: Stencil, kap1, kap2):
    """Gradient of omega^2 with respect to kappa (two arrays)."""
    g1 = np.zeros(np.broadcast(kap1, kap2).shape)
    g2 = np.zeros_like(g1)
    for k1, k2 in st.offsets():
        a = st.a[st.p + k1, st.p + k2]
        if a == 0.0 or (k1, k2) == (0, 0):
            continue
        sin = a * st.h * np.sin((kap1 * k1 + kap2 * k2) * st.h)
        g1 += sin * k1
        g2 += sin * k2
    return g1, g2


def _bz_grid(st: Stencil, n_grid: int):
    ka = np.linspace(-math.pi / st.h, math.pi / st.h, n_grid)
    return np.meshgrid(ka, ka, indexing="ij")


def omega2_max(st: Stencil, n_grid: int = 64) -> float:
    """Maximum of omega^2 over a Brillouin-zone grid plus the zone corner.

    The corner (pi/h, pi/h) is not always the maximizer (offsets with
    k1 + k2 even contribute nothing there), hence the scan.
    """
    K1, K2 = _bz_grid(st, n_grid)
    w2 = dispersion_omega2(st, (K1, K2))
    corner = dispersion_omega2(st, (math.pi / st.h, math.pi / st.h))
    return max(float(np.max(w2)), corner)


def long_wave_speed(st: Stencil) -> float:
    """Continuum sound speed sqrt(m/2) with m = sum_k a_k (k1 h)^2."""
    m = 0.0
    for k1, k2 in st.offsets():
        m += st.a[st.p + k1, st.p + k2] * (k1 * st.h) ** 2
    return math.sqrt(0.5 * m)


def group_speed_max(st: Stencil, n_grid: int = 64) -> float:
    """Max |grad omega| over the Brillouin zone (plus the long-wave limit)."""
    K1, K2 = _bz_grid(st, n_grid)
    w2 = dispersion_omega2(st, (K1, K2))
    g1, g2 = _dispersion_grad(st, K1, K2)
    mask = w2 > 1e-12 * max(float(np.max(w2)), 1.0)
    vg = np.zeros_like(w2)
    vg[mask] = np.hypot(g1[mask], g2[mask]) / (2.0 * np.sqrt(w2[mask]))
    return max(float(np.max(vg)), long_wave_speed(st))


def cfl_dt_limit(st: Stencil, safety: float = 0.9) -> float:
    """Largest stable time step safety * 2 / sqrt(max omega^2)."""
    return safety * 2.0 / math.sqrt(omega2_max(st))


# ----------------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------------


def write_stencil_csv(st: Stencil, path) -> None:
    """Write the coefficients as CSV rows k1,k2,a (lexicographic order)."""
    with open(path, "w") as f:
        f.write("k1,k2,a\n")
        for k1, k2 in st.offsets():
            f.write(f"{k1},{k2},{float(st.a[st.p + k1, st.p + k2])!r}\n")
