"""Damping profiles and right-hand sides of the absorbing-layer system.

The absorbing layer surrounds the physical region on all four sides.  Along
each axis the damping strength depends only on how deep a node sits in the
layer, so a profile is a short per-depth array plus a placement rule.  The
wave field couples to auxiliary memory fields living on the layer slabs (one
family per axis, shift direction, and order) and on the corner
intersections; this module evaluates their evolution right-hand sides and
the damped main equation.

Everything here is a pure function of plain numpy arrays and works for real
or complex data, which lets the frequency-domain verification drive the
exact same code paths as the time stepper.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from pdpml.stencil import GridConfig, Stencil, apply_stencil

CORNER_KINDS = ("TT", "TB", "BT", "BB")

# ----------------------------------------------------------------------------
# shifted reads with hard truncation
# ----------------------------------------------------------------------------


def shift_along(f: np.ndarray, d: int, axis: int) -> np.ndarray:
    """Shifted copy of a field: out[i] = f[i + d] along one axis.

    Reads past either end of the array return 0, matching the homogeneous
    Dirichlet truncation of the grid.  d = 0 returns an independent copy.
    """
    out = np.zeros_like(f)
    n = f.shape[axis]
    if abs(d) >= n:
        return out
    src = [slice(None)] * f.ndim
    dst = [slice(None)] * f.ndim
    if d >= 0:
        dst[axis] = slice(0, n - d)
        src[axis] = slice(d, n)
    else:
        dst[axis] = slice(-d, n)
        src[axis] = slice(0, n + d)
    out[tuple(dst)] = f[tuple(src)]
    return out


def shift_field(f: np.ndarray, d1: int, d2: int = 0) -> np.ndarray:
    """Two-axis shifted read: out[i1, i2] = f[i1 + d1, i2 + d2], zero outside."""
    n1, n2 = f.shape
    out = np.zeros_like(f)
    if abs(d1) >= n1 or abs(d2) >= n2:
        return out
    dst1 = slice(max(0, -d1), min(n1, n1 - d1))
    src1 = slice(max(0, d1), min(n1, n1 + d1))
    dst2 = slice(max(0, -d2), min(n2, n2 - d2))
    src2 = slice(max(0, d2), min(n2, n2 + d2))
    out[dst1, dst2] = f[src1, src2]
    return out


def _weighted(f: np.ndarray, sig: np.ndarray, axis: int) -> np.ndarray:
    """Node-wise product sigma * f with sigma varying along one axis."""
    shape = [1] * f.ndim
    shape[axis] = -1
    return f * sig.reshape(shape)


# ----------------------------------------------------------------------------
# damping profile
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PMLProfile:
    """Per-axis damping profile and its placement on the node grid.

    sigma[alpha, l] is the damping strength at depth l into the layer along
    axis alpha (depth 0 is the first node past the physical region, so a
    node with index i carries sigma[alpha, |i_alpha| - n - 1] when
    |i_alpha| > n and zero otherwise).  The placement is even in each axis.
    """

    sigma: np.ndarray
    n: int

    def __eq__(self, other):
        if not isinstance(other, PMLProfile):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.sigma, other.sigma)

    def __hash__(self):
        return hash((self.n, self.sigma.tobytes()))

    def __post_init__(self):
        arr = np.array(self.sigma, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != 2:
            raise ValueError(
                f"sigma must have shape (2, n_p), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("damping values must be finite")
        if np.any(arr < 0):
            raise ValueError("damping values must be nonnegative")
        if self.n < 0:
            raise ValueError(f"n = {self.n} must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "sigma", arr)

    @property
    def n_p(self) -> int:
        return self.sigma.shape[1]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.sigma > 0)

    def node_sigma(self, axis: int) -> np.ndarray:
        """Damping at every node index along one axis.

        Returns an array of length 2(n + n_p) + 1; entry j corresponds to
        node index i = j - (n + n_p).
        """
        if axis not in (0, 1):
            raise ValueError(f"axis must be 0 or 1, got {axis}")
        big = self.n + self.n_p
        idx = np.abs(np.arange(-big, big + 1))
        out = np.zeros(2 * big + 1)
        inside = idx > self.n
        if self.n_p:
            out[inside] = self.sigma[axis][idx[inside] - self.n - 1]
        return out


def build_profile(grid: GridConfig, sigma0: float) -> PMLProfile:
    """Constant damping profile: sigma0 at every layer depth on both axes."""
    if sigma0 < 0:
        raise ValueError(f"sigma0 = {sigma0} is negative; damping must be >= 0")
    return PMLProfile(sigma=np.full((2, grid.n_p), float(sigma0)), n=grid.n)


# ----------------------------------------------------------------------------
# time-harmonic modes and their damping factors
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class WaveMode:
    """A time-harmonic mode with frequency omega and wave vector kappa.

    omega must be real and nonzero.  kappa holds two complex wave numbers
    with nonpositive imaginary parts (propagating modes have Im kappa = 0,
    evanescent ones Im kappa < 0).  The Brillouin-zone bound on Re kappa
    depends on the mesh width, so it is checked by the consumers that know
    h, not here.
    """

    omega: float
    kappa: tuple

    def __post_init__(self):
        om = float(self.omega)
        if not np.isfinite(om) or om == 0.0:
            raise ValueError(f"omega = {self.omega} must be real and nonzero")
        kap = tuple(complex(c) for c in self.kappa)
        if len(kap) != 2:
            raise ValueError("kappa must have exactly two components")
        for c in kap:
            if not (np.isfinite(c.real) and np.isfinite(c.imag)):
                raise ValueError("kappa components must be finite")
            if c.imag > 0:
                raise ValueError(
                    f"Im kappa = {c.imag} > 0; modes must not grow outward"
                )
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "kappa", kap)

    def check_brillouin(self, h: float) -> None:
        """Reject wave numbers whose real part falls outside (-pi/h, pi/h]."""
        lim = np.pi / h
        for c in self.kappa:
            if not (-lim < c.real <= lim * (1 + 1e-12)):
                raise ValueError(
                    f"Re kappa = {c.real} outside the resolvable band "
                    f"(-pi/h, pi/h] = (-{lim}, {lim}]"
                )


def _step_factor(sigma_over_omega: float, e_plus: complex, e_minus: complex) -> complex:
    num = 2.0 + 1j * sigma_over_omega * (1.0 - e_minus)
    den = 2.0 + 1j * sigma_over_omega * (1.0 - e_plus)
    if den == 0:
        raise ZeroDivisionError(
            "damping factor is singular: the per-step denominator "
            "2 + i(sigma/omega)(1 - e^{i kappa h}) vanished"
        )
    return num / den


def eta(j: int, sigma_values, mode: WaveMode, h: float, axis: int = 0) -> complex:
    """Cumulative damping factor after j grid steps into the layer.

    Multiplies the per-step ratios [2 + i(s_l)(1 - e^{-i kappa h})] /
    [2 + i(s_l)(1 - e^{i kappa h})] for l = 0..j-1, where s_l = sigma_l /
    omega and kappa is the mode's wave number along `axis`.  j = 0 gives
    the empty product 1; with all sigma zero the factor is 1 at any depth.

    Parameters
    ----------
    j : int
        Number of damped steps taken (nonnegative).
    sigma_values : array_like
        Damping at successive depths; must cover at least j entries.
    mode : WaveMode
    h : float
        Mesh width.
    axis : int
        Which wave-number component accompanies this profile axis.
    """
    if j < 0:
        raise ValueError(f"depth j = {j} must be nonnegative")
    sig = np.asarray(sigma_values, dtype=float)
    if j > sig.size:
        raise ValueError(
            f"depth j = {j} exceeds the {sig.size} damping values provided"
        )
    kap = mode.kappa[axis]
    e_plus = cmath.exp(1j * kap * h)
    e_minus = cmath.exp(-1j * kap * h)
    val = 1.0 + 0.0j
    for l in range(j):
        val *= _step_factor(sig[l] / mode.omega, e_plus, e_minus)
    return val


def decay_rate_mu(mode: WaveMode, sigma0: float, h: float) -> complex:
    """Single-step damping ratio for the mode's first wave-number component.

    This is the one-factor version of eta: the amount by which the extended
    wave is multiplied per grid step under constant damping sigma0.  With
    sigma0 = 0 it equals 1 exactly; for propagating modes entering the
    layer its modulus is strictly below 1.
    """
    kap = mode.kappa[0]
    e_plus = cmath.exp(1j * kap * h)
    e_minus = cmath.exp(-1j * kap * h)
    return _step_factor(sigma0 / mode.omega, e_plus, e_minus)


# ----------------------------------------------------------------------------
# evolution right-hand sides (geometry-agnostic cores)
# ----------------------------------------------------------------------------
#
# The two shift patterns below are shared by the edge families and, with the
# drive field swapped from u to an axis-2 memory field, by the corner
# families.  `row` is the list of same-kind fields ordered by k (row[m-1]
# holds order m); the order-k self term is damped explicitly and the history
# terms couple down-triangularly to lower orders.


def _tilde_rhs(drive, row, sig, axis, k, h):
    out = (shift_along(drive, k - 1, axis) - shift_along(drive, k + 1, axis)) / (
        2.0 * h
    )
    w = _weighted(row[k - 1], sig, axis)
    out -= 0.5 * (shift_along(w, 1, axis) + w)
    for l in range(1, k):
        w = _weighted(row[k - l - 1], sig, axis)
        out -= 0.5 * (shift_along(w, l + 1, axis) - shift_along(w, l - 1, axis))
    return out


def _bar_rhs(drive, row, sig, axis, k, h):
    out = (shift_along(drive, -k, axis) - shift_along(drive, -k + 2, axis)) / (
        2.0 * h
    )
    w = _weighted(row[k - 1], sig, axis)
    out -= 0.5 * (w + shift_along(w, -1, axis))
    for l in range(1, k):
        w = _weighted(row[k - l - 1], sig, axis)
        out -= 0.5 * (shift_along(w, -l - 1, axis) - shift_along(w, -l + 1, axis))
    return out


def _main_rhs_core(u, tilde, bar, corners, st: Stencil, sig1, sig2, h):
    """Damped main-equation right-hand side (the acceleration field).

    tilde, bar : per-axis lists of edge memory fields, [axis][k-1].
    corners    : dict kind -> [k1-1][k2-1] nested lists, kind in CORNER_KINDS.
    sig1, sig2 : per-node damping along each axis (1D arrays).

    Every memory-field read is damping-weighted at the source node before
    shifting, so contributions vanish identically wherever sigma is zero.
    """
    p = st.p
    out = apply_stencil(u, st)
    sigs = (sig1, sig2)
    for axis in (0, 1):
        beta = 1 - axis
        sig = sigs[axis]
        for m in range(1, p + 1):
            wt = _weighted(tilde[axis][m - 1], sig, axis)
            wb = _weighted(bar[axis][m - 1], sig, axis)
            for l in range(0, p - m + 1):
                x = shift_along(wt, l, axis) - shift_along(wb, -l - 1, axis)
                acc = None
                for j in range(-p, p + 1):
                    c = st.coeff(m + l, abs(j))
                    if c == 0.0:
                        continue
                    term = c * shift_along(x, j, beta)
                    acc = term if acc is None else acc + term
                if acc is not None:
                    out += h * acc
    sig12 = np.multiply.outer(sig1, sig2)
    corner_sign = {"TT": 1.0, "TB": -1.0, "BT": -1.0, "BB": 1.0}
    for kind in CORNER_KINDS:
        fields = corners[kind]
        sgn = corner_sign[kind]
        w = [[sig12 * fields[a][b] for b in range(p)] for a in range(p)]
        for l in range(p):
            for m in range(p):
                q = None
                for m1 in range(1, p - l + 1):
                    for m2 in range(1, p - m + 1):
                        c = st.coeff(m1 + l, m2 + m)
                        if c == 0.0:
                            continue
                        term = c * w[m1 - 1][m2 - 1]
                        q = term if q is None else q + term
                if q is None:
                    continue
                d1 = l if kind[1] == "T" else -l - 1
                d2 = m if kind[0] == "T" else -m - 1
                out += (h * h * sgn) * shift_field(q, d1, d2)
    return out


# ----------------------------------------------------------------------------
# public wrappers reading a simulation state
# ----------------------------------------------------------------------------


def _check_state(state, st: Stencil, prof: PMLProfile):
    n_nodes = 2 * (prof.n + prof.n_p) + 1
    if state.u_curr.shape != (n_nodes, n_nodes):
        raise ValueError(
            f"field shape {state.u_curr.shape} does not match the "
            f"{n_nodes} x {n_nodes} grid implied by the profile"
        )
    if len(state.psi_tilde[0]) != st.p:
        raise ValueError(
            f"state holds {len(state.psi_tilde[0])} memory orders per family "
            f"but the stencil radius is {st.p}"
        )


def _slab_mask(prof: PMLProfile, axis: int, p: int):
    """Boolean footprint band of the layer along one axis, broadcastable.

    Memory fields live where the main equation can read them: from p nodes
    inside the physical region out to the truncation edge.
    """
    big = prof.n + prof.n_p
    idx = np.abs(np.arange(-big, big + 1))
    band = idx >= max(0, prof.n - p)
    shape = [1, 1]
    shape[axis] = -1
    return band.reshape(shape)


def main_rhs(state, st: Stencil, prof: PMLProfile) -> np.ndarray:
    """Acceleration of u for the full damped system.

    With an all-zero profile this returns apply_stencil(u) computed by the
    identical code path, so undamped trajectories match the plain wave
    solver bit for bit.
    """
    _check_state(state, st, prof)
    if prof.is_zero:
        return apply_stencil(state.u_curr, st)
    corners = {
        "TT": state.psi_TT,
        "TB": state.psi_TB,
        "BT": state.psi_BT,
        "BB": state.psi_BB,
    }
    return _main_rhs_core(
        state.u_curr,
        state.psi_tilde,
        state.psi_bar,
        corners,
        st,
        prof.node_sigma(0),
        prof.node_sigma(1),
        st.h,
    )


def aux_rhs_tilde(state, st: Stencil, prof: PMLProfile, alpha: int, k: int) -> np.ndarray:
    """Time derivative of the order-k outward-shift memory field on axis alpha.

    The result is supported on the axis-alpha slab (the layer plus its
    p-node footprint into the physical region, full extent in the other
    axis); outside the slab the field never couples back to u and stays
    zero.
    """
    if alpha not in (0, 1):
        raise ValueError(f"alpha must be 0 or 1, got {alpha}")
    if not 1 <= k <= st.p:
        raise ValueError(f"order k = {k} outside 1..{st.p}")
    _check_state(state, st, prof)
    sig = prof.node_sigma(alpha)
    rhs = _tilde_rhs(state.u_curr, state.psi_tilde[alpha], sig, alpha, k, st.h)
    return rhs * _slab_mask(prof, alpha, st.p)


def aux_rhs_bar(state, st: Stencil, prof: PMLProfile, alpha: int, k: int) -> np.ndarray:
    """Time derivative of the order-k inward-shift memory field on axis alpha."""
    if alpha not in (0, 1):
        raise ValueError(f"alpha must be 0 or 1, got {alpha}")
    if not 1 <= k <= st.p:
        raise ValueError(f"order k = {k} outside 1..{st.p}")
    _check_state(state, st, prof)
    sig = prof.node_sigma(alpha)
    rhs = _bar_rhs(state.u_curr, state.psi_bar[alpha], sig, alpha, k, st.h)
    return rhs * _slab_mask(prof, alpha, st.p)


def corner_rhs(state, st: Stencil, prof: PMLProfile, which: str, k1: int, k2: int) -> np.ndarray:
    """Time derivative of a corner memory field.

    `which` selects the family: the first letter says whether the axis-2
    drive is the outward (T) or inward (B) family, the second letter whether
    the axis-1 shift pattern is outward (T) or inward (B).  All shifts and
    damping weights act along axis 1; the drive replaces u by the order-k2
    axis-2 edge field.  Supported on the corner blocks where the two axis
    slabs intersect.
    """
    if which not in CORNER_KINDS:
        raise ValueError(f"which must be one of {CORNER_KINDS}, got {which!r}")
    if not (1 <= k1 <= st.p and 1 <= k2 <= st.p):
        raise ValueError(f"orders ({k1}, {k2}) outside 1..{st.p}")
    _check_state(state, st, prof)
    drive_fam = state.psi_tilde[1] if which[0] == "T" else state.psi_bar[1]
    drive = drive_fam[k2 - 1]
    fields = getattr(state, f"psi_{which}")
    row = [fields[a][k2 - 1] for a in range(st.p)]
    sig1 = prof.node_sigma(0)
    pattern = _tilde_rhs if which[1] == "T" else _bar_rhs
    rhs = pattern(drive, row, sig1, 0, k1, st.h)
    mask = _slab_mask(prof, 0, st.p) & _slab_mask(prof, 1, st.p)
    return rhs * mask
