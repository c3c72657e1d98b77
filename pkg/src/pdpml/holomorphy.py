"""Discrete complex-analysis verification tools.

Everything here exists to *check* the absorbing-layer construction rather
than to run it: complexified lattice coordinates, damped extensions of plane
waves, discrete Cauchy-Riemann residuals, the shift-identity family that the
layer equations are built from, and a direct frequency-domain substitution
test (build the closed-form damped mode, plug it into the evolution
right-hand sides, measure the residual).

Index conventions.  A 2D window array f[i, j] pairs a spatial index i with a
stretched index j for one axis; the full two-axis extension lives on a 4D
window w[i1, j1, i2, j2].  The shift tau moves i, rho moves j, and the scaled
derivative couples the diagonal (i+1, j+1) to (i, j).  Shifts fill with
zeros, so every residual is evaluated on a window interior that the shifts
cannot pollute.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .pml import (
    CORNER_KINDS,
    PMLProfile,
    WaveMode,
    _bar_rhs,
    _main_rhs_core,
    _step_factor,
    _tilde_rhs,
    shift_along,
)
from .stencil import Stencil, long_wave_speed

PROPOSITION_KINDS = ("TauMinusK", "TauPlusK", "TauD", "TauTau", "TildePsi")


# ----------------------------------------------------------------------------
# window geometry
# ----------------------------------------------------------------------------


def _eta_sequence(size: int, sigma_steps, mode: WaveMode, h: float, axis: int):
    """Cumulative damping factors eta[j] for j = 0..size-1 (eta[0] = 1)."""
    sig = np.asarray(sigma_steps, dtype=float)
    kap = mode.kappa[axis]
    e_plus = cmath.exp(1j * kap * h)
    e_minus = cmath.exp(-1j * kap * h)
    out = np.empty(size, dtype=complex)
    val = 1.0 + 0.0j
    for j in range(size):
        out[j] = val
        if j < size - 1:
            val *= _step_factor(sig[j] / mode.omega, e_plus, e_minus)
    return out


@dataclass(frozen=True)
class StretchedCoordinate:
    """Complexified lattice coordinate for one axis on a square window.

    table[i, j] = (i + j) h + i(h/omega) * (sigma_0 + ... + sigma_{j-1}),
    so the real part walks the physical lattice and the imaginary part
    accumulates the damping crossed so far.  With sigma = 0 the table is
    real, and stepping i always adds exactly h.
    """

    h: float
    omega: float
    sigma: np.ndarray
    size: int
    table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"mesh width h = {self.h} must be positive")
        if self.omega == 0 or not np.isfinite(self.omega):
            raise ValueError(f"omega = {self.omega} must be nonzero and finite")
        if self.size < 2:
            raise ValueError(f"window size {self.size} must be at least 2")
        sig = np.asarray(self.sigma, dtype=float)
        if sig.ndim != 1 or sig.size < self.size - 1:
            raise ValueError(
                f"need at least {self.size - 1} damping values, got {sig.size}"
            )
        if np.any(sig < 0) or not np.all(np.isfinite(sig)):
            raise ValueError("damping values must be finite and nonnegative")
        sig = sig.copy()
        sig.setflags(write=False)
        acc = np.concatenate(([0.0], np.cumsum(sig)))[: self.size]
        idx = np.arange(self.size)
        z = (idx[:, None] + idx[None, :]) * self.h + (
            1j * self.h / self.omega
        ) * acc[None, :]
        z.setflags(write=False)
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "table", z)


@dataclass(frozen=True)
class ExtendedMode:
    """A damped plane wave extended onto a square verification window.

    Along each axis the extension factors as eta(j) * E^(i+j) with
    E = e^{i kappa h} and eta the cumulative damping product; the full
    two-axis field is the outer product of the per-axis factors.  The
    factor tables are built from a single power table indexed by i + j,
    so with sigma = 0 a tau shift and a rho shift of equal order read
    identical entries and the undamped shift identities hold bitwise.
    """

    mode: WaveMode
    h: float
    sigma: tuple
    size: int
    _factors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"mesh width h = {self.h} must be positive")
        if self.size < 2:
            raise ValueError(f"window size {self.size} must be at least 2")
        if len(self.sigma) != 2:
            raise ValueError("sigma must hold one damping sequence per axis")
        sigs = []
        for axis in (0, 1):
            sig = np.asarray(self.sigma[axis], dtype=float)
            if sig.ndim != 1 or sig.size < self.size:
                raise ValueError(
                    f"axis {axis}: need at least {self.size} damping values, "
                    f"got {sig.size}"
                )
            if np.any(sig < 0) or not np.all(np.isfinite(sig)):
                raise ValueError("damping values must be finite and nonnegative")
            sig = sig[: self.size].copy()
            sig.setflags(write=False)
            sigs.append(sig)
        factors = []
        idx = np.add.outer(np.arange(self.size), np.arange(self.size))
        for axis in (0, 1):
            e_step = cmath.exp(1j * self.mode.kappa[axis] * self.h)
            powers = np.power(e_step, np.arange(2 * self.size - 1))
            eta_seq = _eta_sequence(self.size, sigs[axis], self.mode, self.h, axis)
            f = eta_seq[None, :] * powers[idx]
            f.setflags(write=False)
            factors.append(f)
        object.__setattr__(self, "sigma", (sigs[0], sigs[1]))
        object.__setattr__(self, "_factors", tuple(factors))

    def factor(self, axis: int) -> np.ndarray:
        """Per-axis window f[i, j] = eta(j) E^(i+j)."""
        if axis not in (0, 1):
            raise ValueError(f"axis must be 0 or 1, got {axis}")
        return self._factors[axis]

    def full(self) -> np.ndarray:
        """Two-axis field w[i1, j1, i2, j2] = f1[i1, j1] * f2[i2, j2]."""
        f1, f2 = self._factors
        return f1[:, :, None, None] * f2[None, None, :, :]

    @classmethod
    def from_profile(
        cls, mode: WaveMode, prof: PMLProfile, h: float, size: int, interface: int
    ) -> "ExtendedMode":
        """Build with one-sided damping: zero until `interface`, then the
        profile's layer values (deepest value continued past the layer)."""
        sig = tuple(one_sided_damping(prof, axis, size, interface) for axis in (0, 1))
        return cls(mode=mode, h=h, sigma=sig, size=size)


def one_sided_damping(
    prof: PMLProfile, axis: int, size: int, interface: int
) -> np.ndarray:
    """Per-node damping along one axis of a verification window.

    Nodes before `interface` are undamped; from there the profile's layer
    values apply depth by depth, with the deepest value continued if the
    window outruns the layer.
    """
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    out = np.zeros(size)
    vals = prof.sigma[axis]
    if vals.size:
        for j in range(interface, size):
            out[j] = vals[min(j - interface, vals.size - 1)]
    return out


# ----------------------------------------------------------------------------
# shift operators and the scaled derivative
# ----------------------------------------------------------------------------
#
# 2D windows are always (i, j); 4D windows interleave as (i1, j1, i2, j2).
# `alpha` selects the axis pair on 4D input and is ignored for 2D.


def _axis_pair(w: np.ndarray, alpha: int):
    if w.ndim == 2:
        return 0, 1
    if w.ndim == 4:
        return 2 * alpha, 2 * alpha + 1
    raise ValueError(f"expected a 2D or 4D window, got ndim = {w.ndim}")


def _tau(w: np.ndarray, k: int, alpha: int = 0) -> np.ndarray:
    return shift_along(w, k, _axis_pair(w, alpha)[0])


def _rho(w: np.ndarray, k: int, alpha: int = 0) -> np.ndarray:
    return shift_along(w, k, _axis_pair(w, alpha)[1])


def _sig_mul(w: np.ndarray, sig, alpha: int = 0) -> np.ndarray:
    ax = _axis_pair(w, alpha)[1]
    shape = [1] * w.ndim
    shape[ax] = -1
    return w * np.asarray(sig).reshape(shape)


def _deriv(w: np.ndarray, sig, omega: float, h: float, alpha: int = 0) -> np.ndarray:
    """Scaled discrete derivative along one axis pair.

    (D w)[.., i, j, ..] = (w[i+1, j+1] - w[i, j]) / (i omega (2h + i (h/omega) sigma_j)),
    the divided difference across the face diagonal of the stretched
    coordinate.
    """
    ax = _axis_pair(w, alpha)[1]
    den = 1j * omega * (2.0 * h + (1j * h / omega) * np.asarray(sig, dtype=float))
    shape = [1] * w.ndim
    shape[ax] = -1
    return (_tau(_rho(w, 1, alpha), 1, alpha) - w) / den.reshape(shape)


def _rel_residual(lhs: np.ndarray, rhs: np.ndarray, margin: int) -> float:
    """Max |lhs - rhs| over the window interior, relative to the larger side."""
    sl = tuple(slice(margin, n - margin) for n in lhs.shape)
    a = lhs[sl]
    b = rhs[sl]
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


# ----------------------------------------------------------------------------
# Cauchy-Riemann residual
# ----------------------------------------------------------------------------


def cauchy_riemann_residual(
    mode: ExtendedMode, coords: StretchedCoordinate, window: int | None = None,
    axis: int = 0,
) -> float:
    """Discrete holomorphy defect of the extended mode on lattice faces.

    For each unit face the cross-multiplied residual
    (f[i+1,j+1] - f[i,j]) (z[i,j+1] - z[i+1,j])
    - (f[i,j+1] - f[i+1,j]) (z[i+1,j+1] - z[i,j])
    is formed and the maximum is scaled by max|f| * max|dz|.  The
    cross-multiplied form stays meaningful where the damping vanishes and
    one diagonal of z degenerates to zero.
    """
    f = mode.factor(axis)
    z = coords.table
    if coords.omega != mode.mode.omega or coords.h != mode.h:
        raise ValueError("coordinate table and mode disagree on omega or h")
    n = min(f.shape[0], z.shape[0], f.shape[1], z.shape[1])
    if window is not None:
        if window < 2 or window > n:
            raise ValueError(
                f"window = {window} must be between 2 and the stored size {n}"
            )
        n = window
    f = f[:n, :n]
    z = z[:n, :n]
    df_diag = f[1:, 1:] - f[:-1, :-1]
    dz_anti = z[:-1, 1:] - z[1:, :-1]
    df_anti = f[:-1, 1:] - f[1:, :-1]
    dz_diag = z[1:, 1:] - z[:-1, :-1]
    res = np.abs(df_diag * dz_anti - df_anti * dz_diag)
    scale = np.max(np.abs(f)) * max(np.max(np.abs(dz_diag)), np.max(np.abs(dz_anti)))
    if scale == 0.0:
        return 0.0
    return float(np.max(res) / scale)


def commutation_residual(mode: ExtendedMode, k: int = 1) -> float:
    """Residual of D_a (tau_k^b w) = tau_k^b (D_a w) for both axis orderings."""
    w = mode.full()
    om, h = mode.mode.omega, mode.h
    margin = abs(k) + 2
    _require_window(mode.size, margin, f"commutation with shift {k}")
    worst = 0.0
    for a in (0, 1):
        b = 1 - a
        dw = _deriv(w, mode.sigma[a], om, h, a)
        lhs = _deriv(_tau(w, k, b), mode.sigma[a], om, h, a)
        worst = max(worst, _rel_residual(lhs, _tau(dw, k, b), margin))
    return worst


# ----------------------------------------------------------------------------
# shift-identity propositions
# ----------------------------------------------------------------------------
#
# Each builder returns (lhs, rhs) arrays for one identity; the public
# checker crops the shift-polluted rim and reports the relative residual.
# All identities express a tau shift (spatial) through rho shifts
# (stretched) plus damping-weighted correction sums over the scaled
# derivative.


def _tau_minus_sides(w, sig, omega, h, k, alpha=0):
    dw = _deriv(w, sig, omega, h, alpha)
    lhs = _tau(w, -k, alpha)
    rhs = _rho(w, -k, alpha)
    for l in range(1, k + 1):
        g = _sig_mul(_tau(dw, -k + l - 1, alpha), sig, alpha)
        rhs = rhs - h * _rho(g, -l, alpha)
    return lhs, rhs


def _tau_plus_sides(w, sig, omega, h, k, alpha=0):
    dw = _deriv(w, sig, omega, h, alpha)
    lhs = _tau(w, k, alpha)
    rhs = _rho(w, k, alpha)
    for l in range(1, k + 1):
        g = _sig_mul(_tau(dw, k - l, alpha), sig, alpha)
        rhs = rhs + h * _rho(g, l - 1, alpha)
    return lhs, rhs


def _tdw_plus_sides(w, sig, omega, h, k, alpha=0):
    dw = _deriv(w, sig, omega, h, alpha)
    lhs = 1j * omega * _tau(dw, k, alpha)
    rhs = (_rho(w, k + 2, alpha) - _rho(w, k, alpha)) / (2.0 * h)
    g = _sig_mul(_tau(dw, k, alpha), sig, alpha)
    rhs = rhs + 0.5 * (_rho(g, 1, alpha) + g)
    for l in range(1, k + 1):
        g = _sig_mul(_tau(dw, k - l, alpha), sig, alpha)
        rhs = rhs + 0.5 * (_rho(g, l + 1, alpha) - _rho(g, l - 1, alpha))
    return lhs, rhs


def _tdw_minus_sides(w, sig, omega, h, k, alpha=0):
    dw = _deriv(w, sig, omega, h, alpha)
    lhs = 1j * omega * _tau(dw, -k, alpha)
    rhs = (_rho(w, -k + 2, alpha) - _rho(w, -k, alpha)) / (2.0 * h)
    g = _sig_mul(_tau(dw, -k, alpha), sig, alpha)
    rhs = rhs + 0.5 * (_rho(g, -1, alpha) + g)
    for l in range(1, k):
        g = _sig_mul(_tau(dw, -k + l, alpha), sig, alpha)
        rhs = rhs + 0.5 * (_rho(g, -l - 1, alpha) - _rho(g, -l + 1, alpha))
    return lhs, rhs


def _tau_tau_minus_minus_sides(w, sigs, omega, h, k1, k2):
    lhs = _tau(_tau(w, -k1, 0), -k2, 1)
    rhs = _rho(_rho(w, -k1, 0), -k2, 1)
    kk = (k1, k2)
    for a in (0, 1):
        b = 1 - a
        da = _deriv(w, sigs[a], omega, h, a)
        for l in range(1, kk[a] + 1):
            g = _sig_mul(_tau(da, -kk[a] + l - 1, a), sigs[a], a)
            rhs = rhs - h * _rho(_rho(g, -l, a), -kk[b], b)
    d12 = _deriv(_deriv(w, sigs[1], omega, h, 1), sigs[0], omega, h, 0)
    for l in range(1, k1 + 1):
        for m in range(1, k2 + 1):
            g = _tau(_tau(d12, -k1 + l - 1, 0), -k2 + m - 1, 1)
            g = _sig_mul(_sig_mul(g, sigs[0], 0), sigs[1], 1)
            rhs = rhs + h * h * _rho(_rho(g, -l, 0), -m, 1)
    return lhs, rhs


def _tau_tau_plus_plus_sides(w, sigs, omega, h, k1, k2):
    lhs = _tau(_tau(w, k1, 0), k2, 1)
    rhs = _rho(_rho(w, k1, 0), k2, 1)
    kk = (k1, k2)
    for a in (0, 1):
        b = 1 - a
        da = _deriv(w, sigs[a], omega, h, a)
        for l in range(1, kk[a] + 1):
            g = _sig_mul(_tau(da, kk[a] - l, a), sigs[a], a)
            rhs = rhs + h * _rho(_rho(g, l - 1, a), kk[b], b)
    d12 = _deriv(_deriv(w, sigs[1], omega, h, 1), sigs[0], omega, h, 0)
    for l in range(1, k1 + 1):
        for m in range(1, k2 + 1):
            g = _tau(_tau(d12, k1 - l, 0), k2 - m, 1)
            g = _sig_mul(_sig_mul(g, sigs[0], 0), sigs[1], 1)
            rhs = rhs + h * h * _rho(_rho(g, l - 1, 0), m - 1, 1)
    return lhs, rhs


def _tau_tau_minus_plus_sides(w, sigs, omega, h, k1, k2):
    lhs = _tau(_tau(w, -k1, 0), k2, 1)
    rhs = _rho(_rho(w, -k1, 0), k2, 1)
    d1 = _deriv(w, sigs[0], omega, h, 0)
    for l in range(1, k1 + 1):
        g = _sig_mul(_tau(d1, -k1 + l - 1, 0), sigs[0], 0)
        rhs = rhs - h * _rho(_rho(g, -l, 0), k2, 1)
    d2 = _deriv(w, sigs[1], omega, h, 1)
    for m in range(1, k2 + 1):
        g = _sig_mul(_tau(d2, k2 - m, 1), sigs[1], 1)
        rhs = rhs + h * _rho(_rho(g, m - 1, 1), -k1, 0)
    d12 = _deriv(d2, sigs[0], omega, h, 0)
    for l in range(1, k1 + 1):
        for m in range(1, k2 + 1):
            g = _tau(_tau(d12, -k1 + l - 1, 0), k2 - m, 1)
            g = _sig_mul(_sig_mul(g, sigs[0], 0), sigs[1], 1)
            rhs = rhs - h * h * _rho(_rho(g, -l, 0), m - 1, 1)
    return lhs, rhs


def _require_window(size: int, margin: int, what: str) -> None:
    if size - 2 * margin < 2:
        raise ValueError(
            f"window of {size} nodes per axis is too small for {what}; "
            f"need at least {2 * margin + 2}"
        )


def _check_coords(mode: ExtendedMode, coords: StretchedCoordinate, axis: int) -> None:
    if coords.omega != mode.mode.omega or coords.h != mode.h:
        raise ValueError("coordinate table and mode disagree on omega or h")
    n = min(coords.sigma.size, mode.sigma[axis].size)
    if not np.array_equal(coords.sigma[:n], mode.sigma[axis][:n]):
        raise ValueError(
            "coordinate table and mode were built with different damping"
        )


def proposition_identity_check(
    mode: ExtendedMode,
    coords: StretchedCoordinate,
    which: str,
    k: int = 1,
    k1: int | None = None,
    k2: int | None = None,
    axis: int = 0,
) -> float:
    """Max relative residual of one family of shift identities.

    which selects the identity: "TauMinusK" / "TauPlusK" move a spatial
    shift of order k across the window using first-derivative corrections;
    "TauD" applies the same pair to a cross-axis derivative field; "TauTau"
    checks the three two-axis compositions of orders (k1, k2); "TildePsi"
    relates shifted derivatives to centered stretched differences, in both
    shift directions.

    Raises ValueError when the window cannot absorb the requested shifts.
    """
    if which not in PROPOSITION_KINDS:
        raise ValueError(
            f"unknown identity {which!r}; expected one of {PROPOSITION_KINDS}"
        )
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    _check_coords(mode, coords, axis)
    om, h = mode.mode.omega, mode.h
    if which == "TauTau":
        ka = k if k1 is None else k1
        kb = k if k2 is None else k2
        if ka < 1 or kb < 1:
            raise ValueError(f"shift orders ({ka}, {kb}) must be >= 1")
        margin = max(ka, kb) + 3
        _require_window(mode.size, margin, f"two-axis shifts of order ({ka}, {kb})")
        w = mode.full()
        worst = 0.0
        for sides in (
            _tau_tau_minus_minus_sides,
            _tau_tau_plus_plus_sides,
            _tau_tau_minus_plus_sides,
        ):
            lhs, rhs = sides(w, mode.sigma, om, h, ka, kb)
            worst = max(worst, _rel_residual(lhs, rhs, margin))
        return worst
    if k < 1 and which != "TildePsi":
        raise ValueError(f"shift order k = {k} must be >= 1")
    if k < 0:
        raise ValueError(f"shift order k = {k} must be >= 0")
    margin = k + 3
    _require_window(mode.size, margin, f"shifts of order {k}")
    if which in ("TauMinusK", "TauPlusK"):
        f = mode.factor(axis)
        sig = mode.sigma[axis]
        sides = _tau_minus_sides if which == "TauMinusK" else _tau_plus_sides
        lhs, rhs = sides(f, sig, om, h, k)
        return _rel_residual(lhs, rhs, margin)
    if which == "TauD":
        w = mode.full()
        worst = 0.0
        for a in (0, 1):
            b = 1 - a
            g = _deriv(w, mode.sigma[b], om, h, b)
            for sides in (_tau_minus_sides, _tau_plus_sides):
                lhs, rhs = sides(g, mode.sigma[a], om, h, k, a)
                worst = max(worst, _rel_residual(lhs, rhs, margin))
        return worst
    # TildePsi: forward shift for any k >= 0, backward only for k >= 1.
    f = mode.factor(axis)
    sig = mode.sigma[axis]
    lhs, rhs = _tdw_plus_sides(f, sig, om, h, k)
    worst = _rel_residual(lhs, rhs, margin)
    if k >= 1:
        lhs, rhs = _tdw_minus_sides(f, sig, om, h, k)
        worst = max(worst, _rel_residual(lhs, rhs, margin))
    return worst


# ----------------------------------------------------------------------------
# modes on the discrete dispersion manifold
# ----------------------------------------------------------------------------


def _dispersion_complex(st: Stencil, kap1: complex, kap2: complex):
    """omega^2(kappa) for complex wave numbers, with d/dkappa1."""
    val = 0.0 + 0.0j
    der = 0.0 + 0.0j
    for k1, k2 in st.offsets():
        if (k1, k2) == (0, 0):
            continue
        a = st.a[st.p + k1, st.p + k2]
        if a == 0.0:
            continue
        ph = (kap1 * k1 + kap2 * k2) * st.h
        val += a * (1.0 - cmath.cos(ph))
        der += a * (k1 * st.h) * cmath.sin(ph)
    return val, der


def propagating_mode(st: Stencil, kappa) -> WaveMode:
    """The mode with real wave vector kappa and its lattice frequency."""
    val, _ = _dispersion_complex(st, complex(kappa[0]).real, complex(kappa[1]).real)
    om2 = val.real
    if om2 <= 0.0:
        raise ValueError(f"kappa = {tuple(kappa)} carries no oscillation")
    return WaveMode(math.sqrt(om2), (complex(kappa[0]).real, complex(kappa[1]).real))


def mode_on_manifold(
    st: Stencil,
    omega: float,
    kappa2: float,
    tol: float = 1e-12,
    max_iter: int = 80,
) -> WaveMode:
    """Solve the lattice dispersion relation for kappa1 given omega, kappa2.

    Newton iteration on the complex dispersion relation, started from the
    long-wave guess kappa1^2 = omega^2/c^2 - kappa2^2.  When the guess is
    negative the root is evanescent and the branch decaying outward
    (Im kappa1 < 0) is returned; real roots are oriented along the sign
    of omega.
    """
    om2 = float(omega) ** 2
    if om2 == 0.0 or not np.isfinite(om2):
        raise ValueError(f"omega = {omega} must be nonzero and finite")
    c = long_wave_speed(st)
    disc = om2 / (c * c) - float(kappa2) ** 2
    kap1 = complex(math.sqrt(disc)) if disc >= 0 else -1j * math.sqrt(-disc)
    for _ in range(max_iter):
        val, der = _dispersion_complex(st, kap1, complex(kappa2))
        f = val - om2
        if abs(f) <= tol * max(1.0, om2):
            break
        if der == 0:
            kap1 += 0.01
            continue
        kap1 -= f / der
    else:
        raise RuntimeError(
            f"dispersion solve did not converge for omega = {omega}, "
            f"kappa2 = {kappa2}"
        )
    if abs(kap1.imag) <= 1e-13 * max(1.0, abs(kap1.real)):
        kap1 = complex(math.copysign(abs(kap1.real), omega), 0.0)
    elif kap1.imag > 0:
        kap1 = -kap1
    return WaveMode(float(omega), (kap1, complex(float(kappa2), 0.0)))


# ----------------------------------------------------------------------------
# frequency-domain substitution test
# ----------------------------------------------------------------------------


def extended_state(mode: WaveMode, sig1, sig2, st: Stencil, window: int):
    """Closed-form frequency-domain state of the damped system on a window.

    Returns (u, tilde, bar, corners) shaped like the evolution code expects:
    u[window, window] complex, tilde/bar as [axis][k-1] lists, corners as a
    dict over the four corner kinds of [k1-1][k2-1] nested lists.  Each
    memory field is a fixed spatial shift of the scaled derivative of u,
    which for the damped exponential mode collapses to per-node scalar
    multiples of u itself.
    """
    p = st.p
    h = st.h
    om = mode.omega
    sig1 = np.asarray(sig1, dtype=float)
    sig2 = np.asarray(sig2, dtype=float)
    if sig1.size < window or sig2.size < window:
        raise ValueError(f"damping sequences must cover all {window} nodes")
    e_step = [cmath.exp(1j * mode.kappa[a] * h) for a in (0, 1)]
    node = []
    for a, sig in ((0, sig1), (1, sig2)):
        eta_seq = _eta_sequence(window, sig, mode, h, axis=a)
        node.append(eta_seq * np.power(e_step[a], np.arange(window)))
    u = np.multiply.outer(node[0], node[1])
    ratio = []
    for a, sig in ((0, sig1), (1, sig2)):
        ee = e_step[a]
        den = 1j * om * h * (2.0 + 1j * (sig[:window] / om) * (1.0 - ee))
        if np.any(den == 0):
            raise ZeroDivisionError(
                "derivative scale is singular: 2 + i(sigma/omega)(1 - e^{i kappa h}) "
                "vanished at some node"
            )
        ratio.append((ee * ee - 1.0) / den)
    shape = [(window, 1), (1, window)]
    tilde = [
        [
            u * (e_step[a] ** (k - 1) * ratio[a]).reshape(shape[a])
            for k in range(1, p + 1)
        ]
        for a in (0, 1)
    ]
    bar = [
        [u * (e_step[a] ** (-k) * ratio[a]).reshape(shape[a]) for k in range(1, p + 1)]
        for a in (0, 1)
    ]
    cfact = np.multiply.outer(ratio[0], ratio[1]) * u
    corners = {}
    for kind in CORNER_KINDS:
        rows = []
        for k1 in range(1, p + 1):
            e1 = k1 - 1 if kind[1] == "T" else -k1
            row = []
            for k2 in range(1, p + 1):
                e2 = k2 - 1 if kind[0] == "T" else -k2
                row.append(cfact * (e_step[0] ** e1 * e_step[1] ** e2))
            rows.append(row)
        corners[kind] = rows
    return u, tilde, bar, corners


def theorem_residual(
    mode: WaveMode, prof: PMLProfile, st: Stencil, window: int | None = None
) -> float:
    """Residual of the closed-form damped mode in the full evolution system.

    Builds the frequency-domain state on a window whose second half is
    damped by the profile (one-sided entry into the layer), substitutes it
    into every evolution right-hand side with time differentiation mapped
    to multiplication by -i omega, and returns the worst relative residual
    over the interior of the window.

    The mode must satisfy the lattice dispersion relation; off-manifold
    modes are rejected.
    """
    p = st.p
    if window is None:
        window = 4 * p + 10
    margin = p + 2
    _require_window(window, margin, f"an order-{p} layer system")
    mode.check_brillouin(st.h)
    val, _ = _dispersion_complex(st, mode.kappa[0], mode.kappa[1])
    om2 = mode.omega**2
    if abs(val - om2) > 1e-8 * max(1.0, om2):
        raise ValueError(
            "mode is off the dispersion manifold: omega^2(kappa) = "
            f"{val}, but omega^2 = {om2}"
        )
    interface = window // 2
    sig1 = one_sided_damping(prof, 0, window, interface)
    sig2 = one_sided_damping(prof, 1, window, interface)
    u, tilde, bar, corners = extended_state(mode, sig1, sig2, st, window)
    om = mode.omega
    h = st.h
    worst = 0.0
    sigs = (sig1, sig2)
    for a in (0, 1):
        sig = sigs[a]
        for k in range(1, p + 1):
            rhs = _tilde_rhs(u, tilde[a], sig, a, k, h)
            worst = max(worst, _rel_residual(-1j * om * tilde[a][k - 1], rhs, margin))
            rhs = _bar_rhs(u, bar[a], sig, a, k, h)
            worst = max(worst, _rel_residual(-1j * om * bar[a][k - 1], rhs, margin))
    for kind in CORNER_KINDS:
        fields = corners[kind]
        pattern = _tilde_rhs if kind[1] == "T" else _bar_rhs
        for k2 in range(1, p + 1):
            drive = tilde[1][k2 - 1] if kind[0] == "T" else bar[1][k2 - 1]
            row = [fields[m - 1][k2 - 1] for m in range(1, p + 1)]
            for k1 in range(1, p + 1):
                rhs = pattern(drive, row, sig1, 0, k1, h)
                worst = max(
                    worst,
                    _rel_residual(-1j * om * fields[k1 - 1][k2 - 1], rhs, margin),
                )
    rhs = _main_rhs_core(u, tilde, bar, corners, st, sig1, sig2, h)
    worst = max(worst, _rel_residual(-om2 * u, rhs, margin))
    return worst


def write_verification_report(path, rows) -> None:
    """Write residual records as CSV: one row per (check, omega, kappa, residual)."""
    lines = ["check,omega,kappa1_re,kappa1_im,kappa2_re,kappa2_im,residual\n"]
    for check, omega, kappa, residual in rows:
        c1 = complex(kappa[0])
        c2 = complex(kappa[1])
        lines.append(
            f"{check},{float(omega)!r},{c1.real!r},{c1.imag!r},"
            f"{c2.real!r},{c2.imag!r},{float(residual)!r}\n"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)
