"""Reference solutions and measurement: reflection, energy, convergence, scans.

Everything here is a pure function of completed runs: an enlarged-domain
reference oracle with a group-speed admissibility check, reflection and
error norms over the physical region, the discrete energy, mesh-refinement
studies against a fine reference, and damping-strength scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pdpml.integrator import (
    InitialCondition,
    OutputSpec,
    SimulationConfig,
    init_state,
    step,
)
from pdpml.pml import WaveMode, build_profile, decay_rate_mu
from pdpml.stencil import (
    GridConfig,
    Stencil,
    apply_stencil,
    compute_stencil,
    dispersion_omega2,
    group_speed_max,
)

# ----------------------------------------------------------------------------
# restricted trajectories and the enlarged reference
# ----------------------------------------------------------------------------


def _n_steps(cfg: SimulationConfig) -> int:
    return max(0, math.ceil(cfg.t_final / cfg.dt - 1e-9))


def _run_restricted(cfg, st, n_keep, every):
    """March cfg and keep copies of u on |i_alpha| <= n_keep.

    Snapshots are kept at step 0, every `every`-th step, and the final
    step; returns (times, stack) with stack shaped (n_kept, m, m).
    """
    state = init_state(cfg, st)
    n_steps = _n_steps(cfg)
    c = cfg.grid.n_total
    if n_keep > c:
        raise ValueError(
            f"restriction half-width {n_keep} exceeds the stored grid ({c})"
        )
    sl = slice(c - n_keep, c + n_keep + 1)
    kept = [state.u_curr[sl, sl].copy()]
    kept_steps = [0]
    for i in range(1, n_steps + 1):
        state = step(state, st, cfg.profile, cfg.dt, step_index=i)
        if i % every == 0 or i == n_steps:
            kept.append(state.u_curr[sl, sl].copy())
            kept_steps.append(i)
    return np.array(kept_steps, dtype=float) * cfg.dt, np.array(kept)


def restricted_trace(cfg: SimulationConfig, st: Stencil | None = None, every: int = 1):
    """Run cfg and return (times, u over the physical region) per kept step."""
    if st is None:
        st = compute_stencil(cfg.kernel, cfg.grid, cfg.quad_order)
    return _run_restricted(cfg, st, cfg.grid.n, every)


def min_enlargement(st: Stencil, grid: GridConfig, t_final: float) -> int:
    """Smallest integer factor keeping the far boundary causally silent.

    The fastest wave packet travels at the maximal group speed, so the far
    boundary stays untouched while (factor - 1) * n * h >= v_max * t_final.
    """
    length = grid.n * grid.h
    v = group_speed_max(st)
    return max(2, math.ceil(1.0 + v * t_final / length - 1e-12))


def solve_reference(
    cfg: SimulationConfig,
    enlargement: int = 4,
    every: int = 1,
    st: Stencil | None = None,
):
    """Plain (undamped, unlayered) solve on an enlarged domain.

    The domain half-width is multiplied by `enlargement` and the layer is
    dropped; the hard Dirichlet boundary is then too far away to influence
    the physical region before t_final, which is checked against the
    maximal group speed.  Returns (times, u restricted to the physical
    region of cfg.grid).
    """
    if int(enlargement) != enlargement or enlargement < 2:
        raise ValueError(f"enlargement factor {enlargement} must be an integer >= 2")
    if st is None:
        st = compute_stencil(cfg.kernel, cfg.grid, cfg.quad_order)
    needed = min_enlargement(st, cfg.grid, cfg.t_final)
    if enlargement < needed:
        raise ValueError(
            f"enlargement {enlargement} lets waves reach the far boundary "
            f"before t = {cfg.t_final}; need at least {needed}"
        )
    big_grid = GridConfig(
        h=cfg.grid.h, n=int(enlargement) * cfg.grid.n, n_p=0, p=cfg.grid.p
    )
    initial = cfg.initial
    if initial.kind == "custom":
        # tabulated data lives on the truncated grid; extend it by zero
        small = initial.sample(cfg.grid)
        big = np.zeros((big_grid.n_nodes, big_grid.n_nodes))
        lo = big_grid.n_total - cfg.grid.n_total
        big[lo : lo + small.shape[0], lo : lo + small.shape[1]] = small
        initial = InitialCondition.custom(big)
    big_cfg = SimulationConfig(
        grid=big_grid,
        kernel=cfg.kernel,
        profile=build_profile(big_grid, 0.0),
        dt=cfg.dt,
        t_final=cfg.t_final,
        initial=initial,
        output=OutputSpec(),
        quad_order=cfg.quad_order,
    )
    return _run_restricted(big_cfg, st, cfg.grid.n, every)


# ----------------------------------------------------------------------------
# reflection measurement
# ----------------------------------------------------------------------------


def reflection_trace(times, trace, ref_times, ref_trace) -> np.ndarray:
    """max_i |u - u_ref| over the physical region, one value per time."""
    trace = np.asarray(trace)
    ref_trace = np.asarray(ref_trace)
    if trace.shape != ref_trace.shape:
        raise ValueError(
            f"trajectory shapes differ: {trace.shape} vs {ref_trace.shape}"
        )
    times = np.asarray(times, dtype=float)
    ref_times = np.asarray(ref_times, dtype=float)
    if times.shape != ref_times.shape or not np.allclose(
        times, ref_times, rtol=0.0, atol=1e-12
    ):
        raise ValueError("snapshot times do not match between run and reference")
    return np.max(np.abs(trace - ref_trace), axis=(1, 2))


def reflection_error(times, trace, ref_times, ref_trace) -> float:
    """max over time of the per-time reflection trace."""
    return float(np.max(reflection_trace(times, trace, ref_times, ref_trace)))


def measured_reflections(
    cfg: SimulationConfig,
    sigma_values,
    enlargement: int = 4,
    every: int = 1,
    st: Stencil | None = None,
):
    """Reflection error per damping amplitude, against one shared reference.

    Reuses cfg's grid/kernel/time/initial data and rebuilds the profile for
    each sigma0; returns a list of (sigma0, reflection_error) pairs.
    """
    if st is None:
        st = compute_stencil(cfg.kernel, cfg.grid, cfg.quad_order)
    ref_times, ref = solve_reference(cfg, enlargement, every, st)
    out = []
    for sigma0 in sigma_values:
        run_cfg = SimulationConfig(
            grid=cfg.grid,
            kernel=cfg.kernel,
            profile=build_profile(cfg.grid, float(sigma0)),
            dt=cfg.dt,
            t_final=cfg.t_final,
            initial=cfg.initial,
            output=OutputSpec(),
            quad_order=cfg.quad_order,
        )
        times, trace = restricted_trace(run_cfg, st, every)
        out.append((float(sigma0), reflection_error(times, trace, ref_times, ref)))
    return out


# ----------------------------------------------------------------------------
# discrete energy
# ----------------------------------------------------------------------------


def interaction_reach(st: Stencil) -> int:
    """Largest per-axis offset with a nonzero coupling weight."""
    reach = 0
    for k1, k2 in st.offsets():
        if (k1, k2) != (0, 0) and st.a[st.p + k1, st.p + k2] != 0.0:
            reach = max(reach, abs(k1), abs(k2))
    return reach


def energy(u_prev, u_curr, u_next, st: Stencil, grid: GridConfig, dt: float) -> float:
    """Discrete energy from three consecutive displacement levels.

    Averages the squared centered velocity over the physical region and the
    squared operator image over the physical nodes whose whole interaction
    neighborhood is physical, each normalized by its node count.
    """
    n, c = grid.n, grid.n_total
    shape = (grid.n_nodes, grid.n_nodes)
    for arr in (u_prev, u_curr, u_next):
        if arr.shape != shape:
            raise ValueError(f"field shape {arr.shape} does not match grid {shape}")
    b = n - interaction_reach(st)
    if b < 0:
        raise ValueError(
            f"physical half-width {n} is smaller than the interaction reach "
            f"{interaction_reach(st)}; the operator-energy node set is empty"
        )
    sl = slice(c - n, c + n + 1)
    v = (u_next[sl, sl] - u_prev[sl, sl]) / (2.0 * dt)
    lu = apply_stencil(u_curr, st)[c - b : c + b + 1, c - b : c + b + 1]
    n_omega = (2 * n + 1) ** 2
    n_delta = (2 * b + 1) ** 2
    return 0.5 * float(np.sum(v * v)) / n_omega + 0.5 * float(
        np.sum(lu * lu)
    ) / n_delta


def energy_trace(cfg: SimulationConfig, st: Stencil | None = None, every: int = 1):
    """March cfg and evaluate the energy at every `every`-th time level.

    The energy at level n needs u at levels n-1, n, n+1, so the trace
    covers t_0 .. t_{N-1}; the level-0 entry uses the Taylor-started
    backward level.  Returns (times, energies).
    """
    if st is None:
        st = compute_stencil(cfg.kernel, cfg.grid, cfg.quad_order)
    state = init_state(cfg, st)
    n_steps = _n_steps(cfg)
    times, values = [], []
    for i in range(1, n_steps + 1):
        new = step(state, st, cfg.profile, cfg.dt, step_index=i)
        level = i - 1
        if level % every == 0 or level == n_steps - 1:
            times.append(level * cfg.dt)
            values.append(
                energy(state.u_prev, state.u_curr, new.u_curr, st, cfg.grid, cfg.dt)
            )
        state = new
    return np.array(times), np.array(values)


# ----------------------------------------------------------------------------
# convergence study
# ----------------------------------------------------------------------------


def _nested_ratio(h: float, h_ref: float) -> int:
    ratio = h / h_ref
    r = round(ratio)
    if r < 1 or abs(ratio - r) > 1e-9 * r or (r & (r - 1)) != 0:
        raise ValueError(
            f"mesh h = {h} is not nested in the reference mesh h = {h_ref} "
            "(the ratio must be a power of two)"
        )
    return r


def injection_error(u, h, u_ref, h_ref):
    """(l2, max) error between origin-centered squares on nested meshes.

    The coarse field is compared at coincident nodes of the fine field
    (nodal injection, no interpolation); the l2 norm carries the mesh
    factor h so values are comparable across resolutions.
    """
    u = np.asarray(u)
    u_ref = np.asarray(u_ref)
    r = _nested_ratio(h, h_ref)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] % 2 == 0:
        raise ValueError(f"field shape {u.shape} is not an odd centered square")
    nc = (u.shape[0] - 1) // 2
    nf = (u_ref.shape[0] - 1) // 2
    if nc * r > nf:
        raise ValueError(
            f"reference region ({nf} nodes half-width) does not cover the "
            f"coarse region ({nc} nodes at ratio {r})"
        )
    idx = np.arange(-nc, nc + 1) * r + nf
    diff = u - u_ref[np.ix_(idx, idx)]
    err_max = float(np.max(np.abs(diff)))
    err_l2 = float(h * math.sqrt(np.sum(diff * diff)))
    return err_l2, err_max


def fit_slope(hs, errs) -> float:
    """Least-squares slope of log err against log h."""
    return float(np.polyfit(np.log(np.asarray(hs)), np.log(np.asarray(errs)), 1)[0])


@dataclass(frozen=True)
class ConvergenceTable:
    """(h, err_l2, err_max) rows; slopes only when three or more meshes."""

    rows: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "rows", tuple((float(a), float(b), float(c)) for a, b, c in self.rows)
        )
        for _, e2, em in self.rows:
            if e2 < 0 or em < 0:
                raise ValueError("error norms must be nonnegative")

    @property
    def slope_l2(self):
        if len(self.rows) < 3:
            return None
        return fit_slope([r[0] for r in self.rows], [r[1] for r in self.rows])

    @property
    def slope_max(self):
        if len(self.rows) < 3:
            return None
        return fit_slope([r[0] for r in self.rows], [r[2] for r in self.rows])


def convergence_study(
    kernel,
    sigma0_scale: float = 2.0,
    meshes=(1.0 / 8, 1.0 / 16, 1.0 / 32),
    t_eval: float = 1.5,
    h_ref: float = 1.0 / 64,
    n_p: int = 4,
    dt_scale: float = 1.0 / 32,
    enlargement: int = 3,
    quad_order: int = 8,
    progress=None,
) -> ConvergenceTable:
    """Layer runs on the unit box vs one fine enlarged reference at t_eval.

    Each mesh h gets a damped run with sigma0 = sigma0_scale / h and
    dt = dt_scale * h; the reference is a plain enlarged-domain solve at
    h_ref compared by nodal injection.  `progress(label)` is called before
    each solve so long studies can report.
    """
    meshes = tuple(float(h) for h in meshes)
    if not meshes:
        raise ValueError("need at least one study mesh")
    if h_ref >= min(meshes):
        raise ValueError(
            f"reference mesh h = {h_ref} must be finer than every study mesh"
        )
    for h in meshes:
        _nested_ratio(h, h_ref)
        if abs(h * round(1.0 / h) - 1.0) > 1e-9:
            raise ValueError(f"mesh h = {h} does not tile the unit half-width")
    steps = t_eval / (dt_scale * h_ref)
    if abs(steps - round(steps)) > 1e-6:
        raise ValueError(
            f"t_eval = {t_eval} is not a whole number of reference steps"
        )

    def pulse_cfg(h, n_layer, sigma0):
        n = round(1.0 / h)
        grid = GridConfig.for_kernel(kernel, h, n, n_layer)
        return SimulationConfig(
            grid=grid,
            kernel=kernel,
            profile=build_profile(grid, sigma0),
            dt=dt_scale * h,
            t_final=t_eval,
            quad_order=quad_order,
        )

    if progress is not None:
        progress(f"reference h = {h_ref}")
    ref_cfg = pulse_cfg(h_ref, 0, 0.0)
    ref_st = compute_stencil(kernel, ref_cfg.grid, quad_order)
    _, ref = solve_reference(ref_cfg, enlargement, _n_steps(ref_cfg), ref_st)
    u_ref = ref[-1]

    rows = []
    for h in meshes:
        if progress is not None:
            progress(f"damped run h = {h}")
        cfg = pulse_cfg(h, n_p, sigma0_scale / h)
        st = compute_stencil(kernel, cfg.grid, quad_order)
        _, trace = _run_restricted(cfg, st, cfg.grid.n, _n_steps(cfg))
        rows.append((h, *injection_error(trace[-1], h, u_ref, h_ref)))
    return ConvergenceTable(rows=tuple(rows))


# ----------------------------------------------------------------------------
# damping-strength scans
# ----------------------------------------------------------------------------


def sigma_scan(st: Stencil, sigma_values, kappa_values, reflections=None):
    """Tabulate |mu| per (sigma0, kappa), optionally with measured reflection.

    kappa_values holds (kappa1, kappa2) pairs; each must be oscillatory
    (omega(kappa) > 0).  `reflections`, when given, maps sigma0 to a
    measured reflection error; rows carry NaN where no measurement exists.
    Returns rows (sigma0, kappa1, kappa2, abs_mu, reflection).
    """
    if len(sigma_values) == 0 or len(kappa_values) == 0:
        raise ValueError("sigma and kappa sample lists must be nonempty")
    rows = []
    for sigma0 in sigma_values:
        s0 = float(sigma0)
        refl = float("nan")
        if reflections is not None:
            refl = float(reflections.get(s0, float("nan")))
        for kap1, kap2 in kappa_values:
            w2 = dispersion_omega2(st, (kap1, kap2))
            if w2 <= 0.0:
                raise ValueError(
                    f"kappa = ({kap1}, {kap2}) does not oscillate; no decay "
                    "rate is defined there"
                )
            mode = WaveMode(omega=math.sqrt(w2), kappa=(kap1, kap2))
            mu = decay_rate_mu(mode, s0, st.h)
            rows.append((s0, float(kap1), float(kap2), abs(mu), refl))
    return rows


# ----------------------------------------------------------------------------
# report container
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsReport:
    """Aggregate of the measurements a run produced; fields are optional."""

    reflection_max: float | None = None
    error_l2: float | None = None
    error_max: float | None = None
    energy_trace: tuple | None = None
    convergence_table: ConvergenceTable | None = None

    def __post_init__(self):
        for name in ("reflection_max", "error_l2", "error_max"):
            val = getattr(self, name)
            if val is not None and not (val >= 0):
                raise ValueError(f"{name} = {val} must be nonnegative")
        if self.energy_trace is not None:
            trace = tuple((float(t), float(e)) for t, e in self.energy_trace)
            for _, e in trace:
                if not (e >= 0):
                    raise ValueError(f"energy {e} must be nonnegative")
            object.__setattr__(self, "energy_trace", trace)


# ----------------------------------------------------------------------------
# CSV outputs
# ----------------------------------------------------------------------------


def write_sigma_scan_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sigma0,kappa1,kappa2,abs_mu,reflection\n")
        for s0, k1, k2, mu, refl in rows:
            fh.write(f"{s0!r},{k1!r},{k2!r},{mu!r},{refl!r}\n")


def write_convergence_csv(path, table: ConvergenceTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("h,err_l2,err_max\n")
        for h, e2, em in table.rows:
            fh.write(f"{h!r},{e2!r},{em!r}\n")


def write_energy_csv(path, times, values) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,E\n")
        for t, e in zip(times, values):
            fh.write(f"{float(t)!r},{float(e)!r}\n")


def write_reflection_csv(path, times, trace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,max_abs_diff\n")
        for t, d in zip(times, trace):
            fh.write(f"{float(t)!r},{float(d)!r}\n")
