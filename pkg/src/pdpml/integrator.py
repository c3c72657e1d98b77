"""Simulation state and the explicit staggered time stepper.

The displacement field u leapfrogs at integer time levels; the memory
fields of the absorbing layer live at half levels and are advanced with the
midpoint field values.  Updates sweep each family in ascending order so the
triangular history sums read the freshest already-updated lower orders,
while each field's own damping term stays explicit.  With the default
damping strength sigma0 ~ 2/h and dt = h/32 the explicit treatment is
comfortably inside the stability region.

All update arithmetic uses fixed numpy expression order, so trajectories
are bit-reproducible across runs and thread counts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .pml import (
    CORNER_KINDS,
    PMLProfile,
    aux_rhs_bar,
    aux_rhs_tilde,
    build_profile,
    corner_rhs,
    main_rhs,
)
from .stencil import (
    GridConfig,
    KernelSpec,
    Stencil,
    apply_stencil,
    cfl_dt_limit,
    compute_stencil,
)


class InstabilityError(RuntimeError):
    """The time stepper produced non-finite values."""


# ----------------------------------------------------------------------------
# state
# ----------------------------------------------------------------------------


@dataclass
class PMLState:
    """Everything the stepper carries between time levels.

    u_prev and u_curr are the displacement at the two newest integer time
    levels; the psi fields are the layer memories at the newest half level.
    Edge families are indexed [axis][k-1], corner families [k1-1][k2-1].
    Arrays are treated as immutable: step() allocates fresh buffers and the
    lists may share arrays with older states.
    """

    u_prev: np.ndarray
    u_curr: np.ndarray
    psi_tilde: list
    psi_bar: list
    psi_TT: list
    psi_TB: list
    psi_BT: list
    psi_BB: list
    t: float

    def corner(self, kind: str) -> list:
        if kind not in CORNER_KINDS:
            raise ValueError(f"kind must be one of {CORNER_KINDS}, got {kind!r}")
        return getattr(self, "psi_" + kind)


def zero_state(grid: GridConfig, t: float = 0.0) -> PMLState:
    """All-zero state sized for the grid (order p from the grid)."""
    n = grid.n_nodes
    p = grid.p

    def zeros():
        return np.zeros((n, n))

    return PMLState(
        u_prev=zeros(),
        u_curr=zeros(),
        psi_tilde=[[zeros() for _ in range(p)] for _ in range(2)],
        psi_bar=[[zeros() for _ in range(p)] for _ in range(2)],
        psi_TT=[[zeros() for _ in range(p)] for _ in range(p)],
        psi_TB=[[zeros() for _ in range(p)] for _ in range(p)],
        psi_BT=[[zeros() for _ in range(p)] for _ in range(p)],
        psi_BB=[[zeros() for _ in range(p)] for _ in range(p)],
        t=t,
    )


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialCondition:
    """Initial displacement (initial velocity is always zero).

    kind "gaussian_pulse" samples amplitude * exp(-width |x|^2) at the
    nodes; "custom" uses a tabulated field, stored as nested tuples so
    configs stay comparable and hashable.
    """

    kind: str = "gaussian_pulse"
    amplitude: float = 1.0
    width: float = 40.0
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian_pulse", "custom"):
            raise ValueError(f"unknown initial condition kind {self.kind!r}")
        if self.kind == "gaussian_pulse":
            if not (np.isfinite(self.amplitude) and np.isfinite(self.width)):
                raise ValueError("pulse amplitude and width must be finite")
            if self.width < 0:
                raise ValueError(f"pulse width {self.width} must be >= 0")
        elif self.values is None:
            raise ValueError("custom initial condition needs tabulated values")

    @classmethod
    def custom(cls, values) -> "InitialCondition":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise ValueError("tabulated initial field must be 2D")
        return cls(kind="custom", values=tuple(map(tuple, arr.tolist())))

    def sample(self, grid: GridConfig) -> np.ndarray:
        """Nodal values on the full (physical + layer) grid."""
        n = grid.n_nodes
        if self.kind == "custom":
            arr = np.array(self.values, dtype=float)
            if arr.shape != (n, n):
                raise ValueError(
                    f"tabulated field has shape {arr.shape}, grid needs {(n, n)}"
                )
            return arr
        x = np.arange(-grid.n_total, grid.n_total + 1) * grid.h
        r2 = np.add.outer(x * x, x * x)
        return self.amplitude * np.exp(-self.width * r2)


@dataclass(frozen=True)
class OutputSpec:
    """What run() records: snapshot cadence/times and probe points.

    snapshot_every counts steps (0 disables); snapshot_times are physical
    times, each mapped to the nearest step.  The final state is always
    captured.  Probes are (x, y) coordinates mapped to the nearest node and
    sampled every step.
    """

    snapshot_every: int = 0
    snapshot_times: tuple = ()
    probes: tuple = ()

    def __post_init__(self):
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")
        object.__setattr__(
            self, "snapshot_times", tuple(float(t) for t in self.snapshot_times)
        )
        for t in self.snapshot_times:
            if t < 0 or not np.isfinite(t):
                raise ValueError(f"snapshot time {t} must be finite and >= 0")
        object.__setattr__(
            self,
            "probes",
            tuple((float(x), float(y)) for x, y in self.probes),
        )


@dataclass(frozen=True)
class SimulationConfig:
    """Full description of one simulation."""

    grid: GridConfig
    kernel: KernelSpec
    profile: PMLProfile
    dt: float
    t_final: float
    initial: InitialCondition = InitialCondition()
    output: OutputSpec = OutputSpec()
    quad_order: int = 8
    strict_cfl: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt = {self.dt} must be positive and finite")
        if not (self.t_final >= 0 and np.isfinite(self.t_final)):
            raise ValueError(f"t_final = {self.t_final} must be >= 0 and finite")
        if self.profile.n != self.grid.n or self.profile.n_p != self.grid.n_p:
            raise ValueError(
                f"profile covers n = {self.profile.n}, n_p = {self.profile.n_p} "
                f"but the grid has n = {self.grid.n}, n_p = {self.grid.n_p}"
            )


def check_cfl(cfg: SimulationConfig, st: Stencil) -> float:
    """Warn about (or, with strict_cfl, reject) time steps over the CFL bound.

    Returns the bound so callers can report it.
    """
    limit = cfl_dt_limit(st)
    if cfg.dt > limit:
        msg = f"dt = {cfg.dt} exceeds the stability bound {limit}"
        if cfg.strict_cfl:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
    return limit


def init_state(cfg: SimulationConfig, st: Stencil | None = None) -> PMLState:
    """State at t = 0: sampled initial field, Taylor-started previous level.

    Zero initial velocity makes the backward level
    u_prev = u_curr + (dt^2 / 2) L u_curr second-order accurate.  All
    memory fields start at zero (the initial data lives in the undamped
    region).
    """
    if st is None:
        st = compute_stencil(cfg.kernel, cfg.grid, cfg.quad_order)
    check_cfl(cfg, st)
    state = zero_state(cfg.grid)
    u0 = cfg.initial.sample(cfg.grid)
    state.u_curr = u0
    state.u_prev = u0 + (0.5 * cfg.dt * cfg.dt) * apply_stencil(u0, st)
    return state


# ----------------------------------------------------------------------------
# stepping
# ----------------------------------------------------------------------------


def _centered(old_rows, new_rows) -> list:
    return [
        [0.5 * (a + b) for a, b in zip(old_row, new_row)]
        for old_row, new_row in zip(old_rows, new_rows)
    ]


def step(
    state: PMLState,
    st: Stencil,
    prof: PMLProfile,
    dt: float,
    step_index: int | None = None,
) -> PMLState:
    """Advance one time step, returning a fresh state.

    Memory fields move from the previous half level to the next using the
    current u; the displacement then leapfrogs with the time-centered
    memory average.  With a zero profile the memory fields are untouched
    (they influence nothing and stay exactly zero when started at zero)
    and the update reduces to plain Verlet on the discrete wave equation.

    Raises InstabilityError when the new displacement contains non-finite
    values.
    """
    u = state.u_curr
    if prof.is_zero:
        u_next = 2.0 * u - state.u_prev + (dt * dt) * apply_stencil(u, st)
        new = PMLState(
            u_prev=u,
            u_curr=u_next,
            psi_tilde=state.psi_tilde,
            psi_bar=state.psi_bar,
            psi_TT=state.psi_TT,
            psi_TB=state.psi_TB,
            psi_BT=state.psi_BT,
            psi_BB=state.psi_BB,
            t=state.t + dt,
        )
    else:
        p = st.p
        work = SimpleNamespace(
            u_curr=u,
            psi_tilde=[list(state.psi_tilde[0]), list(state.psi_tilde[1])],
            psi_bar=[list(state.psi_bar[0]), list(state.psi_bar[1])],
            psi_TT=state.psi_TT,
            psi_TB=state.psi_TB,
            psi_BT=state.psi_BT,
            psi_BB=state.psi_BB,
        )
        # edge families, ascending k: the history terms read the entries this
        # sweep has already replaced, the self term reads the old half level
        for axis in (0, 1):
            for k in range(1, p + 1):
                rhs = aux_rhs_tilde(work, st, prof, axis, k)
                work.psi_tilde[axis][k - 1] = (
                    work.psi_tilde[axis][k - 1] + dt * rhs
                )
            for k in range(1, p + 1):
                rhs = aux_rhs_bar(work, st, prof, axis, k)
                work.psi_bar[axis][k - 1] = work.psi_bar[axis][k - 1] + dt * rhs
        # corner families: driven by the axis-2 edge fields, which straddle
        # this half step, so the drive is their time-centered average
        drive_view = SimpleNamespace(
            u_curr=u,
            psi_tilde=[
                work.psi_tilde[0],
                _centered([state.psi_tilde[1]], [work.psi_tilde[1]])[0],
            ],
            psi_bar=[
                work.psi_bar[0],
                _centered([state.psi_bar[1]], [work.psi_bar[1]])[0],
            ],
            psi_TT=None,
            psi_TB=None,
            psi_BT=None,
            psi_BB=None,
        )
        for kind in CORNER_KINDS:
            old_rows = state.corner(kind)
            working = [list(row) for row in old_rows]
            for k in CORNER_KINDS:
                setattr(drive_view, "psi_" + k, state.corner(k))
            setattr(drive_view, "psi_" + kind, working)
            for k2 in range(1, p + 1):
                for k1 in range(1, p + 1):
                    rhs = corner_rhs(drive_view, st, prof, kind, k1, k2)
                    working[k1 - 1][k2 - 1] = (
                        working[k1 - 1][k2 - 1] + dt * rhs
                    )
            setattr(work, "psi_" + kind, working)
        # displacement leapfrog with time-centered memory fields
        mid = SimpleNamespace(
            u_curr=u,
            psi_tilde=[
                _centered([state.psi_tilde[a]], [work.psi_tilde[a]])[0]
                for a in (0, 1)
            ],
            psi_bar=[
                _centered([state.psi_bar[a]], [work.psi_bar[a]])[0]
                for a in (0, 1)
            ],
        )
        for kind in CORNER_KINDS:
            setattr(
                mid,
                "psi_" + kind,
                _centered(state.corner(kind), getattr(work, "psi_" + kind)),
            )
        u_next = 2.0 * u - state.u_prev + (dt * dt) * main_rhs(mid, st, prof)
        new = PMLState(
            u_prev=u,
            u_curr=u_next,
            psi_tilde=work.psi_tilde,
            psi_bar=work.psi_bar,
            psi_TT=work.psi_TT,
            psi_TB=work.psi_TB,
            psi_BT=work.psi_BT,
            psi_BB=work.psi_BB,
            t=state.t + dt,
        )
    if not np.all(np.isfinite(new.u_curr)):
        where = "" if step_index is None else f" at step {step_index}"
        raise InstabilityError(
            f"non-finite displacement values{where} (t = {new.t})"
        )
    return new


# ----------------------------------------------------------------------------
# runs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSnapshot:
    """Copy of the displacement field at one time level."""

    t: float
    step_index: int
    u: np.ndarray


@dataclass(frozen=True)
class ProbeTrace:
    """Displacement history at one node, sampled every step."""

    x: tuple
    node: tuple
    values: np.ndarray


@dataclass(frozen=True)
class RunResult:
    snapshots: tuple
    times: np.ndarray
    probes: tuple
    n_steps: int


def _probe_nodes(output: OutputSpec, grid: GridConfig):
    nodes = []
    for x, y in output.probes:
        i1 = round(x / grid.h)
        i2 = round(y / grid.h)
        if max(abs(i1), abs(i2)) > grid.n_total:
            raise ValueError(f"probe at ({x}, {y}) lies outside the grid")
        nodes.append((i1, i2))
    return nodes


def run(cfg: SimulationConfig, st: Stencil | None = None, observer=None) -> RunResult:
    """Step from t = 0 to t_final, recording snapshots and probe traces.

    The number of steps is ceil(t_final / dt) up to round-off, so a
    t_final of zero takes no steps and yields exactly one snapshot (the
    initial state).  `observer(old_state, new_state, step_index)`, when
    given, is called after every step; diagnostics hook in there.
    """
    if st is None:
        st = compute_stencil(cfg.kernel, cfg.grid, cfg.quad_order)
    state = init_state(cfg, st)
    n_steps = max(0, math.ceil(cfg.t_final / cfg.dt - 1e-9))
    capture = {n_steps}
    if cfg.output.snapshot_every > 0:
        capture.update(range(0, n_steps + 1, cfg.output.snapshot_every))
    for t_want in cfg.output.snapshot_times:
        capture.add(min(n_steps, round(t_want / cfg.dt)))
    nodes = _probe_nodes(cfg.output, cfg.grid)
    offset = cfg.grid.n_total
    traces = [np.empty(n_steps + 1) for _ in nodes]
    for trace, (i1, i2) in zip(traces, nodes):
        trace[0] = state.u_curr[offset + i1, offset + i2]
    snapshots = []
    if 0 in capture:
        snapshots.append(FieldSnapshot(t=0.0, step_index=0, u=state.u_curr.copy()))
    prof = cfg.profile
    for n in range(1, n_steps + 1):
        new = step(state, st, prof, cfg.dt, step_index=n)
        for trace, (i1, i2) in zip(traces, nodes):
            trace[n] = new.u_curr[offset + i1, offset + i2]
        if n in capture:
            # n * dt, not the accumulated state.t: snapshot stamps must land
            # exactly on the configured times when dt divides them
            snapshots.append(
                FieldSnapshot(t=n * cfg.dt, step_index=n, u=new.u_curr.copy())
            )
        if observer is not None:
            observer(state, new, n)
        state = new
    times = np.arange(n_steps + 1) * cfg.dt
    probes = tuple(
        ProbeTrace(x=xy, node=nd, values=tr)
        for xy, nd, tr in zip(cfg.output.probes, nodes, traces)
    )
    return RunResult(
        snapshots=tuple(snapshots), times=times, probes=probes, n_steps=n_steps
    )


# ----------------------------------------------------------------------------
# on-disk formats
# ----------------------------------------------------------------------------


def write_snapshot(path, snap: FieldSnapshot, grid: GridConfig) -> None:
    """Text dump: header `nx ny h t`, then one grid row per line.

    Values are shortest round-trip decimals; each line walks the second
    index, matching the flattened ordering used everywhere else.
    """
    n = grid.n_nodes
    if snap.u.shape != (n, n):
        raise ValueError(f"snapshot shape {snap.u.shape} does not fit the grid")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{n} {n} {grid.h!r} {snap.t!r}\n")
        for row in snap.u:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_snapshot(path):
    """Inverse of write_snapshot: returns (u, h, t)."""
    with open(path, "r", encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 4:
            raise ValueError(f"malformed snapshot header in {path}")
        nx, ny = int(head[0]), int(head[1])
        h, t = float(head[2]), float(head[3])
        u = np.loadtxt(fh, ndmin=2)
    if u.shape != (nx, ny):
        raise ValueError(
            f"snapshot body has shape {u.shape}, header promised {(nx, ny)}"
        )
    return u, h, t


def write_probe_csv(path, times, trace: ProbeTrace) -> None:
    """Probe history as CSV rows t,u."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,u\n")
        for t, v in zip(times, trace.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
