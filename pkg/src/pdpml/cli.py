"""Command-line front end: config files, subcommands, run manifests.

Configs are plain text, one `key = value` per line under `[section]`
headers (kernel / grid / pml / time / initial / output).  Everything has
a default except the kernel family and the mesh width, so a minimal file
is three lines.  Every subcommand reads one config, writes its data
files into --out, and leaves a manifest.json describing what was
produced and how long each phase took.

Data outputs (CSV, field dumps) are byte-deterministic: running the
same command on the same config twice yields identical files.  The
manifest and bench.csv contain wall-clock timings and are exempt.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    convergence_study,
    energy_trace,
    measured_reflections,
    min_enlargement,
    reflection_trace,
    restricted_trace,
    sigma_scan,
    solve_reference,
    write_convergence_csv,
    write_energy_csv,
    write_reflection_csv,
    write_sigma_scan_csv,
)
from .holomorphy import (
    PROPOSITION_KINDS,
    ExtendedMode,
    StretchedCoordinate,
    cauchy_riemann_residual,
    commutation_residual,
    mode_on_manifold,
    propagating_mode,
    proposition_identity_check,
    theorem_residual,
    write_verification_report,
)
from .integrator import (
    FieldSnapshot,
    InitialCondition,
    InstabilityError,
    OutputSpec,
    SimulationConfig,
    init_state,
    run,
    step,
    write_probe_csv,
    write_snapshot,
)
from .pml import build_profile
from .stencil import GridConfig, KernelSpec, cfl_dt_limit, compute_stencil, write_stencil_csv


class ConfigError(ValueError):
    """A config file could not be understood; the message names the spot."""


# ----------------------------------------------------------------------------
# config format
# ----------------------------------------------------------------------------

_SECTION_KEYS = {
    "kernel": ("family", "epsilon", "delta", "s", "gamma_bar", "amplitude",
               "cutoff", "quad_order"),
    "grid": ("h", "n", "n_p"),
    "pml": ("sigma0",),
    "time": ("dt", "t_final", "strict_cfl"),
    "initial": ("amplitude", "width"),
    "output": ("snapshot_every", "snapshot_times", "probes"),
}

_REQUIRED = object()


def _read_sections(text: str) -> dict:
    """Split config text into {section: {key: (raw value, line number)}}.

    `#` starts a comment; blank lines are skipped.  Unknown sections and
    keys, duplicate keys, and assignments outside a section are rejected
    with the offending line number.
    """
    sections: dict = {}
    current = None
    name = None
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTION_KEYS:
                known = ", ".join(_SECTION_KEYS)
                raise ConfigError(
                    f"unknown section [{name}] on line {num}; expected one of {known}"
                )
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {num} is not a `key = value` assignment: {line!r}"
            )
        if current is None:
            raise ConfigError(f"line {num} sets a key before any [section] header")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _SECTION_KEYS[name]:
            raise ConfigError(f"unknown key {name}.{key} on line {num}")
        if key in current:
            raise ConfigError(f"duplicate key {name}.{key} on line {num}")
        current[key] = (value.strip(), num)
    return sections


def _conv_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _conv_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"{text!r} is not an integer") from None


def _conv_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{text!r} is not a boolean (use true or false)")


def _conv_floats(text: str) -> tuple:
    parts = [p for chunk in text.split(",") for p in chunk.split()]
    return tuple(_conv_float(p) for p in parts)


def _conv_pairs(text: str) -> tuple:
    """Semicolon-separated `x y` pairs, e.g. `0.5 0.5; -0.25 0`."""
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{chunk!r} is not an `x y` pair")
        out.append((_conv_float(parts[0]), _conv_float(parts[1])))
    return tuple(out)


def _conv_word(text: str) -> str:
    return text.lower()


def _take(sections, sec, key, conv, default=_REQUIRED):
    entry = sections.get(sec, {}).get(key)
    if entry is None:
        if default is _REQUIRED:
            raise ConfigError(f"missing required key {sec}.{key}")
        return default
    value, num = entry
    try:
        return conv(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {sec}.{key} on line {num}: {exc}") from None


def _reject(sections, sec, keys, family):
    for key in keys:
        entry = sections.get(sec, {}).get(key)
        if entry is not None:
            raise ConfigError(
                f"key {sec}.{key} on line {entry[1]} does not apply to a "
                f"{family} kernel"
            )


def _build_kernel(sections) -> KernelSpec:
    family = _take(sections, "kernel", "family", _conv_word)
    if family == "gaussian":
        _reject(sections, "kernel", ("delta", "s", "gamma_bar", "amplitude"), family)
        epsilon = _take(sections, "kernel", "epsilon", _conv_float)
        cutoff = _take(sections, "kernel", "cutoff", _conv_float, 1e-7)
        return KernelSpec.gaussian(epsilon, cutoff=cutoff)
    if family == "heaviside_over_r2":
        _reject(sections, "kernel",
                ("epsilon", "s", "gamma_bar", "amplitude", "cutoff"), family)
        delta = _take(sections, "kernel", "delta", _conv_float)
        return KernelSpec.heaviside_over_r2(delta)
    if family == "bounded_singular":
        _reject(sections, "kernel", ("cutoff",), family)
        delta = _take(sections, "kernel", "delta", _conv_float)
        s = _take(sections, "kernel", "s", _conv_float)
        gamma_bar = _take(sections, "kernel", "gamma_bar", _conv_word, "heaviside")
        amplitude = _take(sections, "kernel", "amplitude", _conv_float, 1.0)
        epsilon = _take(sections, "kernel", "epsilon", _conv_float, None)
        return KernelSpec.bounded_singular(
            delta, s, gamma_bar=gamma_bar, amplitude=amplitude, epsilon=epsilon
        )
    num = sections["kernel"]["family"][1]
    raise ConfigError(
        f"unknown kernel family {family!r} on line {num}; expected gaussian, "
        f"bounded_singular or heaviside_over_r2"
    )


def _materialize(sections) -> SimulationConfig:
    try:
        kernel = _build_kernel(sections)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[kernel] {exc}") from None
    quad_order = _take(sections, "kernel", "quad_order", _conv_int, 8)

    h = _take(sections, "grid", "h", _conv_float)
    if h <= 0:
        raise ConfigError(f"grid.h = {h} must be positive")
    n = _take(sections, "grid", "n", _conv_int, round(1.0 / h))
    n_p = _take(sections, "grid", "n_p", _conv_int, 4)
    try:
        grid = GridConfig.for_kernel(kernel, h, n, n_p)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None

    sigma0 = _take(sections, "pml", "sigma0", _conv_float, 2.0 / h)
    try:
        profile = build_profile(grid, sigma0)
    except ValueError as exc:
        raise ConfigError(f"[pml] {exc}") from None

    dt = _take(sections, "time", "dt", _conv_float, h / 32.0)
    t_final = _take(sections, "time", "t_final", _conv_float, 2.0)
    strict_cfl = _take(sections, "time", "strict_cfl", _conv_bool, False)

    amplitude = _take(sections, "initial", "amplitude", _conv_float, 1.0)
    width = _take(sections, "initial", "width", _conv_float, 40.0)

    snapshot_every = _take(sections, "output", "snapshot_every", _conv_int, 0)
    snapshot_times = _take(sections, "output", "snapshot_times", _conv_floats, ())
    probes = _take(sections, "output", "probes", _conv_pairs, ())

    try:
        return SimulationConfig(
            grid=grid,
            kernel=kernel,
            profile=profile,
            dt=dt,
            t_final=t_final,
            initial=InitialCondition(
                kind="gaussian_pulse", amplitude=amplitude, width=width
            ),
            output=OutputSpec(
                snapshot_every=snapshot_every,
                snapshot_times=snapshot_times,
                probes=probes,
            ),
            quad_order=quad_order,
            strict_cfl=strict_cfl,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path) -> SimulationConfig:
    """Read a sectioned key = value file into a full simulation config.

    Only kernel.family and grid.h (plus the family's shape parameters)
    are required; everything else defaults to the standard experiment:
    n = 1/h physical nodes per half-axis, a 4-node layer, sigma0 = 2/h,
    dt = h/32, t_final = 2, a unit Gaussian pulse, and no output capture.
    Malformed files raise ConfigError naming the key and line.
    """
    text = Path(path).read_text(encoding="utf-8")
    return _materialize(_read_sections(text))


def resolved_config(cfg: SimulationConfig) -> dict:
    """The config as {section: {key: value}} with all defaults filled in.

    This is the canonical form echoed into manifests and written back by
    serialize_config.  Only pulse initial data is expressible; tabulated
    fields are rejected.
    """
    k = cfg.kernel
    kernel: dict = {"family": k.family}
    if k.family == "gaussian":
        kernel["epsilon"] = k.epsilon
        kernel["cutoff"] = k.cutoff
    elif k.family == "heaviside_over_r2":
        kernel["delta"] = k.delta
    else:
        kernel["delta"] = k.delta
        kernel["s"] = k.s
        kernel["gamma_bar"] = k.gamma_bar
        kernel["amplitude"] = k.amplitude
        if k.epsilon is not None:
            kernel["epsilon"] = k.epsilon
    kernel["quad_order"] = cfg.quad_order
    if cfg.initial.kind != "gaussian_pulse":
        raise ValueError("only gaussian_pulse initial data fits the config format")
    prof = cfg.profile
    sigma0 = float(prof.sigma[0, 0]) if prof.sigma.size else 0.0
    return {
        "kernel": kernel,
        "grid": {"h": cfg.grid.h, "n": cfg.grid.n, "n_p": cfg.grid.n_p},
        "pml": {"sigma0": sigma0},
        "time": {
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "strict_cfl": cfg.strict_cfl,
        },
        "initial": {
            "amplitude": cfg.initial.amplitude,
            "width": cfg.initial.width,
        },
        "output": {
            "snapshot_every": cfg.output.snapshot_every,
            "snapshot_times": cfg.output.snapshot_times,
            "probes": cfg.output.probes,
        },
    }


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return value
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(f"{x!r} {y!r}" for x, y in value)
        return ", ".join(repr(float(v)) for v in value)
    raise TypeError(f"cannot format {value!r} for a config file")


def serialize_config(cfg: SimulationConfig) -> str:
    """Render a config back to text; parsing the result reproduces cfg.

    Floats are written as shortest round-trip decimals, so the identity
    parse(serialize(parse(text))) == parse(text) holds exactly.
    """
    lines = []
    for sec, keys in resolved_config(cfg).items():
        lines.append(f"[{sec}]")
        for key, value in keys.items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


# ----------------------------------------------------------------------------
# run manifests
# ----------------------------------------------------------------------------


class RunManifest:
    """manifest.json next to the outputs: config echo, timings, inventory.

    Written once up front with status "running" so a crash leaves a
    readable record, then rewritten as phases finish and finalized with
    "complete" or "failed".  Timings are wall-clock and therefore the
    one part of a run that is not byte-reproducible.
    """

    def __init__(self, path, command: str, config: dict, threads: int):
        self.path = Path(path)
        self._t0 = time.monotonic()
        self.data = {
            "tool": "pdpml",
            "version": __version__,
            "command": command,
            "status": "running",
            "threads": threads,
            "config": config,
            "timings_ms": {},
            "outputs": [],
            "notes": {},
        }
        self.flush()

    def flush(self) -> None:
        text = json.dumps(self.data, indent=2, sort_keys=True)
        self.path.write_text(text + "\n", encoding="utf-8")

    @contextmanager
    def phase(self, name: str):
        start = time.monotonic()
        yield
        self.data["timings_ms"][name] = round((time.monotonic() - start) * 1e3, 3)
        self.flush()

    def add_output(self, path) -> None:
        self.data["outputs"].append(Path(path).name)

    def note(self, key: str, value) -> None:
        self.data["notes"][key] = value

    def finalize(self, status: str) -> None:
        self.data["status"] = status
        self.data["timings_ms"]["total"] = round(
            (time.monotonic() - self._t0) * 1e3, 3
        )
        self.data["outputs"].sort()
        self.flush()


# ----------------------------------------------------------------------------
# shared output helpers
# ----------------------------------------------------------------------------


def _dump_field(out, stem, snap, grid, binary, manifest) -> None:
    """One field dump: text `.dat`, or `--binary` raw `.bin` + `.hdr`.

    The binary form is the grid row-major as little-endian float64; the
    sidecar header repeats the text dump's `nx ny h t` line.
    """
    if binary:
        n = grid.n_nodes
        if snap.u.shape != (n, n):
            raise ValueError(f"snapshot shape {snap.u.shape} does not fit the grid")
        data_path = out / f"{stem}.bin"
        data_path.write_bytes(np.ascontiguousarray(snap.u, dtype="<f8").tobytes())
        header_path = out / f"{stem}.hdr"
        header_path.write_text(
            f"{n} {n} {grid.h!r} {snap.t!r}\n", encoding="utf-8", newline="\n"
        )
        manifest.add_output(data_path)
        manifest.add_output(header_path)
    else:
        path = out / f"{stem}.dat"
        write_snapshot(path, snap, grid)
        manifest.add_output(path)


def _n_steps(cfg: SimulationConfig) -> int:
    return max(0, math.ceil(cfg.t_final / cfg.dt - 1e-9))


def _wanted_steps(cfg: SimulationConfig) -> list:
    """Step indices worth dumping: configured snapshot times plus t_final."""
    n_steps = _n_steps(cfg)
    wanted = {n_steps}
    for t_want in cfg.output.snapshot_times:
        wanted.add(min(n_steps, round(t_want / cfg.dt)))
    return sorted(wanted)


def _auto_enlargement(args, cfg, st) -> int:
    if args.enlargement > 0:
        return args.enlargement
    return min_enlargement(st, cfg.grid, cfg.t_final)


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def _cmd_stencil(args, cfg, st, out, manifest) -> None:
    path = out / "stencil.csv"
    with manifest.phase("write"):
        write_stencil_csv(st, path)
    manifest.add_output(path)
    nonzero = int(np.count_nonzero(st.a))
    manifest.note("p", st.p)
    manifest.note("nonzero_weights", nonzero)
    manifest.note("cfl_dt_limit", cfl_dt_limit(st))
    print(f"stencil: order {st.p}, {nonzero} nonzero weights -> {path}")


def _cmd_run(args, cfg, st, out, manifest) -> None:
    with manifest.phase("march"):
        result = run(cfg, st)
    with manifest.phase("write"):
        for snap in result.snapshots:
            _dump_field(out, f"snapshot_t{snap.t!r}", snap, cfg.grid,
                        args.binary, manifest)
        for i, probe in enumerate(result.probes):
            path = out / f"probe_{i}.csv"
            write_probe_csv(path, result.times, probe)
            manifest.add_output(path)
    manifest.note("n_steps", result.n_steps)
    print(
        f"run: {result.n_steps} steps, {len(result.snapshots)} snapshots, "
        f"{len(result.probes)} probes -> {out}"
    )


def _cmd_reference(args, cfg, st, out, manifest) -> None:
    enlargement = _auto_enlargement(args, cfg, st)
    wanted = _wanted_steps(cfg)
    # keep only the steps being dumped: their gcd is a valid stride
    nonzero = [w for w in wanted if w > 0]
    every = math.gcd(*nonzero) if nonzero else 1
    with manifest.phase("reference"):
        times, fields = solve_reference(cfg, enlargement, every=every, st=st)
    small = GridConfig(h=cfg.grid.h, n=cfg.grid.n, n_p=0, p=cfg.grid.p)
    with manifest.phase("write"):
        for w in wanted:
            idx = int(
                np.nonzero(np.isclose(times, w * cfg.dt, rtol=0.0, atol=1e-12))[0][0]
            )
            snap = FieldSnapshot(t=w * cfg.dt, step_index=w, u=fields[idx])
            _dump_field(out, f"reference_t{snap.t!r}", snap, small,
                        args.binary, manifest)
    manifest.note("enlargement", enlargement)
    print(f"reference: enlargement {enlargement}, {len(wanted)} dumps -> {out}")


def _cmd_compare(args, cfg, st, out, manifest) -> None:
    enlargement = _auto_enlargement(args, cfg, st)
    with manifest.phase("damped_run"):
        times, trace = restricted_trace(cfg, st, every=args.every)
    with manifest.phase("reference"):
        ref_times, ref = solve_reference(cfg, enlargement, every=args.every, st=st)
    diff = reflection_trace(times, trace, ref_times, ref)
    path = out / "reflection.csv"
    with manifest.phase("write"):
        write_reflection_csv(path, times, diff)
    manifest.add_output(path)
    err = float(diff.max())
    manifest.note("enlargement", enlargement)
    manifest.note("reflection_error", err)
    print(f"compare: max reflection {err:.6e} -> {path}")


def _cmd_scan_sigma(args, cfg, st, out, manifest) -> None:
    h = cfg.grid.h
    sigmas = args.sigmas if args.sigmas else [x / h for x in (0.5, 1.0, 2.0, 4.0, 8.0)]
    if args.kappa:
        kappas = [tuple(pair) for pair in args.kappa]
    else:
        band = math.pi / h
        kappas = [(f * band, 0.5 * f * band) for f in (0.2, 0.4, 0.6)]
    reflections = None
    if args.measure:
        enlargement = _auto_enlargement(args, cfg, st)
        manifest.note("enlargement", enlargement)
        with manifest.phase("measure"):
            reflections = dict(
                measured_reflections(
                    cfg, sigmas, enlargement=enlargement, every=args.every, st=st
                )
            )
    with manifest.phase("scan"):
        rows = sigma_scan(st, sigmas, kappas, reflections=reflections)
    path = out / "sigma_scan.csv"
    write_sigma_scan_csv(path, rows)
    manifest.add_output(path)
    print(f"scan-sigma: {len(rows)} rows ({len(sigmas)} damping values) -> {path}")


def _cmd_convergence(args, cfg, st, out, manifest) -> None:
    def progress(label):
        print(f"convergence: {label}", file=sys.stderr)

    with manifest.phase("study"):
        table = convergence_study(
            cfg.kernel,
            sigma0_scale=args.sigma_scale,
            meshes=tuple(args.meshes),
            t_eval=args.t_eval,
            h_ref=args.h_ref,
            n_p=cfg.grid.n_p,
            dt_scale=cfg.dt / cfg.grid.h,
            enlargement=args.enlargement if args.enlargement > 0 else 3,
            quad_order=cfg.quad_order,
            progress=progress,
        )
    path = out / "convergence.csv"
    write_convergence_csv(path, table)
    manifest.add_output(path)
    manifest.note("slope_l2", table.slope_l2)
    manifest.note("slope_max", table.slope_max)
    print(
        f"convergence: slope_l2 = {table.slope_l2}, slope_max = {table.slope_max} "
        f"-> {path}"
    )


def _cmd_energy(args, cfg, st, out, manifest) -> None:
    with manifest.phase("trace"):
        times, values = energy_trace(cfg, st, every=args.every)
    path = out / "energy.csv"
    write_energy_csv(path, times, values)
    manifest.add_output(path)
    manifest.note("initial_energy", float(values[0]))
    manifest.note("max_energy", float(values.max()))
    print(
        f"energy: initial {values[0]:.6e}, max {values.max():.6e} over "
        f"{len(values)} levels -> {path}"
    )


def _cmd_verify(args, cfg, st, out, manifest) -> None:
    """Residual report: holomorphy, shift identities, and the closed form.

    Modes are drawn from a fixed seed so the report is reproducible;
    window damping is scaled by the config's sigma0, so an undamped
    config yields all-zero residuals.
    """
    h = cfg.grid.h
    prof = cfg.profile
    sigma0 = float(prof.sigma[0, 0]) if prof.sigma.size else 0.0
    band = math.pi / h
    size = args.window
    rng = np.random.default_rng(args.seed)
    rows = []
    with manifest.phase("identities"):
        for _ in range(args.samples):
            kap = tuple(
                float(s * (0.15 + 0.7 * rng.random()) * band)
                for s in rng.choice([-1.0, 1.0], 2)
            )
            mode = propagating_mode(st, kap)
            sig = tuple(sigma0 * rng.random(size) for _ in range(2))
            em = ExtendedMode(mode=mode, h=h, sigma=sig, size=size)
            co = StretchedCoordinate(h=h, omega=mode.omega, sigma=sig[0], size=size)
            rows.append(
                ("cauchy_riemann", mode.omega, kap, cauchy_riemann_residual(em, co))
            )
            rows.append(("commutation", mode.omega, kap, commutation_residual(em)))
            for which in PROPOSITION_KINDS:
                res = proposition_identity_check(em, co, which, k=2)
                rows.append((which, mode.omega, kap, res))
    with manifest.phase("closed_form"):
        for _ in range(max(1, args.samples // 4)):
            omega = float(rng.choice([-1.0, 1.0])) * (0.5 + rng.random())
            kap2 = float((0.1 + 0.3 * rng.random()) * band)
            mode = mode_on_manifold(st, omega, kap2)
            rows.append(
                ("theorem", mode.omega, mode.kappa, theorem_residual(mode, prof, st))
            )
    path = out / "verification.csv"
    write_verification_report(path, rows)
    manifest.add_output(path)
    worst = max(r[-1] for r in rows)
    manifest.note("max_residual", worst)
    print(f"verify: {len(rows)} checks, max residual {worst:.6e} -> {path}")
    if worst > args.tol:
        raise ValueError(
            f"verification residual {worst} exceeds the tolerance {args.tol}"
        )


def _cmd_bench(args, cfg, st, out, manifest) -> None:
    """Time the damped stepper alone; assembly and output are excluded."""
    state = init_state(cfg, st)
    prof = cfg.profile
    index = 0
    for _ in range(args.warmup):
        index += 1
        state = step(state, st, prof, cfg.dt, step_index=index)
    start = time.perf_counter()
    with manifest.phase("steps"):
        for _ in range(args.steps):
            index += 1
            state = step(state, st, prof, cfg.dt, step_index=index)
    elapsed = time.perf_counter() - start
    per_step = elapsed / max(1, args.steps)
    path = out / "bench.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric,value\n")
        fh.write(f"steps,{args.steps}\n")
        fh.write(f"seconds,{elapsed!r}\n")
        fh.write(f"ms_per_step,{per_step * 1e3!r}\n")
        fh.write(f"nodes,{cfg.grid.n_nodes ** 2}\n")
        fh.write(f"nonzero_weights,{int(np.count_nonzero(st.a))}\n")
    manifest.add_output(path)
    manifest.note("ms_per_step", per_step * 1e3)
    print(f"bench: {args.steps} steps, {per_step * 1e3:.3f} ms/step -> {path}")


# ----------------------------------------------------------------------------
# argument parsing and dispatch
# ----------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdpml",
        description="Nonlocal wave simulator with an absorbing layer: "
        "run experiments described by a small config file.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path,
                        help="path to the config file")
    common.add_argument("--out", type=Path, default=Path("."),
                        help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="recorded in the manifest; summation order is "
                        "fixed, so results never depend on it")
    common.add_argument("--strict-cfl", action="store_true",
                        help="reject dt above the stability bound instead of warning")
    common.add_argument("--binary", action="store_true",
                        help="write field dumps as raw little-endian float64 "
                        "with a text sidecar header")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stencil", parents=[common],
                       help="assemble the difference stencil and dump its weights")
    p.set_defaults(func=_cmd_stencil)

    p = sub.add_parser("run", parents=[common],
                       help="march the damped problem, dumping snapshots and probes")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("reference", parents=[common],
                       help="undamped enlarged-domain solve restricted to the "
                       "physical region")
    p.add_argument("--enlargement", type=int, default=0,
                   help="domain enlargement factor (default: smallest safe)")
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("compare", parents=[common],
                       help="reflection history: damped run vs enlarged reference")
    p.add_argument("--enlargement", type=int, default=0,
                   help="domain enlargement factor (default: smallest safe)")
    p.add_argument("--every", type=int, default=1,
                   help="compare every k-th step")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("scan-sigma", parents=[common],
                       help="per-step decay factors over damping strengths")
    p.add_argument("--sigmas", type=float, nargs="+", default=None,
                   help="damping strengths (default: 0.5/h 1/h 2/h 4/h 8/h)")
    p.add_argument("--kappa", type=float, nargs=2, action="append", default=None,
                   metavar=("K1", "K2"),
                   help="wave vector to score; repeatable")
    p.add_argument("--measure", action="store_true",
                   help="also measure reflections by running each damping value")
    p.add_argument("--enlargement", type=int, default=0,
                   help="enlargement for --measure references")
    p.add_argument("--every", type=int, default=4,
                   help="--measure comparison stride")
    p.set_defaults(func=_cmd_scan_sigma)

    p = sub.add_parser("convergence", parents=[common],
                       help="mesh refinement against a fine enlarged reference")
    p.add_argument("--meshes", type=float, nargs="+",
                   default=[1.0 / 8, 1.0 / 16, 1.0 / 32],
                   help="study mesh widths")
    p.add_argument("--h-ref", type=float, default=1.0 / 64,
                   help="reference mesh width")
    p.add_argument("--t-eval", type=float, default=1.5,
                   help="comparison time")
    p.add_argument("--sigma-scale", type=float, default=2.0,
                   help="damping is sigma-scale / h on each mesh")
    p.add_argument("--enlargement", type=int, default=0,
                   help="reference enlargement factor (default 3)")
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("energy", parents=[common],
                       help="discrete energy history of the damped run")
    p.add_argument("--every", type=int, default=1,
                   help="evaluate every k-th time level")
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser("verify", parents=[common],
                       help="residuals of the structural identities behind the layer")
    p.add_argument("--samples", type=int, default=12,
                   help="number of randomly drawn modes")
    p.add_argument("--window", type=int, default=16,
                   help="verification window size")
    p.add_argument("--seed", type=int, default=20260819,
                   help="mode sampling seed")
    p.add_argument("--tol", type=float, default=1e-8,
                   help="fail when any residual exceeds this")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("bench", parents=[common],
                       help="wall-clock time per damped step")
    p.add_argument("--steps", type=int, default=200,
                   help="timed step count")
    p.add_argument("--warmup", type=int, default=3,
                   help="untimed steps before the clock starts")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    """Entry point: parse, dispatch, and report via exit status.

    0 means every requested output was written; 2 is a config problem;
    1 is a numerical or usage failure after the config parsed.
    """
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"pdpml {args.command}: {exc}", file=sys.stderr)
        return 2
    if args.strict_cfl:
        cfg = replace(cfg, strict_cfl=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        out / "manifest.json", args.command, resolved_config(cfg), args.threads
    )
    try:
        with manifest.phase("stencil"):
            st = compute_stencil(cfg.kernel, cfg.grid, cfg.quad_order)
        args.func(args, cfg, st, out, manifest)
    except (ValueError, InstabilityError, FloatingPointError) as exc:
        manifest.note("error", str(exc))
        manifest.finalize("failed")
        print(f"pdpml {args.command}: {exc}", file=sys.stderr)
        return 1
    manifest.finalize("complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())
