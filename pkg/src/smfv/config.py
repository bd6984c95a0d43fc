"""Run configuration: JSON ingestion, validation, and initial-state presets.

A configuration document is a single JSON object with sections ``mesh``,
``species``, ``initial``, ``time``, and optionally ``solver``, ``output``
and ``convergence``.  Validation errors name the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, uniform_interval, uniform_rectangle
from .model import SpeciesSystem, build_system, is_simplex_point
from .scheme import SolverConfig, StateField

PRESETS = ("smooth1d", "nonsmooth1d", "blocks2d", "uniform", "table")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class MeshConfig:
    dimension: int
    shape: tuple

    def build(self) -> Mesh:
        if self.dimension == 1:
            return uniform_interval(self.shape[0])
        return uniform_rectangle(*self.shape)


@dataclass(frozen=True)
class InitialConfig:
    preset: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TimeConfig:
    dt: float
    t_end: float


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    snapshot_times: tuple = ()
    diagnostics_every: int = 1


@dataclass(frozen=True)
class ConvergenceConfig:
    grids: tuple
    ref_n: int


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig
    species: SpeciesSystem
    initial: InitialConfig
    time: TimeConfig
    solver: SolverConfig
    output: OutputConfig
    convergence: ConvergenceConfig = None

    def build_mesh(self) -> Mesh:
        return self.mesh.build()

    def initial_state(self, mesh: Mesh) -> StateField:
        return preset_initial(self.initial, mesh, self.species.n)


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}.{key} required")
    return section[key]


def _as_positive_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{where} must be a positive integer")
    return value


def _as_positive_float(value, where: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ConfigError(f"{where} must be a positive number")
    return float(value)


def _check_keys(section: dict, allowed, where: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{where}.{key} is not a recognised field")


def _parse_mesh(raw) -> MeshConfig:
    if not isinstance(raw, dict):
        raise ConfigError("mesh must be an object")
    _check_keys(raw, {"dimension", "N", "Nx", "Ny"}, "mesh")
    dim = _require(raw, "dimension", "mesh")
    if dim not in (1, 2):
        raise ConfigError("mesh.dimension must be 1 or 2")
    if dim == 1:
        n = _as_positive_int(_require(raw, "N", "mesh"), "mesh.N")
        return MeshConfig(1, (n,))
    nx = _as_positive_int(_require(raw, "Nx", "mesh"), "mesh.Nx")
    ny = _as_positive_int(_require(raw, "Ny", "mesh"), "mesh.Ny")
    return MeshConfig(2, (nx, ny))


def _parse_species(raw) -> SpeciesSystem:
    if not isinstance(raw, dict):
        raise ConfigError("species must be an object")
    _check_keys(raw, {"n", "c"}, "species")
    c = _require(raw, "c", "species")
    try:
        system = build_system(c)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"species.c: {exc}") from exc
    if "n" in raw and raw["n"] != system.n:
        raise ConfigError("species.n does not match the size of species.c")
    return system


def _parse_time(raw) -> TimeConfig:
    if not isinstance(raw, dict):
        raise ConfigError("time must be an object")
    _check_keys(raw, {"dt", "T"}, "time")
    dt = _as_positive_float(_require(raw, "dt", "time"), "time.dt")
    t_end = _as_positive_float(_require(raw, "T", "time"), "time.T")
    if t_end < dt:
        raise ConfigError("time.T must be at least time.dt")
    return TimeConfig(dt, t_end)


def _parse_solver(raw) -> SolverConfig:
    if raw is None:
        return SolverConfig()
    if not isinstance(raw, dict):
        raise ConfigError("solver must be an object")
    allowed = {"newton_tol", "max_newton_iters", "max_damping_halvings",
               "projection_floor", "log_mean_equality_threshold"}
    _check_keys(raw, allowed, "solver")
    try:
        return SolverConfig(**raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _parse_output(raw, t_end: float) -> OutputConfig:
    if raw is None:
        return OutputConfig()
    if not isinstance(raw, dict):
        raise ConfigError("output must be an object")
    _check_keys(raw, {"directory", "snapshot_times", "diagnostics_every"}, "output")
    directory = raw.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory must be a nonempty string")
    times = raw.get("snapshot_times", [])
    if not isinstance(times, list):
        raise ConfigError("output.snapshot_times must be a list of times")
    for t in times:
        if not isinstance(t, (int, float)) or isinstance(t, bool) or t < 0 or t > t_end:
            raise ConfigError("output.snapshot_times must lie within [0, T]")
    every = raw.get("diagnostics_every", 1)
    every = _as_positive_int(every, "output.diagnostics_every")
    return OutputConfig(directory, tuple(float(t) for t in times), every)


def _parse_convergence(raw) -> ConvergenceConfig:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("convergence must be an object")
    _check_keys(raw, {"grids", "ref"}, "convergence")
    grids = _require(raw, "grids", "convergence")
    if not isinstance(grids, list) or not grids:
        raise ConfigError("convergence.grids must be a nonempty list")
    grids = tuple(sorted(_as_positive_int(g, "convergence.grids") for g in grids))
    ref = _as_positive_int(_require(raw, "ref", "convergence"), "convergence.ref")
    for g in grids:
        if ref % g != 0:
            raise ConfigError(f"convergence.ref must be a multiple of every grid "
                              f"(ref = {ref} is not divisible by N = {g})")
    return ConvergenceConfig(grids, ref)


def load_config(document) -> RunConfig:
    """Parse and validate a configuration document (JSON text or dict)."""
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed configuration document: {exc}") from exc
    elif isinstance(document, dict):
        raw = document
    else:
        raise ConfigError("configuration must be a JSON object document")
    if not isinstance(raw, dict):
        raise ConfigError("top-level configuration must be an object")
    allowed = {"mesh", "species", "initial", "time", "solver", "output", "convergence"}
    _check_keys(raw, allowed, "config")

    mesh_cfg = _parse_mesh(_require(raw, "mesh", "config"))
    species = _parse_species(_require(raw, "species", "config"))
    time_cfg = _parse_time(_require(raw, "time", "config"))
    initial = _parse_initial(_require(raw, "initial", "config"), mesh_cfg, species.n)
    solver = _parse_solver(raw.get("solver"))
    output = _parse_output(raw.get("output"), time_cfg.t_end)
    convergence = _parse_convergence(raw.get("convergence"))
    return RunConfig(mesh=mesh_cfg, species=species, initial=initial,
                     time=time_cfg, solver=solver, output=output,
                     convergence=convergence)


def load_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())


# ----------------------------------------------------------------------
# initial profiles


def _smooth1d_point(x):
    u1 = 0.25 + 0.25 * np.cos(np.pi * x)
    return np.stack([u1, u1, 1.0 - 2.0 * u1])


def _nonsmooth1d_point(x):
    x = np.asarray(x, dtype=float)
    u1 = ((x >= 3.0 / 8.0) & (x <= 5.0 / 8.0)).astype(float)
    u2 = (((x > 1.0 / 8.0) & (x < 3.0 / 8.0))
          | ((x > 5.0 / 8.0) & (x < 7.0 / 8.0))).astype(float)
    return np.stack([u1, u2, 1.0 - u1 - u2])


def _interval_overlap(lo, hi, a, b):
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def _parse_initial(raw, mesh_cfg: MeshConfig, n: int) -> InitialConfig:
    if not isinstance(raw, dict):
        raise ConfigError("initial must be an object")
    preset = _require(raw, "preset", "initial")
    if preset not in PRESETS:
        raise ConfigError(f"initial.preset unknown: {preset!r} "
                          f"(expected one of {', '.join(PRESETS)})")
    params = {k: v for k, v in raw.items() if k != "preset"}

    if preset in ("smooth1d", "nonsmooth1d"):
        _check_keys(params, set(), "initial")
        if mesh_cfg.dimension != 1:
            raise ConfigError(f"initial.preset {preset} requires a 1D mesh")
        if n != 3:
            raise ConfigError(f"initial.preset {preset} requires exactly 3 species")
    elif preset == "uniform":
        _check_keys(params, {"value"}, "initial")
        value = _require(params, "value", "initial")
        if not isinstance(value, list) or len(value) != n:
            raise ConfigError("initial.value must list one fraction per species")
        if not is_simplex_point(np.array(value, dtype=float)):
            raise ConfigError("initial.value must be a point of the unit simplex")
    elif preset == "blocks2d":
        _check_keys(params, {"blocks"}, "initial")
        if mesh_cfg.dimension != 2:
            raise ConfigError("initial.preset blocks2d requires a 2D mesh")
        blocks = _require(params, "blocks", "initial")
        if not isinstance(blocks, list) or not blocks:
            raise ConfigError("initial.blocks must be a nonempty list")
        for blk in blocks:
            if not isinstance(blk, dict) or set(blk) != {"species", "box"}:
                raise ConfigError("initial.blocks entries must be "
                                  "{species, box} objects")
            s = blk["species"]
            if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < n - 1:
                raise ConfigError("initial.blocks species index must lie in "
                                  f"[0, {n - 2}] (the last species takes the remainder)")
            box = blk["box"]
            if (not isinstance(box, list) or len(box) != 4
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                               for v in box)):
                raise ConfigError("initial.blocks box must be [x0, x1, y0, y1]")
            x0, x1, y0, y1 = (float(v) for v in box)
            if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
                raise ConfigError("initial.blocks box must be a nondegenerate "
                                  "axis-aligned box inside the unit square")
        _probe_blocks(blocks, n)
    elif preset == "table":
        _check_keys(params, {"values"}, "initial")
        values = _require(params, "values", "initial")
        if not isinstance(values, list) or not values:
            raise ConfigError("initial.values must be a nonempty list of rows")
        for row in values:
            if not isinstance(row, list) or len(row) != n:
                raise ConfigError("initial.values rows must list one fraction "
                                  "per species")
            if not is_simplex_point(np.array(row, dtype=float)):
                raise ConfigError("initial.values rows must be points of the "
                                  "unit simplex")
    return InitialConfig(preset, params)


def _probe_blocks(blocks, n):
    """Reject blocks whose pairwise intersections have positive area.

    Touching boundaries are fine (measure zero); positive-area overlap of any
    two blocks would push the pointwise species sum above one somewhere.
    """
    boxes = [tuple(float(v) for v in blk["box"]) for blk in blocks]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            ax0, ax1, ay0, ay1 = boxes[i]
            bx0, bx1, by0, by1 = boxes[j]
            w = min(ax1, bx1) - max(ax0, bx0)
            h = min(ay1, by1) - max(ay0, by0)
            if w > 0.0 and h > 0.0:
                if blocks[i]["species"] == blocks[j]["species"]:
                    raise ConfigError("initial.blocks of one species must not overlap")
                raise ConfigError("initial.blocks must leave a nonnegative "
                                  "remainder for the last species")


def preset_initial(initial: InitialConfig, mesh: Mesh, n: int) -> StateField:
    """Cell-averaged initial state for a preset on a given mesh.

    Smooth data is averaged by the midpoint rule (cell-center evaluation);
    indicator data by exact overlap integration, which needs the structured
    cell boxes of the uniform constructors.
    """
    preset = initial.preset
    if preset == "smooth1d":
        values = _build_smooth1d(mesh)
    elif preset == "nonsmooth1d":
        values = _build_nonsmooth1d(mesh)
    elif preset == "blocks2d":
        values = _build_blocks2d(mesh, initial.params["blocks"], n)
    elif preset == "uniform":
        value = np.array(initial.params["value"], dtype=float)
        if value.shape != (n,):
            raise ConfigError("initial.value must list one fraction per species")
        values = np.repeat(value[:, None], mesh.num_cells, axis=1)
    elif preset == "table":
        values = np.array(initial.params["values"], dtype=float).T
        if values.shape != (n, mesh.num_cells):
            raise ConfigError("initial.values must have one row per mesh cell")
    else:
        raise ConfigError(f"initial.preset unknown: {preset!r}")
    _validate_state_values(values)
    return StateField(mesh, values)


def _require_boxes(mesh, preset):
    if mesh.cell_lower is None or mesh.cell_upper is None:
        raise ConfigError(f"initial.preset {preset} requires a structured mesh "
                          "with cell bounding boxes")


def _build_smooth1d(mesh: Mesh) -> np.ndarray:
    if mesh.dimension != 1:
        raise ConfigError("initial.preset smooth1d requires a 1D mesh")
    return _smooth1d_point(mesh.cell_centers[:, 0])


def _build_nonsmooth1d(mesh: Mesh) -> np.ndarray:
    if mesh.dimension != 1:
        raise ConfigError("initial.preset nonsmooth1d requires a 1D mesh")
    _require_boxes(mesh, "nonsmooth1d")
    lo = mesh.cell_lower[:, 0]
    hi = mesh.cell_upper[:, 0]
    width = hi - lo
    u1 = _interval_overlap(lo, hi, 3.0 / 8.0, 5.0 / 8.0) / width
    u2 = (_interval_overlap(lo, hi, 1.0 / 8.0, 3.0 / 8.0)
          + _interval_overlap(lo, hi, 5.0 / 8.0, 7.0 / 8.0)) / width
    return np.stack([u1, u2, 1.0 - u1 - u2])


def _build_blocks2d(mesh: Mesh, blocks, n: int) -> np.ndarray:
    if mesh.dimension != 2:
        raise ConfigError("initial.preset blocks2d requires a 2D mesh")
    _require_boxes(mesh, "blocks2d")
    lo = mesh.cell_lower
    hi = mesh.cell_upper
    area = (hi[:, 0] - lo[:, 0]) * (hi[:, 1] - lo[:, 1])
    values = np.zeros((n, mesh.num_cells))
    for blk in blocks:
        x0, x1, y0, y1 = (float(v) for v in blk["box"])
        overlap = (_interval_overlap(lo[:, 0], hi[:, 0], x0, x1)
                   * _interval_overlap(lo[:, 1], hi[:, 1], y0, y1))
        values[blk["species"]] += overlap / area
    values[n - 1] = 1.0 - values[:n - 1].sum(axis=0)
    return values


def _validate_state_values(values, tol: float = 1e-12):
    if np.any(values < -tol):
        raise ConfigError("initial profile takes negative values")
    sums = values.sum(axis=0)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ConfigError("initial profile cell values must sum to one")
    # every species must be present: positive initial mass
    if np.any(values.max(axis=1) <= 0.0):
        raise ConfigError("initial profile must give every species positive mass")
