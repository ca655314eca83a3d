"""Procedural 1-D terrain: a difficulty-by-type grid of profile patches.

The grid has R rows and C columns laid out end to end along x in row-major
order, so patch (r, c) starts at ``(r*C + c) * patch_length``. Rows encode
difficulty: in curriculum mode row r has difficulty r/(R-1) exactly; in random
mode each patch draws its difficulty uniformly. Column types are drawn once
per column from the sub-terrain proportion weights.

Every patch profile is built with zero height at both ends plus a flattened
spawn margin, which makes the whole field stitch with zero boundary gaps and
gives robots a flat pad to reset on. Each sub-terrain scales one feature
parameter linearly with difficulty: p(d) = p_min + d * (p_max - p_min).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .config import register_variant
from .rng import StreamPack

EXPORT_VERSION = 1


class TerrainError(ValueError):
    pass


@register_variant
@dataclass
class FlatCfg:
    kind: str = "flat"
    proportion: float = 1.0


@register_variant
@dataclass
class PyramidStairsCfg:
    kind: str = "pyramid_stairs"
    step_width: float = 0.4
    step_height_range: tuple[float, float] = (0.05, 0.25)
    proportion: float = 1.0


@register_variant
@dataclass
class RandomGridCfg:
    kind: str = "random_grid"
    cell_width: float = 0.45
    height_range: tuple[float, float] = (0.02, 0.12)
    proportion: float = 1.0


@register_variant
@dataclass
class SlopeCfg:
    kind: str = "slope"
    max_slope: float = 0.4
    proportion: float = 1.0


@register_variant
@dataclass
class UniformNoiseCfg:
    kind: str = "uniform_noise"
    amplitude_range: tuple[float, float] = (0.01, 0.06)
    proportion: float = 1.0


@register_variant
@dataclass
class WaveCfg:
    kind: str = "wave"
    amplitude_range: tuple[float, float] = (0.02, 0.1)
    wavelength: float = 2.0
    proportion: float = 1.0


SubTerrainCfg = (
    FlatCfg | PyramidStairsCfg | RandomGridCfg | SlopeCfg | UniformNoiseCfg | WaveCfg
)


@dataclass
class TerrainGridCfg:
    rows: int = 1
    cols: int = 1
    patch_length: float = 8.0
    spacing: float = 0.05  # sample step along x
    mode: str = "curriculum"  # "curriculum" | "random"
    spawn_margin: float = 1.0  # flattened pad at each patch end
    sub_terrains: list[SubTerrainCfg] = field(default_factory=lambda: [FlatCfg()])

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise TerrainError("terrain grid needs rows >= 1 and cols >= 1")
        if not self.sub_terrains:
            raise TerrainError("sub_terrains list is empty")
        if self.mode not in ("curriculum", "random"):
            raise TerrainError(f"unknown terrain mode {self.mode!r}")
        n = self.patch_length / self.spacing
        if abs(n - round(n)) > 1e-9:
            raise TerrainError("patch_length must be a multiple of spacing")


def scaled_params(cfg: SubTerrainCfg, difficulty: float) -> dict[str, float]:
    """The difficulty-scaled feature parameters of a sub-terrain variant."""

    def lerp(rng: tuple[float, float]) -> float:
        return rng[0] + difficulty * (rng[1] - rng[0])

    if isinstance(cfg, PyramidStairsCfg):
        return {"step_height": lerp(cfg.step_height_range)}
    if isinstance(cfg, RandomGridCfg):
        return {"max_cell_height": lerp(cfg.height_range)}
    if isinstance(cfg, SlopeCfg):
        return {"slope": difficulty * cfg.max_slope}
    if isinstance(cfg, UniformNoiseCfg):
        return {"amplitude": lerp(cfg.amplitude_range)}
    if isinstance(cfg, WaveCfg):
        return {"amplitude": lerp(cfg.amplitude_range)}
    return {}


class Heightfield:
    """Stitched sample grid over all patches, with fast interpolation."""

    def __init__(
        self,
        cfg: TerrainGridCfg,
        samples: np.ndarray,
        difficulty: np.ndarray,
        type_index: np.ndarray,
        type_names: list[str],
    ):
        self.cfg = cfg
        self.samples = samples  # (total_samples,), uniform spacing from x=0
        self.spacing = cfg.spacing
        self.rows = cfg.rows
        self.cols = cfg.cols
        self.patch_length = cfg.patch_length
        self.difficulty = difficulty  # (R, C)
        self.type_index = type_index  # (R, C) into type_names
        self.type_names = type_names

    def spawn_origin(self, row: int, col: int) -> float:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise TerrainError(f"patch ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return (row * self.cols + col) * self.patch_length

    def patch_samples(self, row: int, col: int) -> np.ndarray:
        per = int(round(self.patch_length / self.spacing))
        start = (row * self.cols + col) * per
        return self.samples[start : start + per + 1]

    def heights(self, x) -> np.ndarray:
        """Piecewise-linear height at x (array ok); clamps beyond the grid."""
        x = np.asarray(x, dtype=np.float64)
        last = len(self.samples) - 1
        # NaN-safe: a nonfinite query indexes sample 0 and yields a finite
        # height; the caller's arithmetic keeps propagating the NaN.
        pos = np.where(np.isfinite(x), x, 0.0) / self.spacing
        pos = np.clip(pos, 0.0, float(last))
        idx = np.minimum(pos.astype(np.int64), last - 1)
        frac = pos - idx
        return self.samples[idx] * (1.0 - frac) + self.samples[idx + 1] * frac

    # -- versioned text export ------------------------------------------------

    def export_text(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(f"stridesim-heightfield {EXPORT_VERSION}\n")
            fh.write(
                f"rows {self.rows} cols {self.cols} "
                f"patch_length {self.patch_length!r} spacing {self.spacing!r}\n"
            )
            for r in range(self.rows):
                for c in range(self.cols):
                    fh.write(
                        f"patch {r} {c} type {self.type_names[self.type_index[r, c]]} "
                        f"difficulty {float(self.difficulty[r, c])!r} "
                        f"origin {float(self.spawn_origin(r, c))!r}\n"
                    )
            fh.write("samples " + " ".join(repr(float(v)) for v in self.samples) + "\n")


def load_heightfield_text(path: str) -> Heightfield:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "stridesim-heightfield":
            raise TerrainError(f"{path!r} is not a heightfield export")
        if int(header[1]) != EXPORT_VERSION:
            raise TerrainError(f"unsupported heightfield version {header[1]}")
        meta = fh.readline().split()
        rows, cols = int(meta[1]), int(meta[3])
        patch_length, spacing = float(meta[5]), float(meta[7])
        difficulty = np.zeros((rows, cols))
        type_index = np.zeros((rows, cols), dtype=np.int64)
        type_names: list[str] = []
        samples = None
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "patch":
                r, c = int(parts[1]), int(parts[2])
                name = parts[4]
                if name not in type_names:
                    type_names.append(name)
                type_index[r, c] = type_names.index(name)
                difficulty[r, c] = float(parts[6])
            elif parts[0] == "samples":
                samples = np.array([float(v) for v in parts[1:]])
    if samples is None:
        raise TerrainError(f"{path!r} has no samples line")
    cfg = TerrainGridCfg(rows=rows, cols=cols, patch_length=patch_length, spacing=spacing)
    return Heightfield(cfg, samples, difficulty, type_index, type_names)


# ---------------------------------------------------------------------------
# patch profile builders (all return S+1 samples with zero ends)


def _flatten_margins(profile: np.ndarray, margin_samples: int) -> np.ndarray:
    if margin_samples > 0:
        profile[:margin_samples] = 0.0
        profile[-margin_samples:] = 0.0
    profile[0] = 0.0
    profile[-1] = 0.0
    return profile


def _build_patch(
    cfg: SubTerrainCfg,
    difficulty: float,
    grid: TerrainGridCfg,
    draws: StreamPack,
    patch_id: int,
) -> np.ndarray:
    per = int(round(grid.patch_length / grid.spacing))
    xs = np.arange(per + 1) * grid.spacing
    margin = int(round(grid.spawn_margin / grid.spacing))
    margin = min(margin, per // 3)
    inner_lo, inner_hi = margin * grid.spacing, (per - margin) * grid.spacing
    inner_len = inner_hi - inner_lo
    center = 0.5 * (inner_lo + inner_hi)
    h = np.zeros(per + 1)
    params = scaled_params(cfg, difficulty)

    if isinstance(cfg, FlatCfg):
        pass
    elif isinstance(cfg, PyramidStairsCfg):
        step_h = params["step_height"]
        ascent = np.minimum(xs - inner_lo, inner_hi - xs)
        steps = np.floor(ascent / cfg.step_width)
        h = np.where(ascent > 0.0, steps * step_h, 0.0)
        h = np.maximum(h, 0.0)
    elif isinstance(cfg, RandomGridCfg):
        n_cells = max(1, int(np.ceil(inner_len / cfg.cell_width)))
        cell_h = draws.uniform(
            "terrain.cells", 0.0, params["max_cell_height"], np.array([patch_id]), n_cells
        )[0]
        cell = np.floor((xs - inner_lo) / cfg.cell_width).astype(np.int64)
        inside = (xs > inner_lo) & (xs < inner_hi)
        cell = np.clip(cell, 0, n_cells - 1)
        h = np.where(inside, cell_h[cell], 0.0)
    elif isinstance(cfg, SlopeCfg):
        rise = np.minimum(xs - inner_lo, inner_hi - xs) * params["slope"]
        h = np.maximum(rise, 0.0)
    elif isinstance(cfg, UniformNoiseCfg):
        knot_dx = 4.0 * grid.spacing
        n_knots = int(np.floor(inner_len / knot_dx)) + 1
        amp = params["amplitude"]
        knots = draws.uniform("terrain.noise", -amp, amp, np.array([patch_id]), n_knots)[0]
        knots[0] = 0.0
        knots[-1] = 0.0
        kx = inner_lo + np.arange(n_knots) * knot_dx
        h = np.interp(xs, kx, knots, left=0.0, right=0.0)
    elif isinstance(cfg, WaveCfg):
        amp = params["amplitude"]
        cycles = max(1, int(round(inner_len / cfg.wavelength)))
        eff_wavelength = inner_len / cycles
        phase = 2.0 * np.pi * (xs - inner_lo) / eff_wavelength
        h = np.where((xs >= inner_lo) & (xs <= inner_hi), amp * np.sin(phase), 0.0)
    else:
        raise TerrainError(f"unknown sub-terrain {cfg!r}")
    return _flatten_margins(h, margin)


def generate_grid(cfg: TerrainGridCfg, seed: int) -> Heightfield:
    """Build the stitched heightfield for a grid config, deterministically."""
    cfg.validate()
    R, C = cfg.rows, cfg.cols
    n_patches = R * C
    draws = StreamPack(seed, np.arange(max(n_patches, C)))

    weights = np.array([max(0.0, s.proportion) for s in cfg.sub_terrains])
    if weights.sum() <= 0.0:
        raise TerrainError("sub-terrain proportions sum to zero")
    cdf = np.cumsum(weights) / weights.sum()
    u_cols = draws.uniform("terrain.column_types", 0.0, 1.0, np.arange(C), 1)[:, 0]
    col_types = np.searchsorted(cdf, u_cols, side="right")
    col_types = np.minimum(col_types, len(cfg.sub_terrains) - 1)

    difficulty = np.zeros((R, C))
    for r in range(R):
        if cfg.mode == "curriculum":
            difficulty[r, :] = r / (R - 1) if R > 1 else 0.0
        else:
            difficulty[r, :] = draws.uniform(
                "terrain.difficulty", 0.0, 1.0, np.arange(r * C, (r + 1) * C), 1
            )[:, 0]

    per = int(round(cfg.patch_length / cfg.spacing))
    samples = np.zeros(n_patches * per + 1)
    type_index = np.zeros((R, C), dtype=np.int64)
    for r in range(R):
        for c in range(C):
            pid = r * C + c
            sub = cfg.sub_terrains[col_types[c]]
            type_index[r, c] = col_types[c]
            patch = _build_patch(sub, float(difficulty[r, c]), cfg, draws, pid)
            samples[pid * per : (pid + 1) * per + 1] = patch
    type_names = [s.kind for s in cfg.sub_terrains]
    return Heightfield(cfg, samples, difficulty, type_index, type_names)
