"""Procedural texture synthesis: flat, gradient, chess, and gradient-noise patterns.

The noise generator is 2-D lattice gradient noise with the quintic fade
``6t^5 - 15t^4 + 10t^3`` and eight unit gradient directions drawn from a
seeded permutation table. Raw values are bounded by sqrt(2)/2, so the
exported ``perlin2`` rescales by sqrt(2) to cover [-1, 1] without clamping.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import EmptyPatternSet, InvalidPattern
from .scene import derived_seed
from .workers import fork_executor, resolve_workers

_U64 = (1 << 64) - 1
_SQRT2 = math.sqrt(2.0)
_DIAG = math.sqrt(0.5)

# Eight unit gradients: the four axis directions and the four diagonals.
_GRAD_X = np.array([1.0, -1.0, 0.0, 0.0, _DIAG, -_DIAG, _DIAG, -_DIAG])
_GRAD_Y = np.array([0.0, 0.0, 1.0, -1.0, _DIAG, _DIAG, -_DIAG, -_DIAG])

PATTERN_FAMILIES = ("flat", "gradient", "chess", "perlin")


@dataclass(frozen=True, eq=False)
class PermutationTable:
    """256-entry permutation of 0..255 duplicated to 512 entries."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.int64)
        if t.shape != (512,):
            raise ValueError("permutation table must have 512 entries")
        if not np.array_equal(np.sort(t[:256]), np.arange(256)):
            raise ValueError("first 256 entries must be a permutation of 0..255")
        if not np.array_equal(t[:256], t[256:]):
            raise ValueError("entries 256..511 must repeat entries 0..255")
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @classmethod
    def from_seed(cls, seed: int) -> "PermutationTable":
        rng = np.random.default_rng(seed & _U64)
        perm = rng.permutation(256).astype(np.int64)
        return cls(np.concatenate([perm, perm]))


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _fade_deriv(t):
    return 30.0 * t * t * (t - 1.0) * (t - 1.0)


def _corner_hashes(x, y, table: PermutationTable):
    xi = np.floor(x).astype(np.int64)
    yi = np.floor(y).astype(np.int64)
    xf = x - xi
    yf = y - yi
    gx = xi & 255
    gy = yi & 255
    p = table.table
    h00 = p[p[gx] + gy] & 7
    h10 = p[p[gx + 1] + gy] & 7
    h01 = p[p[gx] + gy + 1] & 7
    h11 = p[p[gx + 1] + gy + 1] & 7
    return xf, yf, h00, h10, h01, h11


def perlin2(x, y, table: PermutationTable):
    """Single-octave gradient noise, rescaled to cover [-1, 1].

    Exactly zero at integer lattice points. Accepts scalars or arrays
    (broadcast elementwise).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xf, yf, h00, h10, h01, h11 = _corner_hashes(x, y, table)
    n00 = _GRAD_X[h00] * xf + _GRAD_Y[h00] * yf
    n10 = _GRAD_X[h10] * (xf - 1.0) + _GRAD_Y[h10] * yf
    n01 = _GRAD_X[h01] * xf + _GRAD_Y[h01] * (yf - 1.0)
    n11 = _GRAD_X[h11] * (xf - 1.0) + _GRAD_Y[h11] * (yf - 1.0)
    u = _fade(xf)
    v = _fade(yf)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    raw = nx0 + v * (nx1 - nx0)
    out = raw * _SQRT2
    if out.ndim == 0:
        return float(out)
    return out


def perlin2_grad(x, y, table: PermutationTable):
    """Noise value plus its analytic partial derivatives (d/dx, d/dy)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xf, yf, h00, h10, h01, h11 = _corner_hashes(x, y, table)
    g00x, g00y = _GRAD_X[h00], _GRAD_Y[h00]
    g10x, g10y = _GRAD_X[h10], _GRAD_Y[h10]
    g01x, g01y = _GRAD_X[h01], _GRAD_Y[h01]
    g11x, g11y = _GRAD_X[h11], _GRAD_Y[h11]
    n00 = g00x * xf + g00y * yf
    n10 = g10x * (xf - 1.0) + g10y * yf
    n01 = g01x * xf + g01y * (yf - 1.0)
    n11 = g11x * (xf - 1.0) + g11y * (yf - 1.0)
    u = _fade(xf)
    v = _fade(yf)
    du = _fade_deriv(xf)
    dv = _fade_deriv(yf)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    value = nx0 + v * (nx1 - nx0)
    # d/dx: corner dot products vary through their gradient x components,
    # and u varies through fade'(xf); v is constant in x.
    dnx0_dx = g00x + u * (g10x - g00x) + du * (n10 - n00)
    dnx1_dx = g01x + u * (g11x - g01x) + du * (n11 - n01)
    dvalue_dx = dnx0_dx + v * (dnx1_dx - dnx0_dx)
    dnx0_dy = g00y + u * (g10y - g00y)
    dnx1_dy = g01y + u * (g11y - g01y)
    dvalue_dy = dnx0_dy + v * (dnx1_dy - dnx0_dy) + dv * (nx1 - nx0)
    return value * _SQRT2, dvalue_dx * _SQRT2, dvalue_dy * _SQRT2


def fbm2(x, y, octaves: int, persistence: float, table: PermutationTable):
    """Multi-octave sum of perlin2, normalized to [-1, 1].

    Octave ``o`` samples at coordinates scaled by 2**o and is weighted by
    persistence**o; the sum is divided by the total weight.
    """
    if octaves < 1:
        raise ValueError("octaves must be >= 1")
    total = None
    weight = 1.0
    weight_sum = 0.0
    for o in range(octaves):
        scale = float(2**o)
        term = perlin2(np.asarray(x, dtype=np.float64) * scale, np.asarray(y, dtype=np.float64) * scale, table)
        term = np.asarray(term) * weight
        total = term if total is None else total + term
        weight_sum += weight
        weight *= persistence
    out = total / weight_sum
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# patterns

def _check_color(name: str, color) -> tuple[float, float, float]:
    try:
        r, g, b = (float(c) for c in color)
    except (TypeError, ValueError):
        raise InvalidPattern(f"{name} must be an RGB triple") from None
    for c in (r, g, b):
        if not 0.0 <= c <= 1.0 or not math.isfinite(c):
            raise InvalidPattern(f"{name} channels must lie in [0, 1], got {color}")
    return (r, g, b)


@dataclass(frozen=True)
class FlatPattern:
    family = "flat"
    color: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "color", _check_color("color", self.color))


@dataclass(frozen=True)
class GradientPattern:
    family = "gradient"
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    direction: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "color_a", _check_color("color_a", self.color_a))
        object.__setattr__(self, "color_b", _check_color("color_b", self.color_b))
        try:
            dx, dy = (float(c) for c in self.direction)
        except (TypeError, ValueError):
            raise InvalidPattern("direction must be a 2-vector") from None
        n = math.hypot(dx, dy)
        if n == 0.0 or not math.isfinite(n):
            raise InvalidPattern("direction must be a nonzero finite 2-vector")
        object.__setattr__(self, "direction", (dx / n, dy / n))


@dataclass(frozen=True)
class ChessPattern:
    family = "chess"
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    cells_per_side: int

    def __post_init__(self):
        object.__setattr__(self, "color_a", _check_color("color_a", self.color_a))
        object.__setattr__(self, "color_b", _check_color("color_b", self.color_b))
        if int(self.cells_per_side) != self.cells_per_side or self.cells_per_side < 2:
            raise InvalidPattern(f"cells_per_side must be an integer >= 2, got {self.cells_per_side}")
        object.__setattr__(self, "cells_per_side", int(self.cells_per_side))


@dataclass(frozen=True)
class PerlinPattern:
    family = "perlin"
    base_frequency: float
    octaves: int
    persistence: float
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "color_a", _check_color("color_a", self.color_a))
        object.__setattr__(self, "color_b", _check_color("color_b", self.color_b))
        if not (math.isfinite(self.base_frequency) and self.base_frequency > 0.0):
            raise InvalidPattern(f"base_frequency must be positive, got {self.base_frequency}")
        if int(self.octaves) != self.octaves or not 1 <= self.octaves <= 8:
            raise InvalidPattern(f"octaves must be an integer in [1, 8], got {self.octaves}")
        if not 0.0 < self.persistence <= 1.0:
            raise InvalidPattern(f"persistence must lie in (0, 1], got {self.persistence}")
        object.__setattr__(self, "octaves", int(self.octaves))


TexturePattern = Union[FlatPattern, GradientPattern, ChessPattern, PerlinPattern]


def pattern_to_dict(pattern: TexturePattern) -> dict:
    d = {"family": pattern.family}
    for name in pattern.__dataclass_fields__:
        value = getattr(pattern, name)
        d[name] = list(value) if isinstance(value, tuple) else value
    return d


@dataclass(frozen=True, eq=False)
class TextureImage:
    """Square RGB texture; ``pixels`` is (res, res, 3) float32 in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[0] != px.shape[1] or px.shape[2] != 3:
            raise ValueError(f"pixels must be square RGB, got shape {px.shape}")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def resolution(self) -> int:
        return int(self.pixels.shape[0])

    width = height = resolution


def gen_texture(pattern: TexturePattern, resolution: int, seed: int) -> TextureImage:
    """Rasterize a pattern to a square texture.

    The seed only matters for PerlinPattern, where it picks the permutation
    table; the other families are fully determined by their fields.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    res = int(resolution)
    if isinstance(pattern, FlatPattern):
        pixels = np.broadcast_to(np.asarray(pattern.color, dtype=np.float64), (res, res, 3))
    elif isinstance(pattern, GradientPattern):
        dx, dy = pattern.direction
        px = np.arange(res, dtype=np.float64)
        proj = px[None, :] * dx + px[:, None] * dy
        corners = [0.0, (res - 1) * dx, (res - 1) * dy, (res - 1) * (dx + dy)]
        lo, hi = min(corners), max(corners)
        t = (proj - lo) / (hi - lo)
        a = np.asarray(pattern.color_a, dtype=np.float64)
        b = np.asarray(pattern.color_b, dtype=np.float64)
        pixels = a + t[:, :, None] * (b - a)
    elif isinstance(pattern, ChessPattern):
        cells = pattern.cells_per_side
        idx = (np.arange(res) * cells) // res
        checker = (idx[None, :] + idx[:, None]) % 2
        a = np.asarray(pattern.color_a, dtype=np.float64)
        b = np.asarray(pattern.color_b, dtype=np.float64)
        pixels = np.where(checker[:, :, None] == 0, a, b)
    elif isinstance(pattern, PerlinPattern):
        table = PermutationTable.from_seed(seed)
        coords = np.arange(res, dtype=np.float64) * (pattern.base_frequency / res)
        xs, ys = np.meshgrid(coords, coords)
        noise = fbm2(xs, ys, pattern.octaves, pattern.persistence, table)
        t = np.clip((noise + 1.0) * 0.5, 0.0, 1.0)
        a = np.asarray(pattern.color_a, dtype=np.float64)
        b = np.asarray(pattern.color_b, dtype=np.float64)
        pixels = a + t[:, :, None] * (b - a)
    else:
        raise InvalidPattern(f"unknown pattern type {type(pattern).__name__}")
    return TextureImage(pixels.astype(np.float32))


# ---------------------------------------------------------------------------
# library builder

@dataclass(frozen=True)
class TextureConfig:
    """Texture-library parameters, including per-family sampling ranges."""

    library_size: int = 500
    resolution: int = 256
    enabled_patterns: tuple[str, ...] = PATTERN_FAMILIES
    perlin_frequency_range: tuple[float, float] = (2.0, 16.0)
    perlin_octaves_range: tuple[int, int] = (1, 4)
    perlin_persistence_range: tuple[float, float] = (0.4, 0.6)
    chess_cells_range: tuple[int, int] = (4, 16)

    def __post_init__(self):
        # Canonical family order keeps sampling independent of user ordering.
        enabled = tuple(f for f in PATTERN_FAMILIES if f in set(self.enabled_patterns))
        unknown = set(self.enabled_patterns) - set(PATTERN_FAMILIES)
        if unknown:
            raise InvalidPattern(f"unknown pattern families: {sorted(unknown)}")
        object.__setattr__(self, "enabled_patterns", enabled)


@dataclass(frozen=True, eq=False)
class TextureLibrary:
    """Generated textures plus the pattern metadata they came from."""

    images: tuple[TextureImage, ...]
    patterns: tuple[TexturePattern, ...]

    def __len__(self) -> int:
        return len(self.images)


def sample_pattern(rng: np.random.Generator, config: TextureConfig) -> TexturePattern:
    """Draw one pattern with family chosen uniformly among enabled families."""
    enabled = config.enabled_patterns
    if not enabled:
        raise EmptyPatternSet("no texture pattern families enabled")
    family = enabled[int(rng.integers(0, len(enabled)))]
    if family == "flat":
        return FlatPattern(color=tuple(rng.uniform(0.0, 1.0, 3)))
    if family == "gradient":
        a = tuple(rng.uniform(0.0, 1.0, 3))
        b = tuple(rng.uniform(0.0, 1.0, 3))
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        return GradientPattern(color_a=a, color_b=b, direction=(math.cos(angle), math.sin(angle)))
    if family == "chess":
        lo, hi = config.chess_cells_range
        return ChessPattern(
            color_a=tuple(rng.uniform(0.0, 1.0, 3)),
            color_b=tuple(rng.uniform(0.0, 1.0, 3)),
            cells_per_side=int(rng.integers(lo, hi + 1)),
        )
    lo_f, hi_f = config.perlin_frequency_range
    lo_o, hi_o = config.perlin_octaves_range
    lo_p, hi_p = config.perlin_persistence_range
    return PerlinPattern(
        base_frequency=float(rng.uniform(lo_f, hi_f)),
        octaves=int(rng.integers(lo_o, hi_o + 1)),
        persistence=float(rng.uniform(lo_p, hi_p)),
        color_a=tuple(rng.uniform(0.0, 1.0, 3)),
        color_b=tuple(rng.uniform(0.0, 1.0, 3)),
    )


def _make_texture(index: int, config: TextureConfig, master_seed: int, resolution: int):
    seed = derived_seed(master_seed, index)
    rng = np.random.default_rng(seed)
    pattern = sample_pattern(rng, config)
    gen_seed = int(rng.integers(0, 1 << 64, dtype=np.uint64))
    return pattern, gen_texture(pattern, resolution, gen_seed)


def iter_texture_records(
    config: TextureConfig, master_seed: int, count: int | None = None
) -> Iterator[tuple[int, TexturePattern, TextureImage]]:
    """Serially generate library entries in index order (streaming form)."""
    n = config.library_size if count is None else count
    for i in range(n):
        pattern, image = _make_texture(i, config, master_seed, config.resolution)
        yield i, pattern, image


def _build_chunk(args):
    start, stop, config, master_seed = args
    out = []
    for i in range(start, stop):
        pattern, image = _make_texture(i, config, master_seed, config.resolution)
        out.append((pattern, image.pixels))
    return start, out


def build_texture_library(
    config: TextureConfig,
    master_seed: int,
    *,
    count: int | None = None,
    workers: int | None = None,
) -> TextureLibrary:
    """Build the texture library, in parallel across textures.

    Texture ``i`` is generated from ``derived_seed(master_seed, i)``, so the
    result is bit-identical for any worker count; parallelism only affects
    wall-clock time. Results are ordered by index, never by completion time.
    """
    n = config.library_size if count is None else int(count)
    if n < 1:
        raise ValueError(f"count must be >= 1, got {n}")
    if not config.enabled_patterns:
        raise EmptyPatternSet("no texture pattern families enabled")
    workers = resolve_workers(workers)
    if workers <= 1 or n < 8:
        records = [_make_texture(i, config, master_seed, config.resolution) for i in range(n)]
        patterns = tuple(p for p, _ in records)
        images = tuple(img for _, img in records)
        return TextureLibrary(images=images, patterns=patterns)

    chunk = max(1, math.ceil(n / (workers * 4)))
    tasks = [(s, min(s + chunk, n), config, master_seed) for s in range(0, n, chunk)]
    results: dict[int, list] = {}
    with fork_executor(workers) as pool:
        for start, out in pool.map(_build_chunk, tasks):
            results[start] = out
    patterns: list[TexturePattern] = []
    images: list[TextureImage] = []
    for s, _, _, _ in tasks:
        for pattern, pixels in results[s]:
            patterns.append(pattern)
            images.append(TextureImage(pixels))
    return TextureLibrary(images=tuple(images), patterns=tuple(patterns))
