"""Deterministic CPU ray caster.

One primary ray per pixel center, nearest analytic hit over the scene's
primitives plus the ground plane, Lambert shading with a single hard shadow
ray per shaded pixel. No recursion, no anti-aliasing: the color image and
the per-pixel object-id mask stay exactly aligned.

Rows are partitioned into contiguous bands across workers; every pixel is
computed independently, so the output is bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadTextureId, IndivisibleDimensions
from .scene import (
    BACKGROUND_ID,
    GROUND_ID,
    CameraModel,
    LightSource,
    ObjectInstance,
    SceneSpec,
    ShapeClass,
    project,
)
from .textures import TextureImage, TextureLibrary
from .workers import resolve_workers

_T_EPS = 1e-6
_SHADOW_OFFSET = 1e-4
#: world-space period of the ground texture tiling, meters.
GROUND_TILE = 2.0
DEFAULT_BACKGROUND = (0.5, 0.5, 0.5)


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        n = float(np.linalg.norm(d))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d| = {n}")
        o.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True, eq=False)
class Hit:
    t: float
    point: np.ndarray
    normal: np.ndarray
    object_id: int
    uv: np.ndarray


@dataclass(frozen=True, eq=False)
class RenderOutput:
    color: np.ndarray
    id_mask: np.ndarray


# ---------------------------------------------------------------------------
# primitive kernels, all in the object's local frame with unit directions

def _sphere_t(ox, oy, oz, dx, dy, dz, radius):
    # directions need not be unit length (primary rays skip normalization);
    # t stays in units of the given direction vector
    a = dx * dx + dy * dy + dz * dz
    b = 2.0 * (ox * dx + oy * dy + oz * dz)
    c = ox * ox + oy * oy + oz * oz - radius * radius
    disc = b * b - 4.0 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    inv2a = 0.5 / a
    t1 = (-b - sq) * inv2a
    t2 = (-b + sq) * inv2a
    t = np.where(t1 > _T_EPS, t1, np.where(t2 > _T_EPS, t2, np.inf))
    return np.where(disc >= 0.0, t, np.inf)


def _box_t(ox, oy, oz, dx, dy, dz, hx, hy, hz):
    with np.errstate(divide="ignore", invalid="ignore"):
        ix, iy, iz = 1.0 / dx, 1.0 / dy, 1.0 / dz
        t1x, t2x = (-hx - ox) * ix, (hx - ox) * ix
        t1y, t2y = (-hy - oy) * iy, (hy - oy) * iy
        t1z, t2z = (-hz - oz) * iz, (hz - oz) * iz
    tn = np.maximum(np.maximum(np.minimum(t1x, t2x), np.minimum(t1y, t2y)), np.minimum(t1z, t2z))
    tf = np.minimum(np.minimum(np.maximum(t1x, t2x), np.maximum(t1y, t2y)), np.maximum(t1z, t2z))
    hit = (tn <= tf) & (tf > _T_EPS)
    t = np.where(tn > _T_EPS, tn, tf)
    return np.where(hit, t, np.inf)


def _cylinder_parts(ox, oy, oz, dx, dy, dz, radius, half_len):
    """Candidate hit distances for the lateral surface and the two cap disks."""
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - 4.0 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-b - sq) / (2.0 * a)
        t2 = (-b + sq) / (2.0 * a)
    lateral_ok = (disc >= 0.0) & (a > 0.0)

    def _lat_valid(t):
        z = oz + t * dz
        return lateral_ok & (t > _T_EPS) & (np.abs(z) <= half_len) & np.isfinite(t)

    t_lat = np.where(_lat_valid(t1), t1, np.where(_lat_valid(t2), t2, np.inf))

    def _cap_t(zcap):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (zcap - oz) / dz
            x = ox + t * dx
            y = oy + t * dy
            ok = (t > _T_EPS) & np.isfinite(t) & (x * x + y * y <= radius * radius)
        return np.where(ok, t, np.inf)

    return t_lat, _cap_t(half_len), _cap_t(-half_len)


def _cyl_t(ox, oy, oz, dx, dy, dz, radius, half_len):
    t_lat, t_top, t_bot = _cylinder_parts(ox, oy, oz, dx, dy, dz, radius, half_len)
    return np.minimum(t_lat, np.minimum(t_top, t_bot))


def _finite_or_zero(t):
    return np.where(np.isfinite(t), t, 0.0)


def _local_params(obj: ObjectInstance):
    if obj.shape is ShapeClass.SPHERE:
        return (float(obj.dims[0]),)
    if obj.shape is ShapeClass.CYLINDER:
        return (float(obj.dims[0]), float(obj.dims[2]) / 2.0)
    return (float(obj.dims[0]) / 2.0, float(obj.dims[1]) / 2.0, float(obj.dims[2]) / 2.0)


def _to_local(obj: ObjectInstance, origin, dirs):
    """Rotate/translate world rays into the object frame.

    ``origin`` is (..., 3) or (3,); ``dirs`` is (..., 3). Math runs in the
    dtype of ``dirs``.
    """
    dt = dirs.dtype
    rot = obj.pose.rotation.astype(dt)
    center = obj.pose.position.astype(dt)
    o_local = (np.asarray(origin, dtype=dt) - center) @ rot
    d_local = dirs @ rot
    return o_local, d_local


def _object_t(obj: ObjectInstance, origin, dirs):
    """Nearest positive hit distance per ray, inf where the ray misses."""
    o, d = _to_local(obj, origin, dirs)
    ox, oy, oz = o[..., 0], o[..., 1], o[..., 2]
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    if obj.shape is ShapeClass.SPHERE:
        return _sphere_t(ox, oy, oz, dx, dy, dz, *_local_params(obj))
    if obj.shape is ShapeClass.CYLINDER:
        return _cyl_t(ox, oy, oz, dx, dy, dz, *_local_params(obj))
    return _box_t(ox, oy, oz, dx, dy, dz, *_local_params(obj))


def _object_shade_attrs(obj: ObjectInstance, origin, dirs):
    """Hit distance plus local-frame normal and uv, for known-hit rays.

    Rays that miss get t = inf and meaningless normal/uv; callers only use
    attributes where the hit is known.
    """
    o, d = _to_local(obj, origin, dirs)
    ox, oy, oz = o[..., 0], o[..., 1], o[..., 2]
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    if obj.shape is ShapeClass.SPHERE:
        radius, = _local_params(obj)
        t = _sphere_t(ox, oy, oz, dx, dy, dz, radius)
        p = o + d * _finite_or_zero(t)[..., None]
        normal = p / radius
        u = (np.arctan2(p[..., 1], p[..., 0]) + math.pi) / (2.0 * math.pi)
        v = np.arccos(np.clip(p[..., 2] / radius, -1.0, 1.0)) / math.pi
    elif obj.shape is ShapeClass.CYLINDER:
        radius, half_len = _local_params(obj)
        t_lat, t_top, t_bot = _cylinder_parts(ox, oy, oz, dx, dy, dz, radius, half_len)
        stacked = np.stack([t_lat, t_top, t_bot])
        surface = np.argmin(stacked, axis=0)
        t = np.min(stacked, axis=0)
        p = o + d * _finite_or_zero(t)[..., None]
        lateral = surface == 0
        normal = np.empty_like(p)
        normal[..., 0] = np.where(lateral, p[..., 0] / radius, 0.0)
        normal[..., 1] = np.where(lateral, p[..., 1] / radius, 0.0)
        normal[..., 2] = np.where(lateral, 0.0, np.where(surface == 1, 1.0, -1.0))
        u_lat = (np.arctan2(p[..., 1], p[..., 0]) + math.pi) / (2.0 * math.pi)
        v_lat = (p[..., 2] + half_len) / (2.0 * half_len)
        u_cap = p[..., 0] / (2.0 * radius) + 0.5
        v_cap = p[..., 1] / (2.0 * radius) + 0.5
        u = np.where(lateral, u_lat, u_cap)
        v = np.where(lateral, v_lat, v_cap)
    else:
        hx, hy, hz = _local_params(obj)
        t = _box_t(ox, oy, oz, dx, dy, dz, hx, hy, hz)
        p = o + d * _finite_or_zero(t)[..., None]
        rel = np.stack([np.abs(p[..., 0]) / hx, np.abs(p[..., 1]) / hy, np.abs(p[..., 2]) / hz])
        axis = np.argmax(rel, axis=0)
        sign = np.sign(np.take_along_axis(np.moveaxis(p, -1, 0), axis[None], axis=0)[0])
        sign = np.where(sign == 0.0, 1.0, sign)
        normal = np.zeros_like(p)
        np.put_along_axis(np.moveaxis(normal, -1, 0), axis[None], sign[None], axis=0)
        # per-face planar uv from the two in-plane axes, in fixed order
        u_all = np.stack(
            [p[..., 1] / (2.0 * hy) + 0.5, p[..., 0] / (2.0 * hx) + 0.5, p[..., 0] / (2.0 * hx) + 0.5]
        )
        v_all = np.stack(
            [p[..., 2] / (2.0 * hz) + 0.5, p[..., 2] / (2.0 * hz) + 0.5, p[..., 1] / (2.0 * hy) + 0.5]
        )
        u = np.take_along_axis(u_all, axis[None], axis=0)[0]
        v = np.take_along_axis(v_all, axis[None], axis=0)[0]
    uv = np.stack([np.clip(u, 0.0, 1.0), np.clip(v, 0.0, 1.0)], axis=-1)
    return t, normal, uv


def intersect(ray: Ray, obj: ObjectInstance) -> Hit | None:
    """Nearest intersection of a single ray with one object, or None."""
    origin = ray.origin[None, :]
    dirs = ray.direction[None, :]
    t, normal_l, uv = _object_shade_attrs(obj, origin, dirs)
    t0 = float(t[0])
    if not math.isfinite(t0):
        return None
    rot = obj.pose.rotation
    normal_w = normal_l[0] @ rot.T
    if float(np.dot(normal_w, ray.direction)) > 0.0:
        normal_w = -normal_w
    point = ray.origin + t0 * ray.direction
    return Hit(t=t0, point=point, normal=normal_w, object_id=obj.id, uv=uv[0])


# ---------------------------------------------------------------------------
# shading

def _texel_lookup(texture: TextureImage, u, v):
    res = texture.resolution
    xi = np.minimum((np.asarray(u) * res).astype(np.int32), res - 1)
    yi = np.minimum((np.asarray(v) * res).astype(np.int32), res - 1)
    return texture.pixels[yi, xi]


def shade(
    hit: Hit,
    light: LightSource,
    texture: TextureImage,
    occluders: Sequence[ObjectInstance] = (),
) -> np.ndarray:
    """Lambert shading of one hit: texel * (ambient + intensity * cos * vis).

    ``vis`` drops to 0 when any occluder (other than the hit object itself)
    blocks the single shadow ray toward the light.
    """
    lvec = light.position - hit.point
    dist = float(np.linalg.norm(lvec))
    lhat = lvec / dist
    cos = max(0.0, float(np.dot(hit.normal, lhat)))
    vis = 1.0
    if cos > 0.0:
        origin = (hit.point + _SHADOW_OFFSET * hit.normal)[None, :]
        dirs = lhat[None, :]
        for obj in occluders:
            if obj.id == hit.object_id:
                continue
            t = float(_object_t(obj, origin, dirs)[0])
            if t < dist - _SHADOW_OFFSET:
                vis = 0.0
                break
    texel = _texel_lookup(texture, np.asarray(hit.uv[0]), np.asarray(hit.uv[1]))
    factor = light.ambient + light.intensity * cos * vis
    return np.clip(np.asarray(texel, dtype=np.float64) * factor, 0.0, 1.0)


# ---------------------------------------------------------------------------
# full-frame rendering

def _screen_rect(obj: ObjectInstance, camera: CameraModel, margin: int = 2):
    """Conservative pixel-rect bound of the object, or the full frame.

    Projects the 8 corners of the world-axis-aligned bounding cube; any
    corner at non-positive depth falls back to the full frame.
    """
    c = obj.pose.position
    rb = obj.bounding_radius
    full = (0, camera.height, 0, camera.width)
    xs, ys = [], []
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                px = project(camera, c + rb * np.array([sx, sy, sz]))
                if px is None:
                    return full
                xs.append(float(px[0]))
                ys.append(float(px[1]))
    c0 = max(0, int(math.floor(min(xs))) - margin)
    c1 = min(camera.width, int(math.ceil(max(xs))) + margin)
    r0 = max(0, int(math.floor(min(ys))) - margin)
    r1 = min(camera.height, int(math.ceil(max(ys))) + margin)
    if r0 >= r1 or c0 >= c1:
        return None
    return (r0, r1, c0, c1)


def _ground_shadow_rect(obj: ObjectInstance, light_pos, camera: CameraModel, margin: int = 2):
    """Pixel rect that can contain the object's shadow on the ground plane.

    Interval arithmetic over the projection from the light through the
    object's bounding sphere onto z = 0; falls back to the full frame when
    the light is not strictly above the bounding sphere.
    """
    full = (0, camera.height, 0, camera.width)
    c = obj.pose.position
    rb = obj.bounding_radius
    lx, ly, lz = (float(v) for v in light_pos)
    top = float(c[2]) + rb
    bot = float(c[2]) - rb
    if lz <= top + 1e-9:
        return full
    t_lo = lz / (lz - bot)
    t_hi = lz / (lz - top)

    def _axis_range(lc, clo, chi):
        e = [clo - lc, chi - lc]
        prods = [t * v for t in (t_lo, t_hi) for v in e]
        return lc + min(prods), lc + max(prods)

    x0, x1 = _axis_range(lx, float(c[0]) - rb, float(c[0]) + rb)
    y0, y1 = _axis_range(ly, float(c[1]) - rb, float(c[1]) + rb)
    xs, ys = [], []
    for wx, wy in ((x0, y0), (x0, y1), (x1, y0), (x1, y1)):
        px = project(camera, (wx, wy, 0.0))
        if px is None:
            return full
        xs.append(float(px[0]))
        ys.append(float(px[1]))
    c0 = max(0, int(math.floor(min(xs))) - margin)
    c1 = min(camera.width, int(math.ceil(max(xs))) + margin)
    r0 = max(0, int(math.floor(min(ys))) - margin)
    r1 = min(camera.height, int(math.ceil(max(ys))) + margin)
    if r0 >= r1 or c0 >= c1:
        return None
    return (r0, r1, c0, c1)


def _occlusion_mask(points, lhat, dist, objects, skip_id=None):
    """True where the segment from point (+offset) to the light is blocked."""
    blocked = np.zeros(points.shape[0], dtype=bool)
    for obj in objects:
        if skip_id is not None and obj.id == skip_id:
            continue
        t = _object_t(obj, points, lhat)
        blocked |= t < dist - _SHADOW_OFFSET
    return blocked


def _render_band(scene: SceneSpec, library: TextureLibrary, background, y0: int, y1: int):
    cam = scene.camera
    W = cam.width
    h = y1 - y0
    eye = cam.pose.position.astype(np.float32)
    rot = cam.pose.rotation.astype(np.float32)
    f = cam.focal_px

    # per-pixel world directions, deliberately not normalized: every kernel
    # tolerates non-unit directions, and hit ordering per pixel is unaffected
    px = ((np.arange(W, dtype=np.float32) + 0.5) - W / 2.0) / f
    py = ((np.arange(y0, y1, dtype=np.float32) + 0.5) - cam.height / 2.0) / f
    dirs = np.empty((h, W, 3), dtype=np.float32)
    for c in range(3):
        dirs[..., c] = px[None, :] * rot[c, 0] + py[:, None] * rot[c, 1] + rot[c, 2]

    t_best = np.full((h, W), np.inf, dtype=np.float32)
    id_best = np.full((h, W), BACKGROUND_ID, dtype=np.int32)

    # ground plane
    oz = float(eye[2])
    dz = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_g = -oz / dz
    ok = np.isfinite(t_g) & (t_g > _T_EPS)
    t_best[ok] = t_g[ok]
    id_best[ok] = GROUND_ID
    ground_normal_z = 1.0 if oz > 0.0 else -1.0

    rects = {}
    for obj in scene.objects:
        rect = _screen_rect(obj, cam)
        if rect is None:
            continue
        r0, r1, c0, c1 = rect
        r0, r1 = max(r0, y0), min(r1, y1)
        if r0 >= r1:
            continue
        rects[obj.id] = (r0, r1, c0, c1)
        sub = dirs[r0 - y0 : r1 - y0, c0:c1]
        t = _object_t(obj, eye, sub)
        tv = t_best[r0 - y0 : r1 - y0, c0:c1]
        iv = id_best[r0 - y0 : r1 - y0, c0:c1]
        closer = t < tv
        tv[closer] = t[closer]
        iv[closer] = obj.id

    light = scene.light
    lpos = light.position.astype(np.float32)
    ambient = np.float32(light.ambient)
    intensity = np.float32(light.intensity)

    # ground shading, computed full-frame (no index gathers); the result
    # becomes the output buffer and non-ground pixels are overwritten by the
    # background fill and the object passes
    bg32 = np.asarray(background, dtype=np.float32)
    ground_mask = id_best == GROUND_ID
    if not ground_mask.any():
        out = np.empty((h, W, 3), dtype=np.float32)
        out[...] = bg32
    else:
        tg_safe = np.where(ground_mask, t_best, np.float32(0.0))
        pts = eye[None, None, :] + dirs * tg_safe[..., None]
        tex = library.images[scene.ground_texture_id]
        inv_tile = np.float32(1.0 / GROUND_TILE)
        u = np.mod(pts[..., 0] * inv_tile, 1.0)
        v = np.mod(pts[..., 1] * inv_tile, 1.0)
        texel = _texel_lookup(tex, u, v)
        lvec = lpos[None, None, :] - pts
        dist = np.sqrt(np.sum(lvec * lvec, axis=-1))
        cos = np.maximum(lvec[..., 2] / dist * np.float32(ground_normal_z), 0.0)
        blocked = np.zeros((h, W), dtype=bool)
        z_off = np.float32(_SHADOW_OFFSET * ground_normal_z)
        for obj in scene.objects:
            rect = _ground_shadow_rect(obj, light.position, cam)
            if rect is None:
                continue
            r0, r1, c0, c1 = rect
            r0, r1 = max(r0 - y0, 0), min(r1 - y0, h)
            if r0 >= r1:
                continue
            sl = (slice(r0, r1), slice(c0, c1))
            origin = pts[sl].copy()
            origin[..., 2] += z_off
            sub_dist = dist[sl]
            lh = lvec[sl] / sub_dist[..., None]
            t_occ = _object_t(obj, origin, lh)
            blocked[sl] |= t_occ < sub_dist - _SHADOW_OFFSET
        factor = ambient + intensity * cos * (~blocked)
        out = np.clip(texel * factor[..., None], 0.0, 1.0)
        not_ground = ~ground_mask
        if not_ground.any():
            out[not_ground] = bg32

    # object shading
    for obj in scene.objects:
        rect = rects.get(obj.id)
        if rect is None:
            continue
        r0, r1, c0, c1 = rect
        sub_ids = id_best[r0 - y0 : r1 - y0, c0:c1]
        oys, oxs = np.nonzero(sub_ids == obj.id)
        if oys.size == 0:
            continue
        ys_full = oys + (r0 - y0)
        xs_full = oxs + c0
        d = dirs[ys_full, xs_full]
        t, normal_l, uv = _object_shade_attrs(obj, eye, d)
        pts = eye[None, :] + d * t[:, None]
        rot_o = obj.pose.rotation.astype(np.float32)
        normal = normal_l @ rot_o.T
        flip = np.sum(normal * d, axis=1) > 0.0
        normal[flip] = -normal[flip]
        tex = library.images[obj.texture_id]
        texel = _texel_lookup(tex, uv[..., 0], uv[..., 1])
        lvec = lpos[None, :] - pts
        dist = np.sqrt(np.sum(lvec * lvec, axis=1))
        lhat = lvec / dist[:, None]
        cos = np.maximum(np.sum(normal * lhat, axis=1), 0.0)
        origin = pts + _SHADOW_OFFSET * normal
        # convex primitives cannot shadow themselves from an outward offset
        blocked = _occlusion_mask(origin, lhat, dist, scene.objects, skip_id=obj.id)
        factor = ambient + intensity * cos * (~blocked)
        out[ys_full, xs_full] = np.clip(texel * factor[:, None], 0.0, 1.0)

    return out, id_best


def render(
    scene: SceneSpec,
    library: TextureLibrary,
    *,
    background=DEFAULT_BACKGROUND,
    workers: int | None = None,
) -> RenderOutput:
    """Render the scene's color image and object-id mask.

    Pure function of (scene, library, background); the worker count changes
    only how rows are scheduled.
    """
    n_tex = len(library.images)
    for obj in scene.objects:
        if not 0 <= obj.texture_id < n_tex:
            raise BadTextureId(f"object {obj.id} references texture {obj.texture_id} of {n_tex}")
    if not 0 <= scene.ground_texture_id < n_tex:
        raise BadTextureId(f"ground references texture {scene.ground_texture_id} of {n_tex}")

    H = scene.camera.height
    workers = min(resolve_workers(workers), H)
    if workers <= 1:
        color, mask = _render_band(scene, library, background, 0, H)
        return RenderOutput(color=color, id_mask=mask)

    bounds = np.linspace(0, H, workers + 1, dtype=int)
    bands = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
    with ThreadPoolExecutor(max_workers=len(bands)) as pool:
        parts = list(pool.map(lambda b: _render_band(scene, library, background, *b), bands))
    color = np.concatenate([p[0] for p in parts], axis=0)
    mask = np.concatenate([p[1] for p in parts], axis=0)
    return RenderOutput(color=color, id_mask=mask)


# ---------------------------------------------------------------------------
# resolution reduction

def downscale(image: np.ndarray, factor: int = 2) -> np.ndarray:
    """Box-filter downscale: each output pixel is the mean of a factor x factor block."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return image
    h, w = image.shape[:2]
    if h % factor or w % factor:
        raise IndivisibleDimensions(f"{w}x{h} not divisible by {factor}")
    if image.ndim == 2:
        return image.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))
    c = image.shape[2]
    return image.reshape(h // factor, factor, w // factor, factor, c).mean(axis=(1, 3))


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] float image to uint8 with round-half-up."""
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
