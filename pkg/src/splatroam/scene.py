"""Splat-based world representation, covariance math, procedural scenes, and scene files.

A scene is a struct-of-arrays collection of anisotropic Gaussian splats.
Arrays are float64 in memory; the on-disk format quantizes to float32
(little-endian, magic "WFSC"), so a loaded scene round-trips bit-exactly.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import quat_to_rot

SCENE_MAGIC = b"WFSC"
SCENE_VERSION = 1

MIN_SCALE = 1e-4
MAX_SCALE = 1e3
LOG_SCALE_MIN = math.log(MIN_SCALE)
LOG_SCALE_MAX = math.log(MAX_SCALE)

PROVENANCES = ("ground_truth", "coarse", "refined", "checkpoint")
_PROVENANCE_TO_TAG = {name: i for i, name in enumerate(PROVENANCES)}

_SPLAT_RECORD = struct.Struct("<3f3f4f3ff")  # center, log_scale, quat(wxyz), color, opacity_logit
_HEADER = struct.Struct("<4sIQ3f6fBQ")  # magic, version, count, background, bounds, provenance, seed


class SceneFormatError(ValueError):
    """Malformed scene file; carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SceneVersionError(ValueError):
    def __init__(self, found: int, expected: int):
        super().__init__(f"scene file version {found} not supported (expected {expected})")
        self.found = found
        self.expected = expected


class EmptySceneError(ValueError):
    pass


@dataclass(frozen=True)
class Splat:
    """One anisotropic Gaussian: center, per-axis log std-dev, orientation, color, opacity."""

    center: np.ndarray
    log_scale: np.ndarray
    quaternion: np.ndarray  # (w, x, y, z), unit
    color: np.ndarray
    opacity_logit: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "log_scale", np.asarray(self.log_scale, dtype=np.float64).reshape(3))
        object.__setattr__(self, "quaternion", np.asarray(self.quaternion, dtype=np.float64).reshape(4))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64).reshape(3))


@dataclass
class SceneMeta:
    provenance: str = "ground_truth"
    seed: int = 0

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass
class SplatScene:
    """Struct-of-arrays splat collection plus bounds, background color, and provenance.

    centers (N,3), log_scales (N,3), quaternions (N,4) as (w,x,y,z),
    colors (N,3) in [0,1], opacity_logits (N,). bounds is (2,3) = (lo, hi).
    """

    centers: np.ndarray
    log_scales: np.ndarray
    quaternions: np.ndarray
    colors: np.ndarray
    opacity_logits: np.ndarray
    bounds: np.ndarray
    background: np.ndarray
    meta: SceneMeta = field(default_factory=SceneMeta)

    def __post_init__(self):
        self.centers = np.ascontiguousarray(self.centers, dtype=np.float64).reshape(-1, 3)
        n = self.centers.shape[0]
        self.log_scales = np.ascontiguousarray(self.log_scales, dtype=np.float64).reshape(n, 3)
        self.quaternions = np.ascontiguousarray(self.quaternions, dtype=np.float64).reshape(n, 4)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64).reshape(n, 3)
        self.opacity_logits = np.ascontiguousarray(self.opacity_logits, dtype=np.float64).reshape(n)
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        self.background = np.asarray(self.background, dtype=np.float64).reshape(3)

    @property
    def num_splats(self) -> int:
        return self.centers.shape[0]

    def splat(self, i: int) -> Splat:
        return Splat(
            center=self.centers[i],
            log_scale=self.log_scales[i],
            quaternion=self.quaternions[i],
            color=self.colors[i],
            opacity_logit=float(self.opacity_logits[i]),
        )

    def copy(self, provenance: str | None = None) -> "SplatScene":
        meta = SceneMeta(provenance or self.meta.provenance, self.meta.seed)
        return SplatScene(
            centers=self.centers.copy(),
            log_scales=self.log_scales.copy(),
            quaternions=self.quaternions.copy(),
            colors=self.colors.copy(),
            opacity_logits=self.opacity_logits.copy(),
            bounds=self.bounds.copy(),
            background=self.background.copy(),
            meta=meta,
        )

    def quantized(self, provenance: str | None = None) -> "SplatScene":
        """Round every field through float32, matching disk precision."""
        meta = SceneMeta(provenance or self.meta.provenance, self.meta.seed)
        f32 = lambda a: a.astype(np.float32).astype(np.float64)
        return SplatScene(
            centers=f32(self.centers),
            log_scales=f32(self.log_scales),
            quaternions=f32(self.quaternions),
            colors=f32(self.colors),
            opacity_logits=f32(self.opacity_logits),
            bounds=f32(self.bounds),
            background=f32(self.background),
            meta=meta,
        )


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def covariance(splat: Splat) -> np.ndarray:
    """3x3 covariance R diag(exp(2*log_scale)) R^T of one splat.

    The quaternion must be unit to within 1e-6; scales must lie in the
    representable range.
    """
    q = splat.quaternion
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"quaternion norm {norm:.8f} is not 1 within 1e-6")
    s = splat.log_scale
    if np.any(s < LOG_SCALE_MIN - 1e-12) or np.any(s > LOG_SCALE_MAX + 1e-12):
        raise ValueError(f"log_scale {s} outside [{LOG_SCALE_MIN:.4f}, {LOG_SCALE_MAX:.4f}]")
    r = quat_to_rot(q)
    cov = (r * np.exp(2.0 * s)) @ r.T
    return 0.5 * (cov + cov.T)


def scene_covariances(scene: SplatScene) -> np.ndarray:
    """(N,3,3) covariances for all splats, vectorized."""
    r = quat_to_rot(scene.quaternions)
    d = np.exp(2.0 * scene.log_scales)  # (N,3)
    cov = np.einsum("nij,nj,nkj->nik", r, d, r)
    return 0.5 * (cov + np.swapaxes(cov, 1, 2))


@dataclass(frozen=True)
class SceneGenConfig:
    """Procedural ground-truth scene: a ground plane plus boxes, ellipsoids, and trees.

    `splat_density` is splats per unit surface area. `color_noise` jitters
    palette colors per splat; `texture_freq` adds a per-cell checker tint on
    the ground (larger values read as busier, more "photographic" texture).
    """

    seed: int = 0
    extent: float = 10.0
    ground: int = 1
    boxes: int = 3
    ellipsoids: int = 2
    trees: int = 2
    palette: tuple = (
        (0.75, 0.72, 0.65),
        (0.55, 0.35, 0.25),
        (0.35, 0.45, 0.70),
        (0.80, 0.60, 0.30),
        (0.50, 0.55, 0.50),
    )
    splat_density: float = 6.0
    color_noise: float = 0.05
    texture_freq: float = 1.0
    background: tuple = (0.62, 0.74, 0.86)

    def __post_init__(self):
        if self.extent <= 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        if self.splat_density <= 0:
            raise ValueError(f"splat_density must be positive, got {self.splat_density}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "extent": self.extent,
            "counts": {"ground": self.ground, "box": self.boxes, "ellipsoid": self.ellipsoids, "tree": self.trees},
            "palette": [list(c) for c in self.palette],
            "splat_density": self.splat_density,
            "color_noise": self.color_noise,
            "texture_freq": self.texture_freq,
            "background": list(self.background),
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "SceneGenConfig":
        counts = data.get("counts", {})
        return cls(
            seed=int(data.get("seed", 0)),
            extent=float(data.get("extent", 10.0)),
            ground=int(counts.get("ground", 1)),
            boxes=int(counts.get("box", 3)),
            ellipsoids=int(counts.get("ellipsoid", 2)),
            trees=int(counts.get("tree", 2)),
            palette=tuple(tuple(c) for c in data.get("palette", cls.palette)),
            splat_density=float(data.get("splat_density", 6.0)),
            color_noise=float(data.get("color_noise", 0.05)),
            texture_freq=float(data.get("texture_freq", 1.0)),
            background=tuple(data.get("background", cls.background)),
        )


def ground_splat_count(config: SceneGenConfig) -> int:
    """Splats on the ground plane: a ceil(sqrt(density * extent^2)) square grid."""
    side = math.ceil(math.sqrt(config.splat_density) * config.extent)
    return side * side


def box_splat_counts(dims: np.ndarray, density: float) -> list[int]:
    """Per-face splat counts for a box with side lengths dims (x, y, z).

    Faces are covered by grids sized ceil(sqrt(density)*a) x ceil(sqrt(density)*b);
    the bottom face is omitted (boxes sit on the ground).
    """
    s = math.sqrt(density)
    nx = max(1, math.ceil(s * dims[0]))
    ny = max(1, math.ceil(s * dims[1]))
    nz = max(1, math.ceil(s * dims[2]))
    # faces: +y top, then the four sides (two xz-normal, two yz-normal)
    return [nx * nz, nx * ny, nx * ny, ny * nz, ny * nz]


def ellipsoid_splat_count(radii: np.ndarray, density: float) -> int:
    """Thomsen's approximation of the ellipsoid surface area times density."""
    a, b, c = radii
    p = 1.6075
    area = 4 * math.pi * (((a * b) ** p + (a * c) ** p + (b * c) ** p) / 3.0) ** (1.0 / p)
    return max(8, math.ceil(area * density))


def tree_splat_counts(trunk_h: float, trunk_r: float, cone_h: float, cone_r: float, density: float) -> tuple[int, int]:
    trunk_area = 2 * math.pi * trunk_r * trunk_h
    cone_area = math.pi * cone_r * math.sqrt(cone_h * cone_h + cone_r * cone_r)
    return max(6, math.ceil(trunk_area * density * 2)), max(12, math.ceil(cone_area * density * 2))


def _fibonacci_directions(n: int) -> np.ndarray:
    """n well-spread unit vectors (golden-angle spiral on the sphere)."""
    i = np.arange(n, dtype=np.float64)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    y = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    return np.stack([r * np.cos(phi), y, r * np.sin(phi)], axis=1)


def _quat_from_z_to(normals: np.ndarray) -> np.ndarray:
    """Quaternions rotating the +z axis onto each unit normal (N,3) -> (N,4)."""
    z = np.array([0.0, 0.0, 1.0])
    n = np.asarray(normals, dtype=np.float64)
    dots = n @ z
    quats = np.empty((n.shape[0], 4), dtype=np.float64)
    axis = np.cross(np.broadcast_to(z, n.shape), n)
    s = np.linalg.norm(axis, axis=1)
    regular = s > 1e-12
    half = np.arccos(np.clip(dots, -1.0, 1.0)) * 0.5
    quats[regular, 0] = np.cos(half[regular])
    quats[regular, 1:] = axis[regular] / s[regular, None] * np.sin(half[regular])[:, None]
    # parallel or anti-parallel to z
    quats[~regular & (dots > 0), :] = (1.0, 0.0, 0.0, 0.0)
    quats[~regular & (dots <= 0), :] = (0.0, 1.0, 0.0, 0.0)
    norms = np.linalg.norm(quats, axis=1, keepdims=True)
    return quats / norms


class _SceneBuilder:
    def __init__(self, config: SceneGenConfig, rng: np.random.Generator):
        self.cfg = config
        self.rng = rng
        self.centers: list[np.ndarray] = []
        self.log_scales: list[np.ndarray] = []
        self.quats: list[np.ndarray] = []
        self.colors: list[np.ndarray] = []
        self.opacities: list[np.ndarray] = []

    def add(self, centers, log_scales, quats, base_color, opacity_logit: float, jitter: float | None = None):
        n = len(centers)
        jitter = self.cfg.color_noise if jitter is None else jitter
        noise = self.rng.uniform(-jitter, jitter, size=(n, 3))
        colors = np.clip(np.asarray(base_color, dtype=np.float64) + noise, 0.0, 1.0)
        self.centers.append(np.asarray(centers, dtype=np.float64))
        self.log_scales.append(np.asarray(log_scales, dtype=np.float64))
        self.quats.append(np.asarray(quats, dtype=np.float64))
        self.colors.append(colors)
        self.opacities.append(np.full(n, opacity_logit, dtype=np.float64))

    def pick_color(self):
        return np.asarray(self.cfg.palette[self.rng.integers(len(self.cfg.palette))], dtype=np.float64)


def _add_ground(b: _SceneBuilder):
    cfg = b.cfg
    side = math.ceil(math.sqrt(cfg.splat_density) * cfg.extent)
    spacing = cfg.extent / side
    ax = (np.arange(side) + 0.5) * spacing - cfg.extent / 2.0
    gx, gz = np.meshgrid(ax, ax, indexing="ij")
    centers = np.stack([gx.ravel(), np.zeros(side * side), gz.ravel()], axis=1)
    scale = np.log(np.array([spacing * 0.75, 0.01, spacing * 0.75]))
    log_scales = np.tile(scale, (side * side, 1))
    quats = np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (side * side, 1))
    base = b.pick_color()
    # checker tint keyed to grid parity gives the plane visible texture
    checker = ((gx.ravel() * cfg.texture_freq / spacing).astype(np.int64) + (gz.ravel() * cfg.texture_freq / spacing).astype(np.int64)) % 2
    colors = np.where(checker[:, None] == 0, base, np.clip(base * 0.8, 0, 1))
    noise = b.rng.uniform(-cfg.color_noise, cfg.color_noise, size=colors.shape)
    b.centers.append(centers)
    b.log_scales.append(log_scales)
    b.quats.append(quats)
    b.colors.append(np.clip(colors + noise, 0, 1))
    b.opacities.append(np.full(side * side, logit(0.95)))


def _add_box(b: _SceneBuilder):
    cfg = b.cfg
    rng = b.rng
    dims = rng.uniform(0.6, 1.8, size=3) * cfg.extent / 10.0 * 1.7
    pos = np.array([rng.uniform(-0.35, 0.35), rng.uniform(-0.22, 0.35)]) * cfg.extent
    base = b.pick_color()
    cx, cz = pos
    s = math.sqrt(cfg.splat_density)
    thin = math.log(0.01)

    def face_grid(n_a, n_b, len_a, len_b):
        a = (np.arange(n_a) + 0.5) / n_a * len_a - len_a / 2.0
        bb = (np.arange(n_b) + 0.5) / n_b * len_b - len_b / 2.0
        ga, gb = np.meshgrid(a, bb, indexing="ij")
        return ga.ravel(), gb.ravel(), np.log(np.array([len_a / n_a * 0.75, len_b / n_b * 0.75]))

    nx = max(1, math.ceil(s * dims[0]))
    ny = max(1, math.ceil(s * dims[1]))
    nz = max(1, math.ceil(s * dims[2]))

    # top face (+y): flat in y
    ga, gb, ls = face_grid(nx, nz, dims[0], dims[2])
    centers = np.stack([cx + ga, np.full_like(ga, dims[1]), cz + gb], axis=1)
    log_scales = np.tile([ls[0], thin, ls[1]], (len(ga), 1))
    quats = np.tile([1.0, 0, 0, 0], (len(ga), 1))
    b.add(centers, log_scales, quats, base, logit(0.95))

    # front/back faces (z normal)
    ga, gb, ls = face_grid(nx, ny, dims[0], dims[1])
    for zs in (-1.0, 1.0):
        centers = np.stack([cx + ga, gb + dims[1] / 2.0, np.full_like(ga, cz + zs * dims[2] / 2.0)], axis=1)
        log_scales = np.tile([ls[0], ls[1], thin], (len(ga), 1))
        quats = np.tile([1.0, 0, 0, 0], (len(ga), 1))
        b.add(centers, log_scales, quats, base * 0.9, logit(0.95))

    # left/right faces (x normal)
    ga, gb, ls = face_grid(ny, nz, dims[1], dims[2])
    for xs in (-1.0, 1.0):
        centers = np.stack([np.full_like(ga, cx + xs * dims[0] / 2.0), ga + dims[1] / 2.0, cz + gb], axis=1)
        log_scales = np.tile([thin, ls[0], ls[1]], (len(ga), 1))
        quats = np.tile([1.0, 0, 0, 0], (len(ga), 1))
        b.add(centers, log_scales, quats, base * 0.8, logit(0.95))


def _add_ellipsoid(b: _SceneBuilder):
    cfg = b.cfg
    rng = b.rng
    radii = rng.uniform(0.5, 1.2, size=3) * cfg.extent / 10.0 * 1.6
    pos = np.array([rng.uniform(-0.35, 0.35), rng.uniform(-0.22, 0.35)]) * cfg.extent
    count = ellipsoid_splat_count(radii, cfg.splat_density)
    dirs = _fibonacci_directions(count)
    surface = dirs * radii
    centers = surface + np.array([pos[0], radii[1], pos[1]])
    normals = dirs / radii
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    quats = _quat_from_z_to(normals)
    patch = math.sqrt(4 * math.pi * float(np.prod(radii) ** (2 / 3)) / count)
    log_scales = np.tile(np.log([patch, patch, 0.01]), (count, 1))
    b.add(centers, log_scales, quats, b.pick_color(), logit(0.93))


def _add_tree(b: _SceneBuilder):
    cfg = b.cfg
    rng = b.rng
    unit = cfg.extent / 10.0
    trunk_h, trunk_r = 1.2 * unit, 0.12 * unit
    cone_h, cone_r = 2.2 * unit, 0.9 * unit
    pos = np.array([rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.4)]) * cfg.extent
    n_trunk, n_cone = tree_splat_counts(trunk_h, trunk_r, cone_h, cone_r, cfg.splat_density)

    ang = rng.uniform(0, 2 * math.pi, size=n_trunk)
    h = rng.uniform(0, trunk_h, size=n_trunk)
    centers = np.stack([pos[0] + trunk_r * np.cos(ang), h, pos[1] + trunk_r * np.sin(ang)], axis=1)
    normals = np.stack([np.cos(ang), np.zeros(n_trunk), np.sin(ang)], axis=1)
    quats = _quat_from_z_to(normals)
    patch = math.sqrt(2 * math.pi * trunk_r * trunk_h / n_trunk) * 1.5
    log_scales = np.tile(np.log([patch, patch, 0.008 * unit + 0.002]), (n_trunk, 1))
    b.add(centers, log_scales, quats, np.array([0.42, 0.28, 0.18]), logit(0.95))

    ang = rng.uniform(0, 2 * math.pi, size=n_cone)
    t = np.sqrt(rng.uniform(0, 1, size=n_cone))  # area-uniform along the slant
    rr = cone_r * (1 - t)
    yy = trunk_h + cone_h * t
    centers = np.stack([pos[0] + rr * np.cos(ang), yy, pos[1] + rr * np.sin(ang)], axis=1)
    slant = math.sqrt(cone_h**2 + cone_r**2)
    normals = np.stack([np.cos(ang) * cone_h / slant, np.full(n_cone, cone_r / slant), np.sin(ang) * cone_h / slant], axis=1)
    quats = _quat_from_z_to(normals)
    patch = math.sqrt(math.pi * cone_r * slant / n_cone) * 1.6
    log_scales = np.tile(np.log([patch, patch, 0.01 * unit + 0.002]), (n_cone, 1))
    b.add(centers, log_scales, quats, np.array([0.18, 0.45, 0.20]), logit(0.93))


def generate_scene(config: SceneGenConfig) -> SplatScene:
    """Deterministic procedural scene from the config seed.

    Emits a textured ground plane, face-covered boxes, surface-covered
    ellipsoids, and trees (green cone over a brown trunk). All values are
    float32-representable so scene files round-trip bit-exactly.
    """
    if config.ground + config.boxes + config.ellipsoids + config.trees == 0:
        raise EmptySceneError("scene config requests zero primitives of every kind")
    rng = np.random.default_rng(config.seed)
    b = _SceneBuilder(config, rng)
    if config.ground:
        _add_ground(b)
    for _ in range(config.boxes):
        _add_box(b)
    for _ in range(config.ellipsoids):
        _add_ellipsoid(b)
    for _ in range(config.trees):
        _add_tree(b)

    centers = np.concatenate(b.centers)
    log_scales = np.clip(np.concatenate(b.log_scales), LOG_SCALE_MIN, LOG_SCALE_MAX)
    quats = np.concatenate(b.quats)
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    colors = np.concatenate(b.colors)
    opacities = np.concatenate(b.opacities)

    max_scale = float(np.exp(log_scales).max())
    lo = centers.min(axis=0) - 3.0 * max_scale
    hi = centers.max(axis=0) + 3.0 * max_scale
    scene = SplatScene(
        centers=centers,
        log_scales=log_scales,
        quaternions=quats,
        colors=colors,
        opacity_logits=opacities,
        bounds=np.stack([lo, hi]),
        background=np.asarray(config.background, dtype=np.float64),
        meta=SceneMeta(provenance="ground_truth", seed=config.seed),
    )
    return scene.quantized()


def save_scene(scene: SplatScene, path) -> None:
    """Write the binary scene file (see module docstring for the layout)."""
    n = scene.num_splats
    header = _HEADER.pack(
        SCENE_MAGIC,
        SCENE_VERSION,
        n,
        *scene.background.astype(np.float32),
        *scene.bounds.astype(np.float32).ravel(),
        _PROVENANCE_TO_TAG[scene.meta.provenance],
        scene.meta.seed & 0xFFFFFFFFFFFFFFFF,
    )
    records = np.empty((n, 14), dtype="<f4")
    records[:, 0:3] = scene.centers
    records[:, 3:6] = scene.log_scales
    records[:, 6:10] = scene.quaternions
    records[:, 10:13] = scene.colors
    records[:, 13] = scene.opacity_logits
    with open(path, "wb") as f:
        f.write(header)
        f.write(records.tobytes())


def load_scene(path) -> SplatScene:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise SceneFormatError("file shorter than header", len(data))
    magic, version, count, b0, b1, b2, *rest = _HEADER.unpack_from(data, 0)
    if magic != SCENE_MAGIC:
        raise SceneFormatError(f"bad magic {magic!r}", 0)
    if version != SCENE_VERSION:
        raise SceneVersionError(version, SCENE_VERSION)
    bounds = np.array(rest[0:6], dtype=np.float64).reshape(2, 3)
    tag, seed = rest[6], rest[7]
    if tag >= len(PROVENANCES):
        raise SceneFormatError(f"unknown provenance tag {tag}", _HEADER.size - 9)
    expected = _HEADER.size + count * _SPLAT_RECORD.size
    if len(data) != expected:
        raise SceneFormatError(f"expected {expected} bytes for {count} splats, file has {len(data)}", min(len(data), expected))
    records = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(count, 14).astype(np.float64)
    return SplatScene(
        centers=records[:, 0:3],
        log_scales=records[:, 3:6],
        quaternions=records[:, 6:10],
        colors=records[:, 10:13],
        opacity_logits=records[:, 13],
        bounds=bounds,
        background=np.array([b0, b1, b2], dtype=np.float64),
        meta=SceneMeta(provenance=PROVENANCES[tag], seed=seed),
    )
