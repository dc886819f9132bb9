"""Image and raw-plane file IO: 8-bit PNGs for color/masks, WFFB planes for floats.

Plane files are little-endian float32 with a 16-byte header
{magic "WFFB", height u32, width u32, channels u32}.
"""
from __future__ import annotations

import struct

import numpy as np
from PIL import Image

PLANE_MAGIC = b"WFFB"
_PLANE_HEADER = struct.Struct("<4sIII")


def save_png(color: np.ndarray, path) -> None:
    """Write an [0,1] float image (H,W,3) or (H,W) as an 8-bit PNG."""
    arr = np.clip(np.round(np.asarray(color) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Read a PNG back to [0,1] float64 (H,W,3) or (H,W)."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    return arr.astype(np.float64) / 255.0


def png_bytes(color: np.ndarray) -> bytes:
    import io

    arr = np.clip(np.round(np.asarray(color) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def save_mask_png(mask: np.ndarray, path) -> None:
    """Write a 0/1 mask as a single-channel PNG with values 0/255."""
    Image.fromarray((np.asarray(mask).astype(np.uint8) * 255)).save(path, format="PNG")


def load_mask_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr >= 128).astype(np.uint8)


def save_plane(plane: np.ndarray, path) -> None:
    plane = np.asarray(plane, dtype=np.float32)
    if plane.ndim == 2:
        h, w, c = plane.shape[0], plane.shape[1], 1
    elif plane.ndim == 3:
        h, w, c = plane.shape
    else:
        raise ValueError(f"plane must be 2D or 3D, got shape {plane.shape}")
    with open(path, "wb") as f:
        f.write(_PLANE_HEADER.pack(PLANE_MAGIC, h, w, c))
        f.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())


def load_plane(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _PLANE_HEADER.size:
        raise ValueError("plane file shorter than header")
    magic, h, w, c = _PLANE_HEADER.unpack_from(data, 0)
    if magic != PLANE_MAGIC:
        raise ValueError(f"bad plane magic {magic!r}")
    expected = _PLANE_HEADER.size + h * w * c * 4
    if len(data) != expected:
        raise ValueError(f"plane file has {len(data)} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=_PLANE_HEADER.size).astype(np.float64)
    return arr.reshape(h, w) if c == 1 else arr.reshape(h, w, c)
