"""Image container, pixel arithmetic, geometric augmentation and file I/O.

Pixel layout is planar channel-major: ``data`` has shape (C, H, W) with
float values in [0, 1]. Images are immutable by convention -- every public
operation returns a new Image and never writes through to its input.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage
from scipy.ndimage import minimum_filter

AUGMENT_OPS = ("identity", "rot90", "rot180", "rot270", "hflip")


class ImagingError(ValueError):
    pass


@dataclass(frozen=True)
class Image:
    """Planar (C, H, W) float image with values in [0, 1]."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise ImagingError(f"expected (C, H, W) array, got shape {arr.shape}")
        if arr.shape[0] not in (1, 3):
            raise ImagingError(f"channels must be 1 or 3, got {arr.shape[0]}")
        if arr.shape[1] == 0 or arr.shape[2] == 0:
            raise ImagingError("zero-sized image")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ImagingError("pixel values outside [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def to_gray(self) -> "Image":
        """Luma conversion 0.299 R + 0.587 G + 0.114 B (identity on gray)."""
        if self.channels == 1:
            return self
        w = np.array([0.299, 0.587, 0.114])
        return Image(np.tensordot(w, self.data, axes=(0, 0))[None])


def clamp01(arr: np.ndarray) -> np.ndarray:
    return np.clip(arr, 0.0, 1.0)


def from_array(arr: np.ndarray, clamp: bool = False) -> Image:
    """Wrap a (C, H, W) or (H, W) float array; optionally clamp into range."""
    arr = np.asarray(arr, dtype=np.float64)
    if clamp:
        arr = clamp01(arr)
    return Image(arr)


def quantize(img: Image) -> np.ndarray:
    """(C, H, W) uint8 bytes; round(v*255) with ties away from zero."""
    return np.floor(img.data * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def _from_bytes(raw: np.ndarray) -> Image:
    return Image(raw.astype(np.float64) / 255.0)


def load_image(path) -> Image:
    """Load an 8-bit PNG or binary PPM (P6) file as a float Image."""
    with open(path, "rb") as f:
        head = f.read(2)
        f.seek(0)
        payload = f.read()
    if head == b"P6":
        return _decode_ppm(payload)
    if head == b"\x89P":
        pil = PILImage.open(io.BytesIO(payload))
        if pil.mode not in ("L", "RGB"):
            pil = pil.convert("RGB")
        arr = np.asarray(pil)
        if arr.ndim == 2:
            arr = arr[None]
        else:
            arr = arr.transpose(2, 0, 1)
        return _from_bytes(arr)
    raise ImagingError(f"unsupported image format in {path!r}")


def save_image(img: Image, path) -> None:
    """Write an 8-bit PPM (P6, for .ppm paths) or PNG file."""
    path = str(path)
    raw = quantize(img)
    if path.endswith(".ppm"):
        with open(path, "wb") as f:
            f.write(_encode_ppm(raw))
    else:
        if raw.shape[0] == 1:
            pil = PILImage.fromarray(raw[0], mode="L")
        else:
            pil = PILImage.fromarray(raw.transpose(1, 2, 0), mode="RGB")
        pil.save(path, format="PNG")


def _decode_ppm(payload: bytes) -> Image:
    # P6 header: magic, width, height, maxval, single whitespace, raster
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(payload) and payload[pos : pos + 1].isspace():
            pos += 1
        if payload[pos : pos + 1] == b"#":
            while pos < len(payload) and payload[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(payload) and not payload[pos : pos + 1].isspace():
            pos += 1
        fields.append(payload[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(v) for v in fields)
    except ValueError as e:
        raise ImagingError("malformed PPM header") from e
    if maxval != 255:
        raise ImagingError(f"only maxval 255 supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise ImagingError("zero dimensions in PPM header")
    n = width * height * 3
    raster = payload[pos : pos + n]
    if len(raster) != n:
        raise ImagingError("truncated PPM raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return _from_bytes(arr.transpose(2, 0, 1))


def _encode_ppm(raw: np.ndarray) -> bytes:
    if raw.shape[0] == 1:
        raw = np.repeat(raw, 3, axis=0)
    c, h, w = raw.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + raw.transpose(1, 2, 0).tobytes()


def min_filter(img: Image, patch: int) -> Image:
    """Sliding-window minimum with replicate-edge padding (single channel)."""
    if patch < 1 or patch % 2 == 0:
        raise ImagingError(f"patch must be odd and >= 1, got {patch}")
    if img.channels != 1:
        raise ImagingError("min_filter expects a single-channel image")
    if patch == 1:
        return img
    out = minimum_filter(img.data[0], size=patch, mode="nearest")
    return Image(out[None])


def augment(pair, op: str, crop=None):
    """Apply the same crop + geometric op to both images of a pair.

    crop is (x, y, size) applied before the rotation/flip; None keeps the
    full frame. Rotations are counter-clockwise.
    """
    if op not in AUGMENT_OPS:
        raise ImagingError(f"unknown augment op {op!r}")
    a, b = pair
    return _augment_one(a, op, crop), _augment_one(b, op, crop)


def _augment_one(img: Image, op: str, crop) -> Image:
    arr = img.data
    if crop is not None:
        x, y, size = crop
        if x < 0 or y < 0 or y + size > img.height or x + size > img.width:
            raise ImagingError(f"crop {crop} out of bounds for {img.height}x{img.width}")
        arr = arr[:, y : y + size, x : x + size]
    if op == "identity":
        pass
    elif op == "hflip":
        arr = arr[:, :, ::-1]
    elif op == "rot90":
        arr = np.rot90(arr, k=1, axes=(1, 2))
    elif op == "rot180":
        arr = np.rot90(arr, k=2, axes=(1, 2))
    elif op == "rot270":
        arr = np.rot90(arr, k=3, axes=(1, 2))
    return Image(arr.copy())
