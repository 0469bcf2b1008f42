"""Frames, colour conversion, bilinear resampling and integral images.

Pixels are float64 in [0, 1], stored as an (height, width, channels) array.
Pixel (i, j) covers the unit square [j, j+1] x [i, i+1]; its sample point is
the square's centre.  Every resampling routine uses that convention, so an
integer-aligned crop of the same size is an exact copy.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EmptyTarget, OutOfFrame, UnsupportedChannelCount
from .geometry import Box

LUMA = np.array([0.299, 0.587, 0.114])

# sRGB primaries, D65 white
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_D65_WHITE = _RGB_TO_XYZ.sum(axis=1)

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")


@dataclass(frozen=True, eq=False)
class Frame:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise UnsupportedChannelCount(f"expected 1 or 3 channels, got shape {px.shape}")
        if px.size and not (np.all(np.isfinite(px)) and px.min() >= -1e-9 and px.max() <= 1 + 1e-9):
            raise ValueError("pixel values must lie in [0, 1]")
        if px is self.pixels:
            px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def plane(self) -> np.ndarray:
        """Single-channel frames as a 2-D view."""
        return self.pixels[:, :, 0] if self.channels == 1 else self.pixels

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


def load_frame(path) -> Frame:
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I", "F", "1", "LA"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return Frame(arr / 255.0)


def save_frame(frame: Frame, path) -> None:
    arr = np.round(np.clip(frame.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        img = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        img = Image.fromarray(arr, mode="RGB")
    img.save(path)


def list_frame_files(directory) -> list[Path]:
    """Image files of a frame directory, in lexicographic order."""
    directory = Path(directory)
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def to_grayscale(f: Frame) -> Frame:
    if f.channels == 1:
        return f
    if f.channels != 3:
        raise UnsupportedChannelCount(f"cannot convert {f.channels} channels to gray")
    return Frame(f.pixels @ LUMA)


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Unscaled CIE L*a*b* (L in [0, 100]) for an (..., 3) sRGB array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = (lin @ _RGB_TO_XYZ.T) / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(xyz > delta ** 3, np.cbrt(xyz), xyz / (3 * delta ** 2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def rescale_lab(lab: np.ndarray) -> np.ndarray:
    """Map L*a*b* onto [0, 1]-ish channels: L/100, (a+128)/255, (b+128)/255."""
    out = np.empty_like(lab)
    out[..., 0] = lab[..., 0] / 100.0
    out[..., 1] = (lab[..., 1] + 128.0) / 255.0
    out[..., 2] = (lab[..., 2] + 128.0) / 255.0
    return out


def to_lab(f: Frame) -> Frame:
    if f.channels != 3:
        raise UnsupportedChannelCount(f"Lab conversion needs 3 channels, got {f.channels}")
    return Frame(np.clip(rescale_lab(srgb_to_lab(f.pixels)), 0.0, 1.0))


def _axis_weights(n_out: int, n_in: int, start: float, extent: float):
    # sample centres of n_out bins spanning [start, start+extent), in pixel-index units
    pos = start + (np.arange(n_out) + 0.5) * (extent / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    i0 = np.floor(pos).astype(np.intp)
    i0 = np.minimum(i0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def _sample(pixels: np.ndarray, rows, cols) -> np.ndarray:
    r0, r1, fr = rows
    c0, c1, fc = cols
    fr = fr[:, None, None]
    fc = fc[None, :, None]
    top = pixels[r0][:, c0] * (1 - fc) + pixels[r0][:, c1] * fc
    bot = pixels[r1][:, c0] * (1 - fc) + pixels[r1][:, c1] * fc
    return top * (1 - fr) + bot * fr


def resize(f: Frame, out_w: int, out_h: int) -> Frame:
    """Bilinear resize with half-pixel-centre alignment and edge clamping."""
    if out_w < 1 or out_h < 1:
        raise EmptyTarget(f"target size must be at least 1x1, got {out_w}x{out_h}")
    if (out_w, out_h) == f.size:
        return f
    rows = _axis_weights(out_h, f.height, 0.0, f.height)
    cols = _axis_weights(out_w, f.width, 0.0, f.width)
    return Frame(_sample(f.pixels, rows, cols))


def crop_patch(f: Frame, b: Box, out_w: int, out_h: int) -> Frame:
    """Resample box ``b`` of ``f`` to out_w x out_h; outside pixels are edge-replicated."""
    if b.x >= f.width or b.y >= f.height or b.x2 <= 0 or b.y2 <= 0:
        raise OutOfFrame(f"{b!r} does not intersect the {f.width}x{f.height} frame")
    rows = _axis_weights(out_h, f.height, b.y, b.h)
    cols = _axis_weights(out_w, f.width, b.x, b.w)
    return Frame(_sample(f.pixels, rows, cols))


def crop_patches(pixels: np.ndarray, boxes: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Batched crop_patch: (H, W, C) pixels and (N, 4) boxes -> (N, out_h, out_w, C).

    No intersection check; boxes outside the frame are edge-replicated.
    """
    H, W = pixels.shape[:2]
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    ys = boxes[:, 1:2] + (np.arange(out_h) + 0.5) * (boxes[:, 3:4] / out_h) - 0.5
    xs = boxes[:, 0:1] + (np.arange(out_w) + 0.5) * (boxes[:, 2:3] / out_w) - 0.5
    ys = np.clip(ys, 0.0, H - 1)
    xs = np.clip(xs, 0.0, W - 1)
    y0 = np.minimum(np.floor(ys).astype(np.intp), H - 1)
    x0 = np.minimum(np.floor(xs).astype(np.intp), W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    C = pixels.shape[2]
    flat = pixels.reshape(H * W, C)
    r0 = (y0 * W)[:, :, None]
    r1 = (y1 * W)[:, :, None]
    c0 = x0[:, None, :]
    c1 = x1[:, None, :]
    fy = (ys - y0)[:, :, None, None]
    fx = (xs - x0)[:, None, :, None]
    # flat gathers keep the channel axis contiguous
    p00, p01 = np.take(flat, r0 + c0, axis=0), np.take(flat, r0 + c1, axis=0)
    p10, p11 = np.take(flat, r1 + c0, axis=0), np.take(flat, r1 + c1, axis=0)
    top = p00 + (p01 - p00) * fx
    bot = p10 + (p11 - p10) * fx
    return top + (bot - top) * fy


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """(height+1, width+1, channels) table; table[i, j] = sum of pixels[:i, :j]."""

    table: np.ndarray

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1


def integral_table(pixels: np.ndarray) -> np.ndarray:
    """Zero-padded prefix sums over the last two spatial axes of (..., H, W)."""
    out = np.zeros(pixels.shape[:-2] + (pixels.shape[-2] + 1, pixels.shape[-1] + 1))
    out[..., 1:, 1:] = pixels.cumsum(axis=-2).cumsum(axis=-1)
    return out


def integral(f: Frame) -> IntegralImage:
    px = np.moveaxis(f.pixels, 2, 0)
    table = np.moveaxis(integral_table(px), 0, 2)
    table.setflags(write=False)
    return IntegralImage(table)


def rectangle_sum(ii: IntegralImage, b: Box) -> np.ndarray:
    """Per-channel pixel sum over an integer-aligned box inside the frame."""
    x0, y0 = int(round(b.x)), int(round(b.y))
    x1, y1 = int(round(b.x2)), int(round(b.y2))
    if x0 < 0 or y0 < 0 or x1 > ii.width or y1 > ii.height:
        raise OutOfFrame(f"{b!r} is not inside the {ii.width}x{ii.height} frame")
    t = ii.table
    return t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]


def frame_from_uint8(arr) -> Frame:
    return Frame(np.asarray(arr, dtype=np.float64) / 255.0)


def is_image_dir(path) -> bool:
    return os.path.isdir(path) and bool(list_frame_files(path))
