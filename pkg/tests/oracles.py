"""Slow, direct reference implementations used as test oracles.

Written as plain loops over pixels and formulas, independently of the
vectorized code under test.
"""

from __future__ import annotations

import math

import numpy as np

D65 = (0.95047, 1.0, 1.08883)
M_XYZ_TO_RGB = np.linalg.inv(np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
]))


def raster_iou(a, b, step=0.25) -> float:
    """IoU by counting sub-pixel sample points (cell centres of a ``step`` grid)."""
    xs = np.arange(min(a[0], b[0]), max(a[0] + a[2], b[0] + b[2]), step) + step / 2
    ys = np.arange(min(a[1], b[1]), max(a[1] + a[3], b[1] + b[3]), step) + step / 2
    X, Y = np.meshgrid(xs, ys)

    def inside(r):
        return (X >= r[0]) & (X < r[0] + r[2]) & (Y >= r[1]) & (Y < r[1] + r[3])

    ia, ib = inside(a), inside(b)
    return (ia & ib).sum() / (ia | ib).sum()


def rect_sum(px: np.ndarray, x: int, y: int, w: int, h: int) -> np.ndarray:
    total = np.zeros(px.shape[2:]) if px.ndim == 3 else 0.0
    for i in range(y, y + h):
        for j in range(x, x + w):
            total = total + px[i, j]
    return total


def haar(patch: np.ndarray, rects, polarity) -> np.ndarray:
    out = []
    for (ra, rb), p in zip(rects, polarity):
        area = ra[2] * ra[3]
        out.append(p * (rect_sum(patch, *ra) - rect_sum(patch, *rb)) / area)
    return np.array(out)


def hog_cells(patch: np.ndarray, cell=4, bins=9) -> np.ndarray:
    """Per-pixel HOG: tent-weighted spatial votes to cell centres, linear bin sharing."""
    H, W = patch.shape
    ny, nx = H // cell, W // cell
    hist = np.zeros((ny, nx, bins))
    width = 180.0 / bins
    for i in range(H):
        for j in range(W):
            gx = patch[i, min(j + 1, W - 1)] - patch[i, max(j - 1, 0)]
            gy = patch[min(i + 1, H - 1), j] - patch[max(i - 1, 0), j]
            mag = math.hypot(gx, gy)
            if mag == 0:
                continue
            ang = math.degrees(math.atan2(gy, gx)) % 180.0
            pos = ang / width
            k0 = int(math.floor(pos))
            frac = pos - k0
            for cy in range(ny):
                wy = max(0.0, 1.0 - abs((i + 0.5) - (cell * cy + cell / 2)) / cell)
                if wy == 0:
                    continue
                for cx in range(nx):
                    wx = max(0.0, 1.0 - abs((j + 0.5) - (cell * cx + cell / 2)) / cell)
                    if wx == 0:
                        continue
                    hist[cy, cx, k0 % bins] += mag * wy * wx * (1 - frac)
                    hist[cy, cx, (k0 + 1) % bins] += mag * wy * wx * frac
    return hist


def hog(patch: np.ndarray, eps=1e-3, clip=0.2) -> np.ndarray:
    cells = hog_cells(patch)
    ny, nx, _ = cells.shape
    out = []
    for by in range(ny - 1):
        for bx in range(nx - 1):
            v = np.concatenate([cells[by, bx], cells[by, bx + 1], cells[by + 1, bx], cells[by + 1, bx + 1]])
            v = v / math.sqrt(float(v @ v) + eps ** 2)
            v = np.minimum(v, clip)
            v = v / math.sqrt(float(v @ v) + eps ** 2)
            out.append(v)
    return np.concatenate(out)


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of sRGB -> CIE L*a*b* (D65)."""
    L, a, b = lab[..., 0], lab[..., 1], lab[..., 2]
    fy = (L + 16) / 116
    fx = fy + a / 500
    fz = fy - b / 200
    d = 6 / 29

    def finv(t):
        return np.where(t > d, t ** 3, 3 * d * d * (t - 4 / 29))

    xyz = np.stack([finv(fx) * D65[0], finv(fy) * D65[1], finv(fz) * D65[2]], axis=-1)
    lin = xyz @ M_XYZ_TO_RGB.T
    lin = np.clip(lin, 0, None)
    return np.where(lin <= 0.0031308, 12.92 * lin, 1.055 * lin ** (1 / 2.4) - 0.055)


def load_lab_table(path):
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=3)
    return data[:, :3], data[:, 3:]
