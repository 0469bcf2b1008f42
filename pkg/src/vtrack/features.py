"""Patch feature extractors: raw gray, raw Lab colour, Haar-like, HOG, HOG + colour.

Every extractor works on 32x32 patches.  The single-patch functions
(``extract_*``) define the features; the ``Extractor`` classes compute the
same values for a whole candidate set at once and are what the tracker uses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import WrongPatchShape
from .imaging import LUMA, Frame, crop_patches, integral_table, rescale_lab, srgb_to_lab

PATCH_SIZE = 32

HOG_CELL = 4
HOG_BINS = 9
HOG_BLOCK = 2
HOG_EPS = 1e-3
HOG_CLIP = 0.2

HAAR_COUNT = 192
HAAR_DEFAULT_SEED = 2001


class FeatureKind(str, enum.Enum):
    RAW_GRAY = "RawGray"
    RAW_COLOR = "RawColor"
    HAAR = "Haar"
    HOG = "HOG"
    HOG_RAW_COLOR = "HOGPlusRawColor"


FEATURE_DIMS = {
    FeatureKind.RAW_GRAY: 1024,
    FeatureKind.RAW_COLOR: 3072,
    FeatureKind.HAAR: 192,
    FeatureKind.HOG: 1764,
    FeatureKind.HOG_RAW_COLOR: 4836,
}


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    extractor_id: FeatureKind

    def __len__(self):
        return len(self.values)


def _check_patch(patch: Frame, channels: int) -> np.ndarray:
    if patch.width != PATCH_SIZE or patch.height != PATCH_SIZE or patch.channels != channels:
        raise WrongPatchShape(
            f"expected a {PATCH_SIZE}x{PATCH_SIZE}x{channels} patch, "
            f"got {patch.width}x{patch.height}x{patch.channels}")
    return patch.pixels


# ---------------------------------------------------------------- raw pixels

def _raw_gray(patches: np.ndarray) -> np.ndarray:
    flat = patches.reshape(len(patches), -1)
    return flat - flat.mean(axis=1, keepdims=True)


def _raw_color(patches_rgb: np.ndarray) -> np.ndarray:
    lab = rescale_lab(srgb_to_lab(patches_rgb))  # (N, 32, 32, 3)
    lab = lab - lab.mean(axis=(1, 2), keepdims=True)
    # channel-planar layout: all L, then all a, then all b
    return np.moveaxis(lab, 3, 1).reshape(len(lab), -1)


def extract_raw_gray(patch: Frame) -> FeatureVector:
    px = _check_patch(patch, 1)
    return FeatureVector(_raw_gray(px[None, :, :, 0])[0], FeatureKind.RAW_GRAY)


def extract_raw_color(patch: Frame) -> FeatureVector:
    px = _check_patch(patch, 3)
    return FeatureVector(_raw_color(px[None])[0], FeatureKind.RAW_COLOR)


# ---------------------------------------------------------------- Haar-like

@dataclass(frozen=True, eq=False)
class HaarBank:
    """Two-rectangle Haar-like features on the 32x32 grid.

    ``rects`` has shape (n, 2, 4) holding integer (x, y, w, h) for the
    positive and negative rectangle; both rectangles of a feature share w, h.
    """

    rects: np.ndarray
    polarity: np.ndarray
    rng_seed: int

    def __len__(self):
        return len(self.rects)

    @property
    def areas(self) -> np.ndarray:
        return (self.rects[:, 0, 2] * self.rects[:, 0, 3]).astype(np.float64)

    @classmethod
    def generate(cls, rng_seed: int = HAAR_DEFAULT_SEED, n: int = HAAR_COUNT,
                 size: int = PATCH_SIZE) -> "HaarBank":
        rng = np.random.default_rng(rng_seed)
        rects = np.zeros((n, 2, 4), dtype=np.int64)
        polarity = np.empty(n, dtype=np.float64)
        for k in range(n):
            horizontal = rng.random() < 0.5
            # adjacent halves: the pair spans (2w, h) or (w, 2h)
            if horizontal:
                w = int(rng.integers(1, size // 2 + 1))
                h = int(rng.integers(2, size + 1))
                x = int(rng.integers(0, size - 2 * w + 1))
                y = int(rng.integers(0, size - h + 1))
                rects[k] = [(x, y, w, h), (x + w, y, w, h)]
            else:
                w = int(rng.integers(2, size + 1))
                h = int(rng.integers(1, size // 2 + 1))
                x = int(rng.integers(0, size - w + 1))
                y = int(rng.integers(0, size - 2 * h + 1))
                rects[k] = [(x, y, w, h), (x, y + h, w, h)]
            polarity[k] = 1.0 if rng.random() < 0.5 else -1.0
        rects.setflags(write=False)
        polarity.setflags(write=False)
        return cls(rects, polarity, rng_seed)


def _rect_sums(tables: np.ndarray, r: np.ndarray) -> np.ndarray:
    # tables (N, 33, 33); r (n, 4) integer rectangles -> (N, n)
    x0, y0 = r[:, 0], r[:, 1]
    x1, y1 = x0 + r[:, 2], y0 + r[:, 3]
    return tables[:, y1, x1] - tables[:, y0, x1] - tables[:, y1, x0] + tables[:, y0, x0]


def _haar(patches: np.ndarray, bank: HaarBank) -> np.ndarray:
    tables = integral_table(patches)
    diff = _rect_sums(tables, bank.rects[:, 0]) - _rect_sums(tables, bank.rects[:, 1])
    return diff * (bank.polarity / bank.areas)


def extract_haar(patch: Frame, bank: HaarBank | None = None) -> FeatureVector:
    px = _check_patch(patch, 1)
    bank = bank if bank is not None else default_haar_bank()
    return FeatureVector(_haar(px[None, :, :, 0], bank)[0], FeatureKind.HAAR)


_DEFAULT_BANK: HaarBank | None = None


def default_haar_bank() -> HaarBank:
    global _DEFAULT_BANK
    if _DEFAULT_BANK is None:
        _DEFAULT_BANK = HaarBank.generate(HAAR_DEFAULT_SEED)
    return _DEFAULT_BANK


# ---------------------------------------------------------------- HOG

def _hog_cell_votes(n_pix: int, cell: int):
    """Bilinear spatial weights from pixel index to the two nearest cell centres."""
    n_cells = n_pix // cell
    u = (np.arange(n_pix) + 0.5) / cell - 0.5
    c0 = np.floor(u).astype(np.intp)
    f = u - c0
    c1 = c0 + 1
    w0 = np.where(c0 >= 0, 1.0 - f, 0.0)
    w1 = np.where(c1 < n_cells, f, 0.0)
    return np.clip(c0, 0, n_cells - 1), w0, np.clip(c1, 0, n_cells - 1), w1


_HOG_SPATIAL = _hog_cell_votes(PATCH_SIZE, HOG_CELL)


def hog_gradients(patches: np.ndarray):
    """Centred-difference gradients with edge replication; returns (magnitude, angle in [0, 180))."""
    padded = np.pad(patches, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]
    gy = padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    return mag, ang


def hog_cells(patches: np.ndarray) -> np.ndarray:
    """Per-cell orientation histograms, shape (N, 8, 8, 9)."""
    N, H, W = patches.shape
    nc_y, nc_x = H // HOG_CELL, W // HOG_CELL
    mag, ang = hog_gradients(patches)

    # orientation: bin k is centred at k*20 degrees, wrapping at 180
    width = 180.0 / HOG_BINS
    t = ang / width
    b0 = np.floor(t).astype(np.intp)
    fb = t - b0
    b0 %= HOG_BINS
    b1 = (b0 + 1) % HOG_BINS

    cy0, wy0, cy1, wy1 = _HOG_SPATIAL if H == PATCH_SIZE else _hog_cell_votes(H, HOG_CELL)
    cx0, wx0, cx1, wx1 = _HOG_SPATIAL if W == PATCH_SIZE else _hog_cell_votes(W, HOG_CELL)

    hist = np.zeros(N * nc_y * nc_x * HOG_BINS)
    base = (np.arange(N) * (nc_y * nc_x * HOG_BINS))[:, None, None]
    for cy, wy in ((cy0, wy0), (cy1, wy1)):
        for cx, wx in ((cx0, wx0), (cx1, wx1)):
            wsp = wy[:, None] * wx[None, :]
            cell_off = (cy[:, None] * nc_x + cx[None, :]) * HOG_BINS
            for b, wb in ((b0, 1.0 - fb), (b1, fb)):
                idx = base + cell_off[None] + b
                hist += np.bincount(idx.ravel(), weights=(mag * wsp[None] * wb).ravel(),
                                    minlength=hist.size)
    return hist.reshape(N, nc_y, nc_x, HOG_BINS)


def hog_blocks(cells: np.ndarray) -> np.ndarray:
    """2x2-cell blocks at one-cell stride with L2-Hys normalisation, flattened."""
    N, ny, nx, nb = cells.shape
    by, bx = ny - HOG_BLOCK + 1, nx - HOG_BLOCK + 1
    blocks = np.empty((N, by, bx, HOG_BLOCK, HOG_BLOCK, nb))
    for dy in range(HOG_BLOCK):
        for dx in range(HOG_BLOCK):
            blocks[:, :, :, dy, dx] = cells[:, dy:dy + by, dx:dx + bx]
    v = blocks.reshape(N, by, bx, -1)
    v = v / np.sqrt((v ** 2).sum(axis=-1, keepdims=True) + HOG_EPS ** 2)
    v = np.minimum(v, HOG_CLIP)
    v = v / np.sqrt((v ** 2).sum(axis=-1, keepdims=True) + HOG_EPS ** 2)
    return v.reshape(N, -1)


def _hog(patches: np.ndarray) -> np.ndarray:
    return hog_blocks(hog_cells(patches))


def extract_hog(patch: Frame) -> FeatureVector:
    px = _check_patch(patch, 1)
    return FeatureVector(_hog(px[None, :, :, 0])[0], FeatureKind.HOG)


def _hog_raw_color(patches_rgb: np.ndarray) -> np.ndarray:
    gray = patches_rgb @ LUMA
    return np.concatenate([_hog(gray), _raw_color(patches_rgb)], axis=1)


def extract_hog_raw_color(patch_color: Frame) -> FeatureVector:
    px = _check_patch(patch_color, 3)
    return FeatureVector(_hog_raw_color(px[None])[0], FeatureKind.HOG_RAW_COLOR)


# ---------------------------------------------------------------- batched extractors

class Extractor:
    """Crops candidate boxes from a frame and featurizes them in one batch."""

    kind: FeatureKind
    needs_color = False

    @property
    def dim(self) -> int:
        return FEATURE_DIMS[self.kind]

    def prepare(self, frame: Frame) -> np.ndarray:
        """Per-frame preprocessing; result is passed to :meth:`extract`."""
        if self.needs_color:
            px = frame.pixels
            return np.repeat(px, 3, axis=2) if px.shape[2] == 1 else px
        px = frame.pixels
        return px if px.shape[2] == 1 else (px @ LUMA)[:, :, None]

    def patches(self, prepared: np.ndarray, boxes: np.ndarray) -> np.ndarray:
        return crop_patches(prepared, boxes, PATCH_SIZE, PATCH_SIZE)

    def extract(self, prepared: np.ndarray, boxes: np.ndarray) -> np.ndarray:
        p = self.patches(prepared, boxes)
        return self.from_patches(p if self.needs_color else p[..., 0])

    def from_patches(self, patches: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class RawGrayExtractor(Extractor):
    kind = FeatureKind.RAW_GRAY

    def from_patches(self, patches):
        return _raw_gray(patches)


class RawColorExtractor(Extractor):
    kind = FeatureKind.RAW_COLOR
    needs_color = True

    def from_patches(self, patches):
        return _raw_color(patches)


class HaarExtractor(Extractor):
    kind = FeatureKind.HAAR

    def __init__(self, bank: HaarBank | None = None):
        self.bank = bank if bank is not None else default_haar_bank()

    def from_patches(self, patches):
        return _haar(patches, self.bank)


class HogExtractor(Extractor):
    kind = FeatureKind.HOG

    def from_patches(self, patches):
        return _hog(patches)


class HogRawColorExtractor(Extractor):
    kind = FeatureKind.HOG_RAW_COLOR
    needs_color = True

    def from_patches(self, patches):
        return _hog_raw_color(patches)


def make_extractor(kind, haar_seed: int = HAAR_DEFAULT_SEED) -> Extractor:
    kind = FeatureKind(kind)
    if kind is FeatureKind.HAAR:
        return HaarExtractor(HaarBank.generate(haar_seed))
    return {
        FeatureKind.RAW_GRAY: RawGrayExtractor,
        FeatureKind.RAW_COLOR: RawColorExtractor,
        FeatureKind.HOG: HogExtractor,
        FeatureKind.HOG_RAW_COLOR: HogRawColorExtractor,
    }[kind]()
