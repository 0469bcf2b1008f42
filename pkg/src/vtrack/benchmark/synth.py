"""Deterministic synthetic sequences: a textured target over a textured background.

Used for desk-scale checks where the real benchmark videos are not available.
Distractors, when requested, share the target's luminance pattern but carry
its chroma pattern inverted, so they are indistinguishable in grayscale.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SpecOutOfBounds
from ..geometry import Box, Trajectory
from ..imaging import Frame, resize, save_frame
from .dataset import MemoryFrames, Sequence, atomic_write, load_sequence, write_trajectory

# unit chroma direction with zero luma (red against green)
_CHROMA = np.array([0.587, -0.299, 0.0])
_CHROMA /= np.linalg.norm(_CHROMA)


class MotionLaw(str, enum.Enum):
    STATIC = "Static"
    CONSTANT_VELOCITY = "ConstantVelocity"
    RANDOM_WALK = "RandomWalk"
    SCALE_RAMP = "ScaleRamp"
    FAST_JUMP = "FastJump"


@dataclass
class SynthSpec:
    frame_w: int = 320
    frame_h: int = 240
    target_w: int = 40
    target_h: int = 40
    length: int = 100
    motion: MotionLaw = MotionLaw.STATIC
    start: tuple[float, float] | None = None  # top-left; default centred
    velocity: tuple[float, float] = (3.0, 0.0)
    walk_sigma: float = 2.0
    scale_factor: float = 1.5
    jump_every: int = 20
    occlusion: tuple[int, int] | None = None  # inclusive frame range
    distractors: int = 0
    distractor_speed: float = 3.0  # px/frame; each decoy crosses the target once
    distractor_path: str = "crossing"  # or "sweep": oscillates through the target
    sweep_amplitude: float = 60.0
    sweep_period: int = 50
    chroma: float = 0.2
    texture_seed: int | None = None
    name: str = "synthetic"

    def __post_init__(self):
        self.motion = MotionLaw(self.motion)
        if self.start is not None:
            self.start = tuple(float(v) for v in self.start)
        self.velocity = tuple(float(v) for v in self.velocity)
        if self.occlusion is not None:
            self.occlusion = tuple(int(v) for v in self.occlusion)
        if min(self.frame_w, self.frame_h, self.target_w, self.target_h, self.length) < 1:
            raise SpecOutOfBounds(f"sizes and length must be positive: {self}")
        if self.target_w > self.frame_w or self.target_h > self.frame_h:
            raise SpecOutOfBounds("target larger than the frame")
        if self.distractor_path not in ("crossing", "sweep"):
            raise SpecOutOfBounds(f"unknown distractor path {self.distractor_path!r}")
        if self.distractor_path == "sweep" and self.sweep_period < 1:
            raise SpecOutOfBounds("sweep_period must be positive")
        if self.motion is MotionLaw.FAST_JUMP and self.jump_every < 1:
            raise SpecOutOfBounds("jump_every must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["motion"] = self.motion.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(**d)

    @property
    def attributes(self) -> set[str]:
        tags = set()
        if self.motion is MotionLaw.FAST_JUMP:
            tags.add("fast_motion")
        if self.motion is MotionLaw.SCALE_RAMP:
            tags.add("scale_variation")
        if self.occlusion is not None:
            tags.add("occlusion")
        if self.distractors:
            tags.add("background_clutter")
        return tags


def _inside_fraction(b: Box, fw: int, fh: int) -> float:
    iw = max(0.0, min(b.x2, fw) - max(b.x, 0.0))
    ih = max(0.0, min(b.y2, fh) - max(b.y, 0.0))
    return iw * ih / b.area


def synth_path(spec: SynthSpec, rng: np.random.Generator) -> list[Box]:
    """Ground-truth boxes for the SynthSpec motion law."""
    fw, fh, tw, th = spec.frame_w, spec.frame_h, spec.target_w, spec.target_h
    x0, y0 = spec.start if spec.start is not None else ((fw - tw) / 2, (fh - th) / 2)
    boxes = []
    if spec.motion is MotionLaw.STATIC:
        boxes = [Box(x0, y0, tw, th) for _ in range(spec.length)]
    elif spec.motion is MotionLaw.CONSTANT_VELOCITY:
        vx, vy = spec.velocity
        boxes = [Box(x0 + vx * t, y0 + vy * t, tw, th) for t in range(spec.length)]
    elif spec.motion is MotionLaw.RANDOM_WALK:
        x, y = x0, y0
        for _ in range(spec.length):
            boxes.append(Box(x, y, tw, th))
            x = float(np.clip(x + rng.normal(0, spec.walk_sigma), 0, fw - tw))
            y = float(np.clip(y + rng.normal(0, spec.walk_sigma), 0, fh - th))
    elif spec.motion is MotionLaw.SCALE_RAMP:
        cx, cy = x0 + tw / 2, y0 + th / 2
        for t in range(spec.length):
            f = 1.0 + (spec.scale_factor - 1.0) * t / max(1, spec.length - 1)
            boxes.append(Box.from_center(cx, cy, tw * f, th * f))
    elif spec.motion is MotionLaw.FAST_JUMP:
        x, y = x0, y0
        jump = 2.5 * tw
        for t in range(spec.length):
            if t > 0 and t % spec.jump_every == 0:
                for _ in range(1000):
                    phi = rng.random() * 2 * np.pi
                    nx, ny = x + jump * np.cos(phi), y + jump * np.sin(phi)
                    if 0 <= nx <= fw - tw and 0 <= ny <= fh - th:
                        x, y = float(nx), float(ny)
                        break
                else:
                    raise SpecOutOfBounds("frame too small for the requested jump size")
            boxes.append(Box(x, y, tw, th))
    if spec.motion is not MotionLaw.FAST_JUMP:
        for t, b in enumerate(boxes):
            if _inside_fraction(b, fw, fh) < 0.5:
                raise SpecOutOfBounds(f"target leaves the frame at frame {t}: {b!r}")
    return boxes


def _smooth_texture(rng, h, w, cells, channels):
    coarse = rng.random((cells, cells, channels))
    return resize(Frame(coarse), w, h).pixels


def _paste(canvas: np.ndarray, patch: np.ndarray, b: Box):
    """Draw ``patch`` stretched over box ``b``: every canvas pixel whose centre lies
    inside the box takes the bilinearly sampled texture value."""
    H, W = canvas.shape[:2]
    ph, pw = patch.shape[:2]
    rows = np.arange(max(0, int(np.floor(b.y))), min(H, int(np.ceil(b.y2)) + 1))
    cols = np.arange(max(0, int(np.floor(b.x))), min(W, int(np.ceil(b.x2)) + 1))
    rows = rows[(rows + 0.5 >= b.y) & (rows + 0.5 < b.y2)]
    cols = cols[(cols + 0.5 >= b.x) & (cols + 0.5 < b.x2)]
    if len(rows) == 0 or len(cols) == 0:
        return
    v = np.clip((rows + 0.5 - b.y) / b.h * ph - 0.5, 0, ph - 1)
    u = np.clip((cols + 0.5 - b.x) / b.w * pw - 0.5, 0, pw - 1)
    v0 = np.minimum(np.floor(v).astype(int), ph - 1)
    u0 = np.minimum(np.floor(u).astype(int), pw - 1)
    v1, u1 = np.minimum(v0 + 1, ph - 1), np.minimum(u0 + 1, pw - 1)
    fv, fu = (v - v0)[:, None, None], (u - u0)[None, :, None]
    top = patch[v0][:, u0] * (1 - fu) + patch[v0][:, u1] * fu
    bot = patch[v1][:, u0] * (1 - fu) + patch[v1][:, u1] * fu
    canvas[np.ix_(rows, cols)] = top * (1 - fv) + bot * fv


def _decoy_box(spec: SynthSpec, gt: list[Box], k: int, t: int) -> Box:
    """Decoy k's box at frame t.

    "crossing": a straight line passing over the target at frame t_k.
    "sweep": oscillates through the target, horizontally for even k and
    vertically for odd k, starting off the target.
    """
    b = gt[t]
    if spec.distractor_path == "sweep":
        phase = 2 * np.pi * t / spec.sweep_period + np.pi / 4 + np.pi * k / spec.distractors
        off = spec.sweep_amplitude * np.cos(phase)
        cx, cy = b.center()
        if k % 2 == 0:
            return Box.from_center(cx + off, cy, b.w, b.h)
        return Box.from_center(cx, cy + off, b.w, b.h)
    t_k = min(len(gt) - 1, (k + 1) * len(gt) // (spec.distractors + 1))
    cx, cy = gt[t_k].center()
    sign = 1.0 if k % 2 == 0 else -1.0
    return Box.from_center(cx + sign * spec.distractor_speed * (t - t_k), cy, b.w, b.h)


def render_synthetic(spec: SynthSpec, rng_seed: int = 0) -> Sequence:
    """Render the sequence in memory."""
    rng = np.random.default_rng(rng_seed if spec.texture_seed is None else spec.texture_seed)
    path_rng = np.random.default_rng(rng_seed)
    fw, fh, tw, th = spec.frame_w, spec.frame_h, spec.target_w, spec.target_h
    background = 0.15 + 0.7 * _smooth_texture(rng, fh, fw, 12, 3)
    luma = 0.3 + 0.4 * _smooth_texture(rng, th, tw, 6, 1)[:, :, 0]
    # chroma pattern with zero luma; the decoy carries it inverted
    pattern = 2.0 * _smooth_texture(rng, th, tw, 4, 1) - 1.0
    target = np.clip(luma[:, :, None] + spec.chroma * pattern * _CHROMA, 0, 1)
    decoy = np.clip(luma[:, :, None] - spec.chroma * pattern * _CHROMA, 0, 1)
    occluder = 0.2 + 0.6 * _smooth_texture(rng, th, tw, 3, 3)
    gt = synth_path(spec, path_rng)

    frames = []
    for t, b in enumerate(gt):
        canvas = background.copy()
        _paste(canvas, target, b)
        if spec.occlusion is not None and spec.occlusion[0] <= t <= spec.occlusion[1]:
            _paste(canvas, occluder, b)
        for k in range(spec.distractors):
            _paste(canvas, decoy, _decoy_box(spec, gt, k, t))
        frames.append(Frame(canvas))
    return Sequence(MemoryFrames(frames), Trajectory(gt, spec.name), spec.attributes, spec.name)


def generate_synthetic(spec: SynthSpec, rng_seed: int, out_dir) -> Sequence:
    """Render and write a VTB-style directory (img/0001.png..., groundtruth_rect.txt)."""
    out_dir = Path(out_dir)
    seq = render_synthetic(spec, rng_seed)
    img = out_dir / "img"
    img.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(seq))))
    for i, frame in enumerate(seq.frames, start=1):
        save_frame(frame, img / f"{i:0{width}d}.png")
    write_trajectory(seq.ground_truth, out_dir / "groundtruth_rect.txt")
    atomic_write(out_dir / "attributes.txt", ",".join(sorted(seq.attributes)) + "\n")
    atomic_write(out_dir / "spec.json",
                 json.dumps({"spec": spec.to_dict(), "seed": rng_seed}, indent=2) + "\n")
    return load_sequence(out_dir)
