"""Sequence loading and the plain-text trajectory format (one "x,y,w,h" per line)."""

from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence as SequenceT

from ..errors import CountMismatch, DatasetNotFound, InvalidBox, MissingGroundTruth, UnparsableLine
from ..geometry import Box, Trajectory
from ..imaging import Frame, list_frame_files, load_frame

GT_NAMES = ("groundtruth_rect.txt", "groundtruth.txt")
ATTR_NAMES = ("attributes.txt",)
_SPLIT = re.compile(r"[,\t ]+")


def parse_box_line(text: str, line_number: int, path=None) -> Box:
    parts = [p for p in _SPLIT.split(text.strip()) if p]
    try:
        if len(parts) != 4:
            raise ValueError
        return Box(*(float(p) for p in parts))
    except (ValueError, InvalidBox):
        raise UnparsableLine(line_number, text.rstrip("\n"), path) from None


def read_trajectory(path, sequence_id: str | None = None) -> Trajectory:
    path = Path(path)
    boxes = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            boxes.append(parse_box_line(line, i, path))
    return Trajectory(boxes, sequence_id if sequence_id is not None else path.stem)


def format_trajectory(traj: Trajectory) -> str:
    return "".join(f"{b.x!r},{b.y!r},{b.w!r},{b.h!r}\n" for b in traj)


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory(traj: Trajectory, path) -> None:
    atomic_write(path, format_trajectory(traj))


class FrameSource:
    """Random-access frames with a known count and size."""

    def __len__(self) -> int:
        raise NotImplementedError

    def __getitem__(self, i: int) -> Frame:
        raise NotImplementedError

    def __iter__(self) -> Iterator[Frame]:
        for i in range(len(self)):
            yield self[i]


class DirectoryFrames(FrameSource):
    def __init__(self, paths: SequenceT[Path]):
        self.paths = list(paths)

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, i):
        return load_frame(self.paths[i])


class MemoryFrames(FrameSource):
    def __init__(self, frames: SequenceT[Frame]):
        self.frames = list(frames)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]


@dataclass
class Sequence:
    frames: FrameSource
    ground_truth: Trajectory
    attributes: set[str] = field(default_factory=set)
    name: str = ""

    def __post_init__(self):
        if len(self.ground_truth) != len(self.frames):
            raise CountMismatch(
                f"{self.name}: {len(self.frames)} frames but {len(self.ground_truth)} ground-truth boxes")
        if len(self.frames) < 1:
            raise CountMismatch(f"{self.name}: sequence has no frames")

    def __len__(self):
        return len(self.frames)

    def iter_frames(self) -> Iterator[Frame]:
        return iter(self.frames)


def _find(directory: Path, names) -> Path | None:
    for n in names:
        if (directory / n).is_file():
            return directory / n
    return None


def read_attributes(path) -> set[str]:
    text = Path(path).read_text()
    return {t.strip() for t in re.split(r"[,\n]+", text) if t.strip()}


def load_sequence(directory) -> Sequence:
    """Load a VTB-style sequence directory: ``img/`` frames plus a ground-truth file."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetNotFound(f"sequence directory not found: {directory}")
    gt_path = _find(directory, GT_NAMES)
    if gt_path is None:
        raise MissingGroundTruth(f"no ground-truth file ({' or '.join(GT_NAMES)}) in {directory}")
    img_dir = directory / "img"
    frames = list_frame_files(img_dir) if img_dir.is_dir() else []
    gt = read_trajectory(gt_path, directory.name)
    if len(frames) != len(gt):
        raise CountMismatch(f"{directory}: {len(frames)} frames but {len(gt)} ground-truth lines")
    attr_path = _find(directory, ATTR_NAMES)
    attrs = read_attributes(attr_path) if attr_path else set()
    return Sequence(DirectoryFrames(frames), gt, attrs, directory.name)


def list_sequences(root) -> list[Path]:
    """Sequence directories directly under ``root`` (those holding a ground-truth file)."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetNotFound(f"dataset root not found: {root}")
    return sorted(p for p in root.iterdir() if p.is_dir() and _find(p, GT_NAMES))
