"""Max-influence pixel assignment and label-image encoding."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import IO, Mapping

import numpy as np

from .world import FmssId

UNLABELED = 255

STACK_MAGIC = b"URSASTK1\n"


class StackFormatError(ValueError):
    """A contribution-stack value or file is invalid."""


class PpmFormatError(ValueError):
    """A PPM byte stream is malformed."""


class PaletteError(ValueError):
    """A class id or pixel color is missing from the palette."""


@dataclass(frozen=True)
class ContributionStack:
    """Per-pixel influence weights for each contributing identifier in a frame."""

    width: int
    height: int
    layers: tuple[tuple[FmssId, np.ndarray], ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise StackFormatError(f"bad dimensions {self.width}x{self.height}")
        normalized = []
        for fmss, grid in self.layers:
            arr = np.asarray(grid, dtype=np.float64)
            if arr.shape != (self.height, self.width):
                raise StackFormatError(
                    f"layer {fmss} grid shape {arr.shape} != ({self.height}, {self.width})"
                )
            if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
                raise StackFormatError(f"layer {fmss} weights outside [0, 1]")
            normalized.append((fmss, arr))
        object.__setattr__(self, "layers", tuple(normalized))


@dataclass(frozen=True)
class LabelMap:
    """Row-major grid of small class ids; 255 marks unlabeled pixels."""

    width: int
    height: int
    grid: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.grid, dtype=np.uint8)
        if arr.shape != (self.height, self.width):
            raise ValueError(f"grid shape {arr.shape} != ({self.height}, {self.width})")
        object.__setattr__(self, "grid", arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.grid, other.grid))
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.grid.tobytes()))


@dataclass(frozen=True)
class FmssLabeling:
    """Mapping from asset identifier to class id; unknown ids read as unlabeled."""

    classes: Mapping[FmssId, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for fmss, cid in self.classes.items():
            if not 0 <= cid <= 255:
                raise ValueError(f"class id {cid} for {fmss} outside 0..255")

    def class_of(self, fmss: FmssId) -> int:
        return self.classes.get(fmss, UNLABELED)

    def to_json_obj(self) -> dict:
        items = sorted(self.classes.items())
        return {"labels": [{"fmss": f.to_json_obj(), "class_id": c} for f, c in items]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FmssLabeling":
        return cls(
            {
                FmssId.from_json_obj(e["fmss"]): int(e["class_id"])
                for e in obj.get("labels", [])
            }
        )


def assign_pixels(stack: ContributionStack, labeling: FmssLabeling) -> LabelMap:
    """Label each pixel with the class of its highest-influence layer.

    Weight ties break to the smallest identifier in the FmssId total order;
    pixels with no layers or all-zero weights stay unlabeled.
    """
    h, w = stack.height, stack.width
    if not stack.layers:
        return LabelMap(w, h, np.full((h, w), UNLABELED, dtype=np.uint8))
    order = sorted(range(len(stack.layers)), key=lambda i: stack.layers[i][0])
    weights = np.stack([stack.layers[i][1] for i in order])
    winner = np.argmax(weights, axis=0)  # first max wins; layers pre-sorted by FmssId
    class_by_rank = np.array(
        [labeling.class_of(stack.layers[i][0]) for i in order], dtype=np.uint8
    )
    grid = class_by_rank[winner]
    grid[weights.max(axis=0) == 0.0] = UNLABELED
    return LabelMap(w, h, grid)


def encode_label_map(m: LabelMap, palette: Mapping[int, tuple[int, int, int]]) -> bytes:
    """Binary PPM (P6, maxval 255) with one palette RGB triple per pixel."""
    present = sorted(int(c) for c in np.unique(m.grid))
    missing = [c for c in present if c not in palette]
    if missing:
        raise PaletteError(f"class ids missing from palette: {missing}")
    lut = np.zeros((256, 3), dtype=np.uint8)
    for cid in present:
        lut[cid] = palette[cid]
    body = lut[m.grid]
    header = f"P6\n{m.width} {m.height}\n255\n".encode("ascii")
    return header + body.tobytes()


def decode_label_map(data: bytes, palette: Mapping[int, tuple[int, int, int]]) -> LabelMap:
    """Inverse of encode_label_map; the palette must be injective."""
    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(data):
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if len(tokens) < 4 or tokens[0] != b"P6":
        raise PpmFormatError("not a binary P6 stream")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise PpmFormatError(f"bad header token: {exc}") from exc
    if maxval != 255:
        raise PpmFormatError(f"unsupported maxval {maxval}")
    if width <= 0 or height <= 0:
        raise PpmFormatError(f"bad dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    body = data[pos : pos + width * height * 3]
    if len(body) != width * height * 3:
        raise PpmFormatError("truncated pixel data")
    reverse: dict[tuple[int, int, int], int] = {}
    for cid, rgb in palette.items():
        key = tuple(int(v) for v in rgb)
        if key in reverse:
            raise PaletteError(f"palette not injective: color {key} repeats")
        reverse[key] = int(cid)
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    grid = np.empty((height, width), dtype=np.uint8)
    for rgb in np.unique(pixels.reshape(-1, 3), axis=0):
        key = (int(rgb[0]), int(rgb[1]), int(rgb[2]))
        if key not in reverse:
            raise PaletteError(f"pixel color {key} not in palette")
        mask = np.all(pixels == rgb, axis=2)
        grid[mask] = reverse[key]
    return LabelMap(width, height, grid)


def write_stack(stack: ContributionStack, fp: IO[bytes]) -> None:
    """Container layout: magic, 8-byte big-endian header length, JSON header, float32 grids."""
    header = json.dumps(
        {
            "width": stack.width,
            "height": stack.height,
            "layers": [f.to_json_obj() for f, _ in stack.layers],
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    fp.write(STACK_MAGIC)
    fp.write(struct.pack(">Q", len(header)))
    fp.write(header)
    for _, grid in stack.layers:
        fp.write(np.ascontiguousarray(grid, dtype="<f4").tobytes())


def read_stack(fp: IO[bytes]) -> ContributionStack:
    magic = fp.read(len(STACK_MAGIC))
    if magic != STACK_MAGIC:
        raise StackFormatError(f"bad magic {magic!r}")
    raw_len = fp.read(8)
    if len(raw_len) != 8:
        raise StackFormatError("truncated header length")
    (header_len,) = struct.unpack(">Q", raw_len)
    try:
        header = json.loads(fp.read(header_len).decode("utf-8"))
        width, height = int(header["width"]), int(header["height"])
        ids = [FmssId.from_json_obj(o) for o in header["layers"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise StackFormatError(f"bad header: {exc}") from exc
    layers = []
    for fmss in ids:
        raw = fp.read(4 * width * height)
        if len(raw) != 4 * width * height:
            raise StackFormatError(f"truncated payload for layer {fmss}")
        grid = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(height, width)
        layers.append((fmss, grid))
    return ContributionStack(width, height, tuple(layers))


def load_palette(source: bytes | str | IO) -> dict[int, tuple[int, int, int]]:
    """Palette CSV: class_id,name,r,g,b (header line optional)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    palette: dict[int, tuple[int, int, int]] = {}
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0] == "class_id":
            continue
        if len(parts) != 5:
            raise PaletteError(f"line {lineno}: expected class_id,name,r,g,b")
        try:
            cid = int(parts[0])
            rgb = (int(parts[2]), int(parts[3]), int(parts[4]))
        except ValueError as exc:
            raise PaletteError(f"line {lineno}: {exc}") from exc
        if cid in palette:
            raise PaletteError(f"line {lineno}: duplicate class id {cid}")
        if any(not 0 <= v <= 255 for v in rgb):
            raise PaletteError(f"line {lineno}: channel outside 0..255")
        palette[cid] = rgb
    return palette
