"""Volume data model, raw file format, normalization and patch extraction.

Scalar volumes are 4D ``(nx, ny, nz, nt)`` float32 grids with per-axis
physical spacing (mm for x/y/z, ms or unitless for t). Label volumes are
3D or 4D uint8 grids whose values must belong to a :class:`LabelSchema`.
Voxel storage order is x-fastest throughout: element ``(x, y, z, t)`` sits
at flat index ``x + nx*(y + ny*(z + nz*t))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class VolumeFormatError(ValueError):
    """Malformed header; the message names the offending key."""


class VolumeSizeError(ValueError):
    """Payload byte count does not match the header dimensions."""


_ELEMENT_TYPES = {"FLOAT32": np.dtype("<f4"), "UINT8": np.dtype("u1")}
_HEADER_KEYS = ("NDims", "DimSize", "ElementSpacing", "ElementType", "ElementDataFile")


@dataclass(frozen=True)
class LabelSchema:
    """Ordered (id, name) pairs; id 0 is reserved for background."""

    entries: tuple = ((0, "BG"), (1, "RV"), (2, "MYO"), (3, "LV"))

    def __post_init__(self):
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("label ids must be unique")
        if 0 not in ids:
            raise ValueError("label id 0 (background) is required")

    @property
    def ids(self):
        return tuple(i for i, _ in self.entries)

    @property
    def names(self):
        return tuple(n for _, n in self.entries)

    def id_of(self, name: str) -> int:
        for i, n in self.entries:
            if n == name:
                return i
        raise KeyError(name)

    def name_of(self, label_id: int) -> str:
        for i, n in self.entries:
            if i == label_id:
                return n
        raise KeyError(label_id)

    @property
    def foreground_ids(self):
        return tuple(i for i, _ in self.entries if i != 0)


ACDC_SCHEMA = LabelSchema()


def _locked(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ScalarVolume:
    """Immutable 4D real-valued grid with physical spacing."""

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        # float64 in memory; the file format quantizes to float32 on save
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 4:
            raise ValueError(f"scalar volume must be 4D, got {data.ndim}D")
        if not np.all(np.isfinite(data)):
            raise ValueError("scalar volume contains non-finite values")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 4 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 4 positive reals, got {self.spacing}")
        object.__setattr__(self, "data", _locked(data))
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self):
        return self.data.shape

    def slice2d(self, z: int = 0, t: int = 0) -> np.ndarray:
        return self.data[:, :, z, t]


@dataclass(frozen=True)
class LabelVolume:
    """Immutable 3D/4D integer label grid over a :class:`LabelSchema`."""

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    schema: LabelSchema = field(default_factory=LabelSchema)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim not in (3, 4):
            raise ValueError(f"label volume must be 3D or 4D, got {data.ndim}D")
        present = np.unique(data)
        allowed = set(self.schema.ids)
        bad = [int(v) for v in present if int(v) not in allowed]
        if bad:
            raise ValueError(f"labels {bad} are not in the schema {self.schema.ids}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != data.ndim or any(s <= 0 for s in spacing):
            raise ValueError(
                f"spacing must be {data.ndim} positive reals, got {self.spacing}"
            )
        object.__setattr__(self, "data", _locked(data.astype(np.uint8)))
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self):
        return self.data.shape

    def class_mask(self, label_id: int) -> np.ndarray:
        return self.data == label_id


@dataclass(frozen=True)
class Patch:
    """Window extracted from a volume, zero-padded where it exits the grid."""

    data: np.ndarray
    center: tuple
    size: tuple
    source: object  # the (immutable) ScalarVolume or LabelVolume it came from
    spacing: tuple
    kind: str = "scalar"  # "scalar" or "label"

    def __post_init__(self):
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise ValueError("patch size must be positive")

    @property
    def source_dims(self) -> tuple:
        return self.source.dims


def _parse_header(raw: bytes, path):
    """Split raw file content into parsed header fields and the payload."""
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise VolumeFormatError(f"{path}: missing blank line terminating the header")
    header_text = raw[:sep].decode("ascii", errors="replace")
    payload = raw[sep + 2:]

    fields = {}
    order = []
    for line in header_text.splitlines():
        if not line.strip():
            continue
        if "=" not in line:
            raise VolumeFormatError(f"{path}: header line without '=': {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
        order.append(key.strip())
    if tuple(order) != _HEADER_KEYS:
        expected = ", ".join(_HEADER_KEYS)
        got = ", ".join(order)
        missing = [k for k in _HEADER_KEYS if k not in fields]
        bad = missing[0] if missing else (order + ["?"])[len(_HEADER_KEYS) - 1]
        raise VolumeFormatError(
            f"{path}: header keys must be [{expected}] in order, got [{got}]"
            f" (offending key: {bad})"
        )

    try:
        ndims = int(fields["NDims"])
    except ValueError:
        raise VolumeFormatError(f"{path}: NDims is not an integer: {fields['NDims']!r}")
    if ndims not in (3, 4):
        raise VolumeFormatError(f"{path}: NDims must be 3 or 4, got {ndims}")

    try:
        dims = tuple(int(v) for v in fields["DimSize"].split())
    except ValueError:
        raise VolumeFormatError(f"{path}: DimSize must be integers: {fields['DimSize']!r}")
    if len(dims) != ndims or any(d <= 0 for d in dims):
        raise VolumeFormatError(
            f"{path}: DimSize must be {ndims} positive integers, got {fields['DimSize']!r}"
        )

    try:
        spacing = tuple(float(v) for v in fields["ElementSpacing"].split())
    except ValueError:
        raise VolumeFormatError(
            f"{path}: ElementSpacing must be reals: {fields['ElementSpacing']!r}"
        )
    if len(spacing) != ndims or any(s <= 0 for s in spacing):
        raise VolumeFormatError(
            f"{path}: ElementSpacing must be {ndims} positive reals,"
            f" got {fields['ElementSpacing']!r}"
        )

    etype = fields["ElementType"]
    if etype not in _ELEMENT_TYPES:
        raise VolumeFormatError(f"{path}: ElementType must be FLOAT32 or UINT8, got {etype!r}")
    if fields["ElementDataFile"] != "LOCAL":
        raise VolumeFormatError(
            f"{path}: ElementDataFile must be LOCAL, got {fields['ElementDataFile']!r}"
        )
    return dims, spacing, etype, payload


def load_volume(path, kind: str):
    """Load a raw volume file as a scalar or label volume.

    ``kind`` selects the returned type: "scalar" requires FLOAT32 payload
    (3D files gain a singleton t axis), "label" requires UINT8.
    """
    if kind not in ("scalar", "label"):
        raise ValueError(f"kind must be 'scalar' or 'label', got {kind!r}")
    path = Path(path)
    raw = path.read_bytes()
    dims, spacing, etype, payload = _parse_header(raw, path)

    dtype = _ELEMENT_TYPES[etype]
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise VolumeSizeError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
            f" for DimSize {' '.join(str(d) for d in dims)} ({etype})"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(dims, order="F")

    if kind == "scalar":
        if etype != "FLOAT32":
            raise VolumeFormatError(f"{path}: ElementType must be FLOAT32 for scalar volumes")
        if data.ndim == 3:
            data = data[:, :, :, np.newaxis]
            spacing = spacing + (1.0,)
        return ScalarVolume(data=data, spacing=spacing)
    if etype != "UINT8":
        raise VolumeFormatError(f"{path}: ElementType must be UINT8 for label volumes")
    return LabelVolume(data=data, spacing=spacing)


def save_volume(vol, path) -> None:
    """Write a volume in the raw header + little-endian payload format."""
    path = Path(path)
    if isinstance(vol, ScalarVolume):
        data = np.asarray(vol.data, dtype="<f4")
        etype = "FLOAT32"
    elif isinstance(vol, LabelVolume):
        data = np.asarray(vol.data, dtype="u1")
        etype = "UINT8"
    else:
        raise TypeError(f"cannot save object of type {type(vol).__name__}")
    dims = " ".join(str(d) for d in data.shape)
    spacing = " ".join(repr(float(s)) for s in vol.spacing)
    header = (
        f"NDims = {data.ndim}\n"
        f"DimSize = {dims}\n"
        f"ElementSpacing = {spacing}\n"
        f"ElementType = {etype}\n"
        f"ElementDataFile = LOCAL\n"
        f"\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ravel(data, order="F").tobytes())


def normalize_slicewise(v: ScalarVolume) -> ScalarVolume:
    """Rescale every (z, t) slice to [0, 1] by its own min and max.

    A degenerate slice (max == min) maps to all zeros.
    """
    data = v.data.astype(np.float64)
    lo = data.min(axis=(0, 1), keepdims=True)
    hi = data.max(axis=(0, 1), keepdims=True)
    span = hi - lo
    out = np.zeros_like(data)
    np.divide(data - lo, span, out=out, where=span > 0)
    return ScalarVolume(data=out, spacing=v.spacing)


def crop_patch(v, center, size) -> Patch:
    """Extract a (w, h) window centered on an in-plane voxel, for all z/t.

    The center voxel maps to patch index (w//2, h//2); voxels outside the
    source grid are zero-filled (background for label volumes).
    """
    cx, cy = int(center[0]), int(center[1])
    w, h = int(size[0]), int(size[1])
    if w <= 0 or h <= 0:
        raise ValueError(f"patch size must be positive, got {size}")
    nx, ny = v.dims[0], v.dims[1]
    if not (0 <= cx < nx and 0 <= cy < ny):
        raise ValueError(f"center {center} lies outside the {nx}x{ny} grid")

    data = v.data
    if data.ndim == 3:
        data = data[:, :, :, np.newaxis]
    out = np.zeros((w, h) + data.shape[2:], dtype=data.dtype)

    x0, y0 = cx - w // 2, cy - h // 2
    sx0, sx1 = max(x0, 0), min(x0 + w, nx)
    sy0, sy1 = max(y0, 0), min(y0 + h, ny)
    out[sx0 - x0:sx1 - x0, sy0 - y0:sy1 - y0] = data[sx0:sx1, sy0:sy1]
    if v.data.ndim == 3:
        out = out[:, :, :, 0]

    kind = "scalar" if isinstance(v, ScalarVolume) else "label"
    return Patch(
        data=out,
        center=(cx, cy),
        size=(w, h),
        source=v,
        spacing=v.spacing,
        kind=kind,
    )


def _resize_axis(data: np.ndarray, axis: int, target: int) -> np.ndarray:
    n = data.shape[axis]
    if target == n:
        return data
    if target > n:
        before = (target - n) // 2
        pad = [(0, 0)] * data.ndim
        pad[axis] = (before, target - n - before)
        return np.pad(data, pad, mode="constant")
    start = (n - target) // 2
    sl = [slice(None)] * data.ndim
    sl[axis] = slice(start, start + target)
    return data[tuple(sl)]


def pad_or_center_crop(v, target):
    """Symmetrically zero-pad or center-crop each slice to (w, h)."""
    w, h = int(target[0]), int(target[1])
    if w <= 0 or h <= 0:
        raise ValueError(f"target size must be positive, got {target}")
    data = _resize_axis(_resize_axis(v.data, 0, w), 1, h)
    if isinstance(v, ScalarVolume):
        return ScalarVolume(data=data, spacing=v.spacing)
    return LabelVolume(data=data, spacing=v.spacing, schema=v.schema)
