"""Label cleanup: connected components, largest-component filtering and
hole filling.

The multi-class entry point runs, per foreground class, a 3D largest
component pass (26-connectivity), a slice-wise 2D largest component pass
(8-connectivity), and finally class-aware hole filling so cavities enclosed
by the myocardium come back as blood pool rather than background.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from .volume import LabelVolume

_STRUCTURES = {
    (2, 4): ndimage.generate_binary_structure(2, 1),
    (2, 8): ndimage.generate_binary_structure(2, 2),
    (3, 6): ndimage.generate_binary_structure(3, 1),
    (3, 26): ndimage.generate_binary_structure(3, 3),
}


@dataclass
class ComponentLabeling:
    labels: np.ndarray              # int32, 0 = background
    sizes: List[Tuple[int, int]]    # (component id, voxel count), id order

    @property
    def n_components(self) -> int:
        return len(self.sizes)


def _structure(ndim: int, connectivity: int) -> np.ndarray:
    try:
        return _STRUCTURES[(ndim, connectivity)]
    except KeyError:
        raise ValueError(
            f"connectivity {connectivity} is not valid for {ndim}D masks"
        ) from None


def connected_components(mask: np.ndarray, connectivity: int) -> ComponentLabeling:
    """Label connected components; ids follow raster order of first voxel.

    Valid connectivities: 4/8 for 2D masks, 6/26 for 3D.
    """
    mask = np.asarray(mask).astype(bool)
    raw, n = ndimage.label(mask, structure=_structure(mask.ndim, connectivity))
    if n == 0:
        return ComponentLabeling(labels=raw.astype(np.int32), sizes=[])
    # Renumber so component ids are ordered by first raster occurrence,
    # independent of how the labeling engine assigned them.
    flat = raw.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    # reversed so earlier indices overwrite later ones
    first[flat[nz[::-1]]] = nz[::-1]
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, n + 1)
    labels = remap[raw]
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    sizes = [(i, int(counts[i])) for i in range(1, n + 1)]
    return ComponentLabeling(labels=labels, sizes=sizes)


def keep_largest(mask: np.ndarray, connectivity: int) -> np.ndarray:
    """Keep only the largest component; ties keep the earliest raster one."""
    comp = connected_components(mask, connectivity)
    if not comp.sizes:
        return np.zeros_like(np.asarray(mask), dtype=bool)
    best_id = max(comp.sizes, key=lambda s: (s[1], -s[0]))[0]
    return comp.labels == best_id


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill 2D background regions not 4-connected to the slice border."""
    mask = np.asarray(mask).astype(bool)
    if mask.ndim != 2:
        raise ValueError("fill_holes expects a 2D mask")
    bg = connected_components(~mask, connectivity=4)
    out = mask.copy()
    border_ids = set()
    labels = bg.labels
    for edge in (labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]):
        border_ids.update(int(v) for v in np.unique(edge) if v > 0)
    for comp_id, _ in bg.sizes:
        if comp_id not in border_ids:
            out[labels == comp_id] = True
    return out


def _fill_holes_class_aware(lbl: np.ndarray, priority) -> np.ndarray:
    """Assign enclosed background regions the highest-priority adjacent class."""
    out = lbl.copy()
    bg = connected_components(out == 0, connectivity=4)
    if not bg.sizes:
        return out
    labels = bg.labels
    border_ids = set()
    for edge in (labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]):
        border_ids.update(int(v) for v in np.unique(edge) if v > 0)
    for comp_id, _ in bg.sizes:
        if comp_id in border_ids:
            continue
        hole = labels == comp_id
        ring = ndimage.binary_dilation(
            hole, structure=ndimage.generate_binary_structure(2, 1)
        ) & ~hole
        adjacent = set(int(v) for v in np.unique(out[ring]) if v > 0)
        for cls in priority:
            if cls in adjacent:
                out[hole] = cls
                break
    return out


def postprocess_labels(
    lbl,
    *,
    skip_3d: bool = False,
    skip_2d: bool = False,
    skip_fill: bool = False,
    connectivity_3d: int = 26,
    connectivity_2d: int = 8,
):
    """Clean a multi-class label volume.

    Accepts a LabelVolume or a plain 2D/3D integer array and returns the
    same kind. Foreground classes are processed LV, then MYO, then RV
    (falling back to descending label id for non-cardiac schemas);
    hole filling assigns each enclosed background region the
    highest-priority adjacent class, so a cavity enclosed by MYO that
    touches LV becomes LV.
    """
    if isinstance(lbl, LabelVolume):
        data = np.array(lbl.data)
        schema = lbl.schema
        names = dict(schema.entries)
        priority = [
            schema.id_of(n) for n in ("LV", "MYO", "RV") if n in schema.names
        ]
        priority += [
            i for i in sorted(schema.foreground_ids, reverse=True) if i not in priority
        ]
    else:
        data = np.array(lbl)
        schema = None
        priority = sorted(int(v) for v in np.unique(data) if v > 0)[::-1]

    squeeze_2d = data.ndim == 2
    if squeeze_2d:
        data = data[:, :, np.newaxis]
    if data.ndim != 3:
        raise ValueError("postprocess_labels expects 2D or 3D labels")

    classes = [int(v) for v in np.unique(data) if v > 0]
    ordered = [c for c in priority if c in classes]

    # The slice-wise pass can disconnect the surviving 3D component, so the
    # two passes repeat until stable; removals are monotone, so this
    # terminates and makes the whole operation idempotent.
    changed = True
    while changed and not (skip_3d and skip_2d):
        changed = False
        if not skip_3d:
            for cls in ordered:
                mask = data == cls
                if not mask.any():
                    continue
                drop = mask & ~keep_largest(mask, connectivity_3d)
                if drop.any():
                    data[drop] = 0
                    changed = True
        if not skip_2d:
            for z in range(data.shape[2]):
                for cls in ordered:
                    mask = data[:, :, z] == cls
                    if not mask.any():
                        continue
                    drop = mask & ~keep_largest(mask, connectivity_2d)
                    if drop.any():
                        data[:, :, z][drop] = 0
                        changed = True

    if not skip_fill:
        for z in range(data.shape[2]):
            data[:, :, z] = _fill_holes_class_aware(data[:, :, z], priority)

    if squeeze_2d:
        data = data[:, :, 0]
    if schema is not None:
        return LabelVolume(data=data, spacing=lbl.spacing, schema=schema)
    return data
