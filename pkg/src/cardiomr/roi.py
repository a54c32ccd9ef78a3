"""LV region-of-interest localization from cine sequences.

The locator composes four stages: per-voxel magnitude of the first
temporal DFT harmonic (tissue moving at the heart rate), a global noise
threshold, per-slice Canny edge detection, and a circular Hough transform
whose retained circles cast Gaussian-smeared center votes into a shared
likelihood surface. The surface argmax is the ROI center.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage, signal

from .volume import ScalarVolume, crop_patch


class RoiLocateError(RuntimeError):
    """No circle evidence found; callers should fall back to the image center."""


@dataclass(frozen=True)
class RoiConfig:
    radius_min: int = 10
    radius_max: int = 40
    top_p: int = 5
    vote_sigma: float = 8.0
    h1_noise_frac: float = 0.01
    canny_sigma: float = 1.0
    canny_low: float = 0.1
    canny_high: float = 0.2
    patch_size: tuple = (128, 128)

    def __post_init__(self):
        if not (0 < self.radius_min < self.radius_max):
            raise ValueError("need 0 < radius_min < radius_max")
        if self.top_p < 1:
            raise ValueError("top_p must be >= 1")
        if not (0 <= self.h1_noise_frac < 1):
            raise ValueError("h1_noise_frac must be in [0, 1)")
        if self.canny_sigma <= 0:
            raise ValueError("canny_sigma must be positive")
        if not (0 <= self.canny_low <= self.canny_high <= 1):
            raise ValueError("need 0 <= canny_low <= canny_high <= 1")
        if self.vote_sigma <= 0:
            raise ValueError("vote_sigma must be positive")


@dataclass(frozen=True)
class H1Volume:
    """Per-voxel magnitude of the first temporal DFT harmonic."""

    magnitudes: np.ndarray  # (nx, ny, nz), >= 0
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if m.ndim != 3:
            raise ValueError("H1 magnitudes must be 3D (nx, ny, nz)")
        if np.any(m < 0):
            raise ValueError("H1 magnitudes must be non-negative")
        object.__setattr__(self, "magnitudes", m)


@dataclass(frozen=True)
class Circle:
    center: tuple  # (x, y) integer voxel coordinates
    radius: int
    score: float


@dataclass
class HoughResult:
    circles_per_slice: List[List[Circle]]
    surface: np.ndarray  # (nx, ny) accumulated likelihood
    roi_center: tuple  # (x, y)


def temporal_h1(v: ScalarVolume) -> H1Volume:
    """Magnitude of DFT bin 1 along the time axis, per voxel (phase discarded)."""
    nt = v.dims[3]
    if nt < 2:
        raise ValueError(f"temporal analysis needs at least 2 frames, got {nt}")
    t = np.arange(nt)
    phase = np.exp(-2j * np.pi * t / nt)
    bin1 = np.tensordot(v.data.astype(np.float64), phase, axes=([3], [0]))
    return H1Volume(magnitudes=np.abs(bin1), spacing=v.spacing[:3])


def denoise_h1(h: H1Volume, frac: float) -> H1Volume:
    """Zero out values strictly below frac * max over the whole volume."""
    if not (0 <= frac < 1):
        raise ValueError(f"frac must be in [0, 1), got {frac}")
    m = h.magnitudes
    threshold = frac * m.max() if m.size else 0.0
    out = np.where(m < threshold, 0.0, m)
    return H1Volume(magnitudes=out, spacing=h.spacing)


# Quantized gradient axes for non-maximum suppression: offset of the
# "forward" neighbor, indexed by angle octant of (gx, gy).
_NMS_OFFSETS = np.array(
    [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
)


def canny_edges(image: np.ndarray, sigma: float, low: float, high: float) -> np.ndarray:
    """Canny edge detection; thresholds are fractions of the gradient maximum.

    Non-maximum suppression keeps the pixel on the brighter side of a
    symmetric edge (strict comparison toward the gradient direction,
    non-strict against it), so edges of binary masks land inside the mask.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("canny_edges expects a 2D image")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not (0 <= low <= high <= 1):
        raise ValueError("need 0 <= low <= high <= 1")

    smooth = ndimage.gaussian_filter(img, sigma, mode="nearest")
    gx = ndimage.sobel(smooth, axis=0, mode="nearest")
    gy = ndimage.sobel(smooth, axis=1, mode="nearest")
    gmag = np.hypot(gx, gy)
    gmax = gmag.max()
    if gmax <= 0:
        return np.zeros(img.shape, dtype=bool)

    octant = np.round(np.arctan2(gy, gx) / (np.pi / 4)).astype(int) % 8
    off = _NMS_OFFSETS[octant]  # (nx, ny, 2)

    padded = np.pad(gmag, 1, mode="constant")
    xs, ys = np.meshgrid(
        np.arange(img.shape[0]), np.arange(img.shape[1]), indexing="ij"
    )
    fwd = padded[xs + 1 + off[..., 0], ys + 1 + off[..., 1]]
    bwd = padded[xs + 1 - off[..., 0], ys + 1 - off[..., 1]]
    # Symmetric edges produce magnitude ties on both sides of the true
    # boundary; the tolerance makes the tie-break deterministic (exactly
    # one pixel of a tied plateau survives) instead of float-noise driven.
    tol = 1e-9 * gmax
    ridge = (gmag >= fwd - tol) & (gmag > bwd + tol)

    thinned = np.where(ridge, gmag, 0.0)
    strong = thinned > high * gmax
    weak = thinned > low * gmax
    edges = ndimage.binary_dilation(
        strong, structure=np.ones((3, 3), bool), iterations=0, mask=weak
    )
    return edges


def _ring_kernel(radius: int) -> np.ndarray:
    n = 2 * radius + 1
    xs, ys = np.meshgrid(np.arange(n) - radius, np.arange(n) - radius, indexing="ij")
    dist = np.hypot(xs, ys)
    return (np.round(dist) == radius).astype(np.float64)


def hough_circles(edges: np.ndarray, cfg: RoiConfig) -> List[Circle]:
    """Classical circular Hough transform over the configured radius range.

    Returns the top_p circles by accumulator score. Suppression of nearby
    candidates (closer than radius_min) is applied within each radius
    plane, so concentric circles of different radii can both be returned.
    """
    edges = np.asarray(edges)
    if edges.ndim != 2:
        raise ValueError("hough_circles expects a 2D edge map")
    if not edges.any():
        return []
    emap = edges.astype(np.float64)

    candidates: List[Circle] = []
    for radius in range(cfg.radius_min, cfg.radius_max + 1):
        acc = signal.fftconvolve(emap, _ring_kernel(radius), mode="same")
        acc = np.where(acc > 0.5, np.round(acc), 0.0)  # votes are integral counts
        flat_order = np.argsort(acc, axis=None, kind="stable")[::-1]
        kept: List[Tuple[int, int]] = []
        for flat in flat_order:
            score = acc.flat[flat]
            if score <= 0 or len(kept) >= cfg.top_p:
                break
            x, y = np.unravel_index(flat, acc.shape)
            if any(np.hypot(x - kx, y - ky) < cfg.radius_min for kx, ky in kept):
                continue
            kept.append((int(x), int(y)))
            candidates.append(Circle(center=(int(x), int(y)), radius=radius, score=float(score)))

    candidates.sort(key=lambda c: (-c.score, c.center[1], c.center[0], c.radius))
    return candidates[: cfg.top_p]


def _cast_vote(surface: np.ndarray, center, sigma: float, weight: float) -> None:
    """Add a truncated (3 sigma) normalized Gaussian bump in place."""
    nx, ny = surface.shape
    cx, cy = center
    reach = int(np.ceil(3 * sigma))
    x0, x1 = max(cx - reach, 0), min(cx + reach + 1, nx)
    y0, y1 = max(cy - reach, 0), min(cy + reach + 1, ny)
    if x0 >= x1 or y0 >= y1:
        return
    xs = np.arange(x0, x1) - cx
    ys = np.arange(y0, y1) - cy
    d2 = xs[:, None] ** 2 + ys[None, :] ** 2
    bump = np.exp(-d2 / (2 * sigma**2)) / (2 * np.pi * sigma**2)
    bump[d2 > (3 * sigma) ** 2] = 0.0
    surface[x0:x1, y0:y1] += weight * bump


def locate_roi(v: ScalarVolume, cfg: RoiConfig | None = None) -> HoughResult:
    """Locate the LV center of a cine volume.

    All slices share one global center: every retained Hough circle from
    every slice casts a Gaussian vote (sigma = cfg.vote_sigma, weight =
    its accumulator score) into one likelihood surface whose argmax is
    the ROI center. Ties resolve to the lowest (y, then x) index.
    """
    cfg = cfg or RoiConfig()
    h1 = temporal_h1(v)
    # a temporally constant voxel leaves ~1e-16 relative DFT residue; floor
    # it so static inputs read as signal-free instead of as faint circles
    floor = 1e-12 * v.dims[3] * float(np.abs(v.data).max())
    h1 = H1Volume(
        magnitudes=np.where(h1.magnitudes <= floor, 0.0, h1.magnitudes),
        spacing=h1.spacing,
    )
    h1 = denoise_h1(h1, cfg.h1_noise_frac)
    nx, ny, nz = h1.magnitudes.shape

    surface = np.zeros((nx, ny), dtype=np.float64)
    per_slice: List[List[Circle]] = []
    total = 0
    for z in range(nz):
        edges = canny_edges(
            h1.magnitudes[:, :, z], cfg.canny_sigma, cfg.canny_low, cfg.canny_high
        )
        circles = hough_circles(edges, cfg)
        per_slice.append(circles)
        total += len(circles)
        for c in circles:
            _cast_vote(surface, c.center, cfg.vote_sigma, c.score)

    if total == 0:
        raise RoiLocateError(
            "no Hough circles found on any slice; fall back to the image center"
        )

    flat = int(np.argmax(surface.T))  # transpose scans y-major: lowest y, then x
    cy, cx = np.unravel_index(flat, (ny, nx))
    return HoughResult(
        circles_per_slice=per_slice, surface=surface, roi_center=(int(cx), int(cy))
    )


def extract_roi_patch(v: ScalarVolume, cfg: RoiConfig | None = None) -> tuple:
    """Locate the ROI and crop the configured patch around it."""
    cfg = cfg or RoiConfig()
    result = locate_roi(v, cfg)
    patch = crop_patch(v, result.roi_center, cfg.patch_size)
    return result, patch
