"""LV localization on a beating phantom, stage by stage.

A disk pulsating at the heart rate is the only temporally varying
structure in the scene; its rim lights up in the first temporal Fourier
harmonic, Canny traces the rim, the circular Hough transform scores
candidate centers, and Gaussian-smeared votes pick the ROI.
"""

import numpy as np

from cardiomr.phantoms import pulsating_disk_cine
from cardiomr.roi import (
    RoiConfig,
    canny_edges,
    denoise_h1,
    hough_circles,
    locate_roi,
    temporal_h1,
)

truth = (40, 88)
cine = pulsating_disk_cine(shape=(128, 128), center=truth, seed=4)
cfg = RoiConfig()

h1 = temporal_h1(cine)
print(f"H1 magnitudes: max {h1.magnitudes.max():.1f} at the pulsating rim, "
      f"background median {np.median(h1.magnitudes):.2e}")

h1 = denoise_h1(h1, cfg.h1_noise_frac)
print(f"after 1% denoise: {np.count_nonzero(h1.magnitudes)} voxels survive")

edges = canny_edges(h1.magnitudes[:, :, 0], cfg.canny_sigma, cfg.canny_low, cfg.canny_high)
print(f"edge map: {edges.sum()} edge pixels")

circles = hough_circles(edges, cfg)
for c in circles[:3]:
    print(f"  circle r={c.radius:>2} at {c.center} score {c.score:.0f}")

result = locate_roi(cine, cfg)
err = np.hypot(result.roi_center[0] - truth[0], result.roi_center[1] - truth[1])
print(f"located ROI center {result.roi_center} vs truth {truth}: err {err:.1f} px")
print(f"likelihood surface mass {result.surface.sum():.1f} "
      f"~= total circle score x truncated-Gaussian mass")
