"""One case end to end, twice, to show the report is fully deterministic.

The segmentation itself is an external hand-off: the pipeline consumes
label (or probability) volumes produced elsewhere and runs everything
around them - ROI, cleanup, metrics, features, and prediction hooks.
"""

import json
import tempfile
from pathlib import Path

from cardiomr.phantoms import heart_label_volume, pulsating_disk_cine
from cardiomr.pipeline import PipelineConfig, run_pipeline
from cardiomr.volume import save_volume

work = Path(tempfile.mkdtemp(prefix="cardiomr_pipeline_"))
cine = pulsating_disk_cine(shape=(160, 160), center=(80, 80), seed=5)
ed = heart_label_volume(shape=(160, 160), n_slices=1, lv_center=(80, 80),
                        lv_radius=14, wall_px=5, rv_offset=(-31, 0))
es = heart_label_volume(shape=(160, 160), n_slices=1, lv_center=(80, 80),
                        lv_radius=10, wall_px=7, rv_offset=(-31, 0))
save_volume(cine, work / "cine.vol")
save_volume(ed, work / "ed.vol")
save_volume(es, work / "es.vol")

config = PipelineConfig(values={"roi.patch_w": 128, "roi.patch_h": 128})
common = dict(seg_ed=work / "ed.vol", seg_es=work / "es.vol",
              gt_ed=work / "ed.vol", gt_es=work / "es.vol", config=config)

report = run_pipeline(work / "cine.vol", work / "run1", **common)
run_pipeline(work / "cine.vol", work / "run2", **common)

print(f"artifacts in {work / 'run1'}:")
for p in sorted((work / "run1").iterdir()):
    print(f"  {p.name} ({p.stat().st_size:,} bytes)")

print(f"\nROI center {report['stages']['roi']['center']}, "
      f"ED LV dice {report['stages']['metrics']['ED']['LV']['dice']}")
print(f"LV ejection fraction "
      f"{report['stages']['features']['lv_ejection_fraction']:.3f}")

b1 = (work / "run1" / "report.json").read_bytes()
b2 = (work / "run2" / "report.json").read_bytes()
print(f"\ntwo runs, {len(b1)} report bytes each, identical: {b1 == b2}")
print(json.dumps(json.loads(b1)["stages"]["roi"], indent=2))
