"""The recipe for the published-scene experiments.

The three public scenes are not bundled (licensing); download the MAT files
(Pavia University, Pavia Centre, Kennedy Space Center and their ground
truths), convert them with the ingest tool, then point HSI_DATA_DIR at the
converted files.  This script prints every command and, when the files are
already present, runs the quickest experiment.

Run:  python demos/05_reproduce_published_runs.py
"""

import os
import subprocess
import sys
from pathlib import Path

DATA_DIR = Path(os.environ.get("HSI_DATA_DIR", "datasets"))

print("Step 1 - convert the MAT files (once):\n")
for name, cube, gt in [
    ("pavia_university", "PaviaU.mat", "PaviaU_gt.mat"),
    ("pavia_center", "Pavia.mat", "Pavia_gt.mat"),
    ("ksc", "KSC.mat", "KSC_gt.mat"),
]:
    print(f"  ingest convert {cube} {gt} -o {DATA_DIR}/{name} --dataset {name}")
    print(f"  ingest verify {DATA_DIR}/{name} --dataset {name}")

print("\nStep 2 - the experiment commands:\n")
experiments = [
    ("Pavia Centre, 4-conv family b, 3x3, 200 px/class",
     f"cubenn train --cube {DATA_DIR}/pavia_center.hsc --gt {DATA_DIR}/pavia_center.hsg "
     "--family b --spatial 3 --split count:200 --seed 1 --out out/pc_b"),
    ("Pavia Centre, 8-conv family d, 3x3, 5% split",
     f"cubenn train --cube {DATA_DIR}/pavia_center.hsc --gt {DATA_DIR}/pavia_center.hsg "
     "--family d --spatial 3 --split frac:0.05 --seed 1 --out out/pc_d"),
    ("Pavia University, 8-conv family d, 5x5, 5% split",
     f"cubenn train --cube {DATA_DIR}/pavia_university.hsc --gt {DATA_DIR}/pavia_university.hsg "
     "--family d --spatial 5 --split frac:0.05 --seed 1 --out out/pu_d"),
    ("Pavia University, 8-conv family d, 3x3 (fast; source model for the transfer run)",
     f"cubenn train --cube {DATA_DIR}/pavia_university.hsc --gt {DATA_DIR}/pavia_university.hsg "
     "--family d --spatial 3 --split frac:0.05 --seed 1 --runs 1 --out out/pu_d3"),
    ("KSC, 8-conv family d, 5x5, 5% split",
     f"cubenn train --cube {DATA_DIR}/ksc.hsc --gt {DATA_DIR}/ksc.hsg "
     "--family d --spatial 5 --split frac:0.05 --seed 1 --out out/ksc_d"),
    ("Transfer: Pavia University features reused on Pavia Centre",
     f"cubenn transfer --cube {DATA_DIR}/pavia_center.hsc --gt {DATA_DIR}/pavia_center.hsg "
     "--init-from out/pu_d3/checkpoint.ckpt --freeze-features --split frac:0.05 "
     "--seed 2 --out out/transfer"),
    ("Training-fraction sweep on Pavia University",
     f"cubenn sweep --cube {DATA_DIR}/pavia_university.hsc --gt {DATA_DIR}/pavia_university.hsg "
     "--family d --spatial 5 --fractions 0.05,0.06,0.07,0.08,0.09 --seed 1 --out out/sweep"),
]
for title, cmd in experiments:
    print(f"  # {title}")
    print(f"  {cmd}\n")

print("Step 3 - the acceptance thresholds live in tests/test_acceptance.py:")
print("  HSI_DATA_DIR=datasets pytest tests/test_acceptance.py -v -s        # scene criteria")
print("  HSI_FULL=1 HSI_DATA_DIR=datasets pytest tests/test_acceptance.py  # multi-hour ones\n")

ksc = DATA_DIR / "ksc.hsc"
if ksc.exists():
    print(f"Found {ksc}; running the quickest experiment (KSC, family d)...")
    sys.exit(subprocess.call(experiments[4][1], shell=True))
print(f"No converted scenes under {DATA_DIR}/ yet; nothing to run.")
