"""Nine-warehouse comparison: four algorithms, ten repeats, shared streams.

Writes per-run CSVs plus summary files under runs/example1 (override with
DIRMARL_OUTPUT_DIR). Expect the distributed variants to climb faster and
show tighter cross-repeat spread than their centralized counterparts.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from dirmarl.cli import main

if __name__ == "__main__":
    cfg = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "example1.cfg")
    raise SystemExit(main(["run", cfg] + sys.argv[1:]))
