"""Hundred-warehouse stability run: distributed vs centralized one-point.

At this size the global return is two orders of magnitude noisier than
any local sum, so the centralized estimator destabilizes training while
the distributed variant keeps climbing. Takes a few minutes.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from dirmarl.cli import main

if __name__ == "__main__":
    cfg = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "example2.cfg")
    raise SystemExit(main(["run", cfg] + sys.argv[1:]))
