#!/usr/bin/env python3
"""Fast shakeout: the full study suite at K = 2 (about a minute)."""
import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from blochhom.cli import main

CFG = """\
K = 2
j_range = [2, 3, 4, 5, 6]
chi_grid_n = 3
gammas = [-0.5, 0.0, 1.0]
eps_ladder = [0.5, 0.25, 0.125, 0.0625, 0.03125]
out_dir = "{out}"
seed = 1234

[medium]
builder = "laminate"
fraction = 0.5
axis = 1
resolution = 16
phases = [{{lambda = 1.0, mu = 1.0}}, {{lambda = 2.0, mu = 2.0}}]
"""

if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = os.path.join(tmp, "quick.toml")
        with open(cfg_path, 'w') as fh:
            fh.write(CFG.format(out=os.path.join(tmp, "out")))
        code = main(["all", "--config", cfg_path] + sys.argv[1:])
        print(f"quick check exit status: {code}")
        sys.exit(code)
