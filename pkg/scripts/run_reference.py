#!/usr/bin/env python3
"""Run the full study suite on the reference laminate configuration."""
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from blochhom.cli import main

if __name__ == "__main__":
    cfg = os.path.join(os.path.dirname(__file__), "configs", "laminate.toml")
    sys.exit(main(["all", "--config", cfg] + sys.argv[1:]))
