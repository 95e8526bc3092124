import os
import sys

_ROOT = os.path.dirname(os.path.abspath(__file__))
for sub in ("src", "tests"):
    path = os.path.join(_ROOT, sub)
    if path not in sys.path:
        sys.path.insert(0, path)
