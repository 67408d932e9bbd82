#!/usr/bin/env python3
"""Exit 0 if Python >= 3.10 and numpy/scipy import, else 1 with a clear message. Run after activating the venv."""
import sys

if sys.version_info < (3, 10):
    v = sys.version_info
    print(
        f"This project requires Python 3.10+. You have {v.major}.{v.minor}.{v.micro}.",
        file=sys.stderr,
    )
    print("  rm -rf .venv && python3 -m venv .venv && source .venv/bin/activate", file=sys.stderr)
    sys.exit(1)

try:
    import numpy
    import scipy
except ImportError as e:
    print(f"Missing dependency: {e.name}. Run: pip install -r requirements-dev.txt", file=sys.stderr)
    sys.exit(1)

print(f"OK: Python {sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}, numpy {numpy.__version__}, scipy {scipy.__version__}")
sys.exit(0)
