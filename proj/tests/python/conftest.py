"""Make the smoke tests work without an installed wheel by falling back to
the extension module in the CMake build tree."""

import glob
import importlib
import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

try:
    import consult  # noqa: F401  (installed package)
except ImportError:
    build_dir = os.path.join(ROOT, "build")
    if glob.glob(os.path.join(build_dir, "_consult.*")):
        sys.path.insert(0, build_dir)
        sys.modules["consult._consult"] = importlib.import_module("_consult")
        sys.path.insert(0, os.path.join(ROOT, "python"))
        import consult  # noqa: F401
