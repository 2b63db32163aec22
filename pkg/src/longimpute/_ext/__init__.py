"""Compiled kernels (Cython). Build with ``pip install -e . --no-build-isolation``."""
