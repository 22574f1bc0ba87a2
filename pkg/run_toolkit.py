#!/usr/bin/env python3
"""
Graph Fujita toolkit runner
"""
import os
import sys

# Make the repository root importable so `src` resolves as a package
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
