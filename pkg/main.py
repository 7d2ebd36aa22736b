"""
Main entry point for the fragcalc command-line toolkit.
"""
import sys

from fragcalc.cli import main

if __name__ == "__main__":
    sys.exit(main())
