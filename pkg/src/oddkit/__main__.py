"""Module runner so ``python -m oddkit`` matches the console script."""

import sys

from oddkit.cli import main

if __name__ == "__main__":
    sys.exit(main())
