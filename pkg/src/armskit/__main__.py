"""Entry point for python -m armskit."""

import sys

from .bench import main

if __name__ == "__main__":
    sys.exit(main())
