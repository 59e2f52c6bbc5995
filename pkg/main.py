"""Main entry point for the fshapes command line"""

import sys

from fshapes.cli import main

if __name__ == "__main__":
    sys.exit(main())
