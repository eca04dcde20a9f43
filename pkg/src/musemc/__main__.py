"""Allow ``python -m musemc`` as an alias for the ``muse`` console script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
