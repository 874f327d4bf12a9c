"""Module entry point: `python -m ringmd ...`."""
import sys

from .cli import main

sys.exit(main())
