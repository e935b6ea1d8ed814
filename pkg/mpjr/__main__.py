"""Allow `python -m mpjr`."""

import sys

from mpjr.main import main

sys.exit(main())
