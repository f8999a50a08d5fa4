"""Allow ``python -m meanfield_ldp``."""

import sys

from .cli import main

sys.exit(main())
