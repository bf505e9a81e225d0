import sys

from edgetoll.cli import main

sys.exit(main())
