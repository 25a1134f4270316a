import sys

from mdscm.cli import main

sys.exit(main())
