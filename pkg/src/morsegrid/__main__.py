import sys

from morsegrid.cli import main

sys.exit(main())
