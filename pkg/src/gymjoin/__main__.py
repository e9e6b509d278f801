import sys

from gymjoin.cli import main

sys.exit(main())
