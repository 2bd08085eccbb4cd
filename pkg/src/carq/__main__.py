import sys

from carq.cli import main

sys.exit(main())
