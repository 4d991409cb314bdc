import sys

from schem2net.cli import main

sys.exit(main())
