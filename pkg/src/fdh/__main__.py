import sys

from fdh.cli import main

sys.exit(main())
