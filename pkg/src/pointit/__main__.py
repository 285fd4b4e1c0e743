import sys

from pointit.cli import main

sys.exit(main())
