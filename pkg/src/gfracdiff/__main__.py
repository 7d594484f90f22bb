import sys

from gfracdiff.cli import main

sys.exit(main())
