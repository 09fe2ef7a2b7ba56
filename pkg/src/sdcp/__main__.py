import sys

from sdcp.cli import main

sys.exit(main())
