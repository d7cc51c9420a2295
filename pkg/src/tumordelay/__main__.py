import sys

from tumordelay.cli import main

sys.exit(main())
