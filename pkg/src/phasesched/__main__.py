import sys

from phasesched.cli import main

sys.exit(main())
