import sys

from dul.cli import main

sys.exit(main())
