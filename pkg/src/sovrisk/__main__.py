import sys

from sovrisk.cli import main

sys.exit(main())
