import sys

from probsess.cli import main

sys.exit(main())
