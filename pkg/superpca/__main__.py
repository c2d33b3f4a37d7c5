import sys

from superpca.cli import main

sys.exit(main())
