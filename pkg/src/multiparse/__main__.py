import sys

from multiparse.cli import main

sys.exit(main())
