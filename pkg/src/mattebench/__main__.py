import sys

from mattebench.cli import main

sys.exit(main())
