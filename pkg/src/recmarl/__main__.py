import sys

from recmarl.experiment.cli import main

sys.exit(main())
