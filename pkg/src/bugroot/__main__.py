from bugroot.cli import main
import sys

sys.exit(main())
