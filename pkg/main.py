"""
Command-line entry point.

    python main.py gen-data --out data/synthetic.urmf
    python main.py train --strategy tb --epochs 5
    python main.py eval --checkpoint runs/default/checkpoint.urm
    python main.py gradcheck --strategy all
    python main.py inspect --checkpoint runs/default/checkpoint.urm
"""

import sys

from src.ui.command_manager import main

if __name__ == "__main__":
    sys.exit(main())
