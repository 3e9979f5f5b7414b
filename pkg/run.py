"""
Entry point for the command-line tool and the HTTP service (`run.py serve`).
"""
import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
