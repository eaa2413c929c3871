#!/usr/bin/env python3
"""
Fowler Lab

Runs numerical experiments on singular solutions of coupled critical
elliptic systems and writes their artifacts as CSV or JSON.
"""

import sys

from src.fowler_lab.cli import main, parse_arguments, run_command

__all__ = ["main", "parse_arguments", "run_command"]


if __name__ == "__main__":
    sys.exit(main())
