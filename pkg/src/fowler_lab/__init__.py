"""
Fowler lab package: singular solutions of coupled critical elliptic systems.
"""
