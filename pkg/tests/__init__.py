"""
Tests package for the Fowler lab.
"""
