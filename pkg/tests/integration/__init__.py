"""
Integration tests running the CLI commands end to end.

The tiny pipeline runs by default; desk-scale acceptance runs are marked slow.
"""
