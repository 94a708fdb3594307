"""Presentation-only rendering of lss experiment artifacts.

Reads the long-format experiment CSVs (point, statistic, value, se, bound)
and report JSONs; never recomputes or re-derives statistics.
"""

__version__ = "0.1.0"
