"""
Coherent Deal package
Coherent and spectral risk measures, good-deal pricing and hedging on finite scenario sets.
"""

__version__ = "1.0.0"
