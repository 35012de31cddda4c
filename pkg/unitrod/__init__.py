"""
unitrod
Unit-distance rods, the 3-coloring reduction to weighted-graph embedding,
witness embeddings and numerical checks around them
"""

__version__ = "0.1.0"
