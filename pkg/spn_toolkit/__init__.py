"""
Sum-product networks: construction, validity checking, exact inference,
weight learning, dense image architectures and occlusion completion.
"""

__version__ = "0.1.0"
