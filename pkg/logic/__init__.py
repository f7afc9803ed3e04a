"""
Logic package for the 1-bit massive MIMO channel-estimation workbench.
"""
__version__ = "1.0.0"
