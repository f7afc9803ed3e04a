"""
Command-line surface of the channel-estimation workbench.
"""
