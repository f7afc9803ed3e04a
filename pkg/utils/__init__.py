"""
Persistence and report exporters for the channel-estimation workbench.
"""
