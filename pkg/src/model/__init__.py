"""
Model definition, losses, optimizer and training loops.
"""
