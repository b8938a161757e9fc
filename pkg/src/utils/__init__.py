"""
Shared infrastructure: configuration, errors, logging, random numbers and tensors.
"""
