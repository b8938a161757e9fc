"""
Synthetic data generation, the MPNF container and result exports.
"""
