"""
Multimodal Parallel Network package.
"""
