"""
Test modules for the Multimodal Parallel Network project.
"""
