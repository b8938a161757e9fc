"""
Command-line scripts for the Multimodal Parallel Network project.
"""
