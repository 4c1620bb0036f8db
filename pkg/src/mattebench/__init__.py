"""Portrait-matting maths toolkit.

Compositing, matting losses, binary morphology, evaluation metrics,
dataset synthesis and a shape validator for the dual-encoder generator.
"""

__version__ = "0.1.0"
