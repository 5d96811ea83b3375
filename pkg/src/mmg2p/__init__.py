"""Multi-module grapheme-to-phoneme conversion for Persian-style scripts."""

from .text import Alphabet, Window5, make_windows, normalize, tokenize

__version__ = "0.1.0"

__all__ = ["Alphabet", "Window5", "make_windows", "normalize", "tokenize", "__version__"]
