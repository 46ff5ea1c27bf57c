"""Non-commutative algebraic signal processing: polynomial filters, spectra, derivatives and stability."""

__version__ = "0.1.0"
