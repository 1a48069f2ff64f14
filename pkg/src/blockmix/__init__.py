"""blockmix: Glauber and block dynamics for k-colorings and the hard-core
model on sparse random graphs, with exact block resampling, coupling and
disagreement-percolation instrumentation, and spectral verification."""

__version__ = "0.1.0"
