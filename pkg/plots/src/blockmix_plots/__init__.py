"""Figure rendering for blockmix run directories.

Consumes the CSV/JSON outputs of the blockmix CLI verbatim and renders the
standard figures. Pure functions of file content: no network, no
randomness, no recomputed science beyond fits the CLI already reported
(recomputed fits must agree with the reported ones to 1e-9).
"""

__version__ = "0.1.0"
