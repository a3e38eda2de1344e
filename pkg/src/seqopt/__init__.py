"""
Spreading-sequence design for asynchronous DS-CDMA by optimization in the
spectral (alpha/beta coefficient) domain.

Modules: basis, objective, constraints, kkt, solver, refseq, metrics, cli.
"""

__version__ = "0.1.0"
