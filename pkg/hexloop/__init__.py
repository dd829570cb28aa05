"""
hexloop: the loop O(n) model on hexagonal-lattice domains
Exact enumeration oracles, couplings, domination checks and Monte Carlo tails
"""
__version__ = "0.1.0"
