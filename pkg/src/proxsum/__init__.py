"""Oracle complexity of finite-sum convex optimization.

Prox oracles for components ``f_i``, Moreau smoothing, first-order and
variance-reduced solvers, and resisting-oracle and randomized hard instances
that certify lower bounds on the number of oracle queries.
"""
from .kernels import BACKEND
from .oracle import FunctionClass, OracleResponse, Problem, QueryLedger, query

__version__ = "0.1.0"

__all__ = ["BACKEND", "FunctionClass", "OracleResponse", "Problem", "QueryLedger", "query"]
