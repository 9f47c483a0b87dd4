"""Putback-based bidirectional transformations over in-memory relations.

Write the update strategy (put) as a UST program; the view query (get) is
derived from it.
"""

from ._core import (
    Database,
    Program,
    PutbackError,
    PutResult,
    check_roundtrip,
    check_validity,
    distribute_payment,
    get,
    put,
    run_scenario,
)

__all__ = [
    "Database",
    "Program",
    "PutbackError",
    "PutResult",
    "check_roundtrip",
    "check_validity",
    "distribute_payment",
    "get",
    "put",
    "run_scenario",
]
