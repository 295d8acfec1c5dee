"""Human discrimination test: HTTP service, pair pool, response analysis."""

from .pairs import PairRecord, build_pair_pool, load_pair_pool, render_molecule
from .report import turing_report
from .service import (
    EXPERTISE_LEVELS,
    ROUNDS_PER_SESSION,
    SessionStore,
    TuringSession,
    create_app,
)

__all__ = [
    "EXPERTISE_LEVELS",
    "PairRecord",
    "ROUNDS_PER_SESSION",
    "SessionStore",
    "TuringSession",
    "build_pair_pool",
    "create_app",
    "load_pair_pool",
    "render_molecule",
    "turing_report",
]
