"""Worker-count resolution and process-pool construction.

The environment variable ``RANDR_THREADS`` overrides the worker count for
every parallel stage (0 means all cores). Explicit ``workers=`` arguments
take precedence over the environment.
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

ENV_VAR = "RANDR_THREADS"


def resolve_workers(workers: int | None = None) -> int:
    """Effective worker count: explicit argument, else env var, else all cores."""
    if workers is None:
        raw = os.environ.get(ENV_VAR)
        if raw is not None:
            try:
                workers = int(raw)
            except ValueError:
                raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    if workers is None or workers == 0:
        workers = os.cpu_count() or 1
    if workers < 0:
        raise ValueError(f"worker count must be >= 0, got {workers}")
    return workers


def fork_executor(workers: int) -> ProcessPoolExecutor:
    """Process pool sharing parent memory via fork where available.

    Fork keeps large read-only state (texture libraries) shared with zero
    copying; on platforms without fork the default start method is used and
    state must travel through task arguments.
    """
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
    return ProcessPoolExecutor(max_workers=workers, mp_context=ctx)
