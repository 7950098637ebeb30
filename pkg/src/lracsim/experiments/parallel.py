"""Order-preserving work queue over replica chunks.

Chunk boundaries depend only on the replica count and ``CHUNK``, never on
the number of workers, so results are identical for any ``threads``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

CHUNK = 25

_threads = 1


def set_threads(n: int) -> None:
    global _threads
    if n < 1:
        raise ValueError("threads must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def chunks(n: int, size: int = CHUNK) -> list[range]:
    return [range(a, min(a + size, n)) for a in range(0, n, size)]


def run_chunks(worker, args_list, threads: int | None = None) -> list:
    """Call ``worker(*args)`` for each entry; results come back in input order."""
    threads = _threads if threads is None else threads
    if threads <= 1 or len(args_list) <= 1:
        return [worker(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=min(threads, len(args_list))) as pool:
        futures = [pool.submit(worker, *a) for a in args_list]
        return [f.result() for f in futures]
