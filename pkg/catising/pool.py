"""Index-addressed work pool on QThreadPool.

Results land in slots keyed by task index, so the output of run_indexed is
the same for any worker count. Tasks are expected to release the GIL
(numba nogil kernels, BLAS, LAPACK).
"""

from typing import Any, Callable

from PySide6.QtCore import QRunnable, QThreadPool, qDebug


class _Chunk(QRunnable):
    def __init__(self, fn: Callable[[int], Any], indices: range, results: list, errors: list):
        super().__init__()
        self.setAutoDelete(False)  # Python keeps the reference
        self.fn = fn
        self.indices = indices
        self.results = results
        self.errors = errors

    def run(self):
        for index in self.indices:
            try:
                self.results[index] = self.fn(index)
            except BaseException as error:  # re-raised on the calling thread
                self.errors[index] = error
                return


def run_indexed(fn: Callable[[int], Any], n: int, workers: int = 1) -> list:
    """[fn(0), ..., fn(n - 1)] computed on up to `workers` threads. The error
    of the lowest failing index is re-raised."""
    if workers <= 1 or n <= 1:
        return [fn(index) for index in range(n)]

    results: list = [None] * n
    errors: list = [None] * n
    chunk_size = max(1, n // (4 * workers))
    chunks = [
        _Chunk(fn, range(start, min(start + chunk_size, n)), results, errors)
        for start in range(0, n, chunk_size)
    ]

    pool = QThreadPool()
    pool.setMaxThreadCount(workers)
    qDebug(f"pool: {n} tasks in {len(chunks)} chunks on {workers} threads")
    for chunk in chunks:
        pool.start(chunk)
    pool.waitForDone()

    for error in errors:
        if error is not None:
            raise error
    return results
