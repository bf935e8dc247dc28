import os
from concurrent.futures import ThreadPoolExecutor


def default_threads():
    try:
        return max(1, int(os.environ.get("MCREG_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items, threads=None):
    """Ordered map; runs on a thread pool when ``threads > 1``.

    The numba kernels release the GIL, and every task writes only its own
    result, so output does not depend on scheduling.
    """
    items = list(items)
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
