import concurrent.futures
import itertools
import logging


def BatchIterator(iterator, n=64):
    while True:
        batch = list(itertools.islice(iterator, n))
        if not batch:
            return

        yield batch


class RealizationPool(object):
    """Runs batches of realizations, serially or on worker processes.

    Results come back in submission order regardless of which worker
    finishes first, so output never depends on the worker count.
    """

    def __init__(self, workers=1):
        self.workers = max(1, workers)
        self.logger = logging.getLogger("hierops")

    def map(self, function, batches):
        if self.workers == 1:
            return [function(batch) for batch in batches]

        self.logger.debug("Dispatching batches to %d worker processes", self.workers)
        with concurrent.futures.ProcessPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(function, batch) for batch in batches]
            return [f.result() for f in futures]
