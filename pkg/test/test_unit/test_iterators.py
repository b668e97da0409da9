import unittest

from hierops.api import BatchIterator, RealizationPool


def _double(batch):
    return [2 * x for x in batch]


class test_iterators(unittest.TestCase):
    def test_BatchIterator(self):
        b = BatchIterator(iter(range(129)))

        self.assertEqual(64, len(list(next(b))))
        self.assertEqual(64, len(list(next(b))))
        self.assertEqual(1, len(list(next(b))))

        with self.assertRaises(StopIteration):
            next(b)

    def test_BatchIterator_custom_size(self):
        self.assertEqual([[0, 1, 2], [3, 4]], list(BatchIterator(iter(range(5)), n=3)))


class test_RealizationPool(unittest.TestCase):
    def test_serial_map(self):
        pool = RealizationPool(1)

        self.assertEqual(
            [[0, 2], [4, 6], [8]], pool.map(_double, BatchIterator(iter(range(5)), n=2))
        )

    def test_worker_map_keeps_order(self):
        pool = RealizationPool(2)

        self.assertEqual(
            [[0, 2], [4, 6], [8]], pool.map(_double, BatchIterator(iter(range(5)), n=2))
        )

    def test_worker_count_is_at_least_one(self):
        self.assertEqual(1, RealizationPool(0).workers)
