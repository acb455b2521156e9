import os
from abc import abstractmethod
from typing import Dict
from unittest import TestCase

import numpy as np

from tests import fixtures


class BaseTestCase(TestCase):
    @classmethod
    def load_fixtures(cls, case_file: str) -> None:
        def attach_case(n: str, text: str, expected: str) -> None:
            def method(self: 'BaseTestCase') -> None:
                self.assert_case(n, text, expected)

            name = 'test_{}'.format(n)
            method.__name__ = name
            method.__doc__ = 'Run fixture {} - {}'.format(case_file, n)
            setattr(cls, name, method)

        for n, text, expected in fixtures.load_examples(case_file):
            if cls.ignore_case(n):
                continue
            attach_case(n, text, expected)

    @classmethod
    def ignore_case(cls, name: str) -> bool:
        return False

    @abstractmethod
    def compute(self, text: str) -> str: ...

    def assert_case(self, name: str, text: str, expected: str) -> None:
        result = self.compute(text)
        self.assertEqual(result.strip(), expected.strip())


def parse_fields(text: str) -> Dict[str, str]:
    """Read ``key: value`` lines of a fixture block."""
    fields = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(':')
        fields[key.strip()] = value.strip()
    return fields


def slow_tests_enabled() -> bool:
    return os.environ.get('TCE_SLOW_TESTS') == '1'


def small_dataset(**kwargs):
    """A synthetic dataset small enough for unit tests."""
    from tcezsl.dataforge import SynthSpec, generate_synthetic

    values = dict(
        m=4, n=3, feature_dim=8, seen_fraction=0.6, samples_per_concept=6,
        eval_per_concept=4, word_dim=6, seed=0,
    )
    values.update(kwargs)
    return generate_synthetic(SynthSpec(**values))


def numeric_grad(func, array, eps=1e-5):
    """Central differences of the scalar ``func()`` wrt every entry of
    ``array``, which is perturbed in place and restored.

    Entries whose step straddles a kink (ReLU, hinge) are NaN: there the
    estimates at ``eps`` and ``eps / 2`` disagree.
    """

    def central(idx, orig, step):
        array[idx] = orig + step
        up = func()
        array[idx] = orig - step
        down = func()
        array[idx] = orig
        return (up - down) / (2 * step)

    grad = np.zeros_like(array)
    it = np.nditer(array, flags=['multi_index'])
    for _ in it:
        idx = it.multi_index
        orig = array[idx]
        full = central(idx, orig, eps)
        half = central(idx, orig, eps / 2)
        if abs(full - half) > 1e-7 * (1.0 + abs(full)):
            grad[idx] = np.nan
        else:
            grad[idx] = full
    return grad


def relative_error(a, b):
    """Largest difference of ``a`` and ``b`` relative to their scale,
    skipping entries where ``b`` is NaN.
    """
    keep = ~np.isnan(b)
    a = np.asarray(a)[keep]
    b = np.asarray(b)[keep]
    if not b.size:
        return 0.0
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b)) / scale)
