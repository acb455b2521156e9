import os
import tempfile
from unittest import TestCase

import numpy as np

from tcezsl.embedspace import (
    ConceptSpace,
    WordVecTable,
    concept_semantic,
    load_word_vectors,
    split_concepts,
    write_word_vectors,
)
from tcezsl.errors import ConfigError, DataValidationError, FormatError, ShapeError


class TestConceptSpace(TestCase):
    def test_enumeration(self):
        space = ConceptSpace(['red', 'old'], ['car', 'cat'], [(1, 0), (0, 1)], [(1, 1), (0, 0)])
        self.assertEqual(space.concepts(), [(0, 0), (0, 1), (1, 0), (1, 1)])
        self.assertTrue(space.is_seen((1, 0)))
        self.assertFalse(space.is_seen((0, 0)))
        self.assertEqual(space.concept_name((0, 1)), 'red cat')
        self.assertEqual(space.obj_index('cat'), 1)
        self.assertRaises(DataValidationError, space.attr_index, 'blue')

    def test_validation(self):
        attrs, objs = ['red', 'old'], ['car', 'cat']
        self.assertRaises(
            DataValidationError, ConceptSpace, attrs, objs, [(0, 0), (1, 1)], [(0, 0)]
        )
        self.assertRaises(IndexError, ConceptSpace, attrs, objs, [(0, 0), (1, 1)], [(2, 0)])
        # object 1 only appears unseen
        self.assertRaises(DataValidationError, ConceptSpace, attrs, objs, [(0, 0), (1, 0)], [(1, 1)])
        self.assertRaises(DataValidationError, ConceptSpace, ['a', 'a'], objs, [(0, 0), (1, 1)], [])


class TestSplit(TestCase):
    def test_covering_split(self):
        attrs = ['a{}'.format(i) for i in range(5)]
        objs = ['o{}'.format(i) for i in range(4)]
        for seed in range(5):
            space = split_concepts(attrs, objs, 0.5, seed)
            self.assertEqual(len(space.seen), 10)
            self.assertEqual(len(space.unseen), 10)
            self.assertEqual({a for a, _ in space.seen}, set(range(5)))
            self.assertEqual({o for _, o in space.seen}, set(range(4)))
        self.assertEqual(split_concepts(attrs, objs, 0.5, 3), split_concepts(attrs, objs, 0.5, 3))

    def test_impossible_split(self):
        attrs = ['a{}'.format(i) for i in range(5)]
        objs = ['o{}'.format(i) for i in range(4)]
        self.assertRaises(ConfigError, split_concepts, attrs, objs, 1.5, 0)
        self.assertRaises(ConfigError, split_concepts, attrs, objs, 0.1, 0)
        self.assertRaises(ConfigError, split_concepts, attrs, objs, 0.99, 0)


class TestWordVectors(TestCase):
    def write(self, text):
        fd, path = tempfile.mkstemp(suffix='.txt')
        with os.fdopen(fd, 'w', encoding='utf-8') as f:
            f.write(text)
        self.addCleanup(os.remove, path)
        return path

    def test_load_with_fallback(self):
        path = self.write('red 0.5 1.0 -1.0\ncar 1 2 3\nextra 0 0 0\n')
        with self.assertLogs('tcezsl.embedspace', 'WARNING'):
            table = load_word_vectors(path, ['red', 'car', 'zebra'], seed=4)
        self.assertEqual(table.dim, 3)
        self.assertTrue(np.array_equal(table.lookup('red'), [0.5, 1.0, -1.0]))
        self.assertNotIn('extra', table)
        self.assertEqual(table.missing, ['zebra'])
        fallback = table.lookup('zebra')
        self.assertTrue(np.all(np.abs(fallback) <= 0.1))

        again = load_word_vectors(path, ['red', 'car', 'zebra'], seed=4)
        self.assertTrue(np.array_equal(again.lookup('zebra'), fallback))

    def test_malformed_files(self):
        ragged = self.write('red 1 2\ncar 1 2 3\n')
        self.assertRaises(FormatError, load_word_vectors, ragged, ['red'])
        bad_number = self.write('red 1 x\n')
        self.assertRaises(FormatError, load_word_vectors, bad_number, ['red'])
        good = self.write('red 1 2\n')
        self.assertRaises(FormatError, load_word_vectors, good, ['red'], 0, 3)

    def test_empty_file_uses_requested_dim(self):
        path = self.write('')
        with self.assertLogs('tcezsl.embedspace', 'WARNING'):
            table = load_word_vectors(path, ['red'], dim=5)
        self.assertEqual(table.lookup('red').shape, (5,))

    def test_table(self):
        table = WordVecTable(2, {'a': [1.0, 2.0]})
        rows = table.rows(['a', 'a'])
        rows[0, 0] = 9.0
        self.assertEqual(table.lookup('a')[0], 1.0)
        self.assertRaises(ShapeError, WordVecTable, 3, {'a': [1.0, 2.0]})
        self.assertRaises(ShapeError, WordVecTable, 0, {})

        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'words.txt')
            write_word_vectors(WordVecTable(2, {'a': [0.1, 1 / 3]}), path)
            loaded = load_word_vectors(path, ['a'])
            self.assertEqual(loaded.lookup('a')[1], 1 / 3)

    def test_concept_semantic(self):
        self.assertTrue(np.array_equal(concept_semantic([1.0, 2.0], [3.0, 4.0]), [4.0, 6.0]))
        self.assertRaises(ShapeError, concept_semantic, [1.0], [1.0, 2.0])
