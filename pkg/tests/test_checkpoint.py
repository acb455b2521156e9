import os
import struct
import tempfile
from unittest import TestCase

import numpy as np

from tcezsl.checkpoint import load_checkpoint, restore_model, save_checkpoint
from tcezsl.embedspace import split_concepts
from tcezsl.errors import CompatibilityError, FormatError
from tcezsl.models.labelembed import LabelEmbedModel
from tcezsl.models.tce import TceModel
from tcezsl.models.visprod import VisProdModel
from tests.test_models import make_space


class TestCheckpoint(TestCase):
    def setUp(self):
        self.space = make_space(3, 4)
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.path = os.path.join(tmp.name, 'model.ckpt')

    def assert_restores(self, model):
        save_checkpoint(model, self.path)
        restored = restore_model(self.path, self.space, model.feature_dim)
        self.assertIs(type(restored), type(model))
        self.assertEqual(restored.dims(), model.dims())
        for name, value in model.parameters().items():
            self.assertTrue(np.array_equal(restored.parameters()[name], value), name)
        features = np.random.default_rng(0).standard_normal((3, model.feature_dim))
        self.assertTrue(np.array_equal(restored.score(features).scores, model.score(features).scores))

    def test_models_restore_exactly(self):
        rng = np.random.default_rng(1)
        self.assert_restores(TceModel(self.space, 5, word_dim=3, latent_dim=4, rng=rng))
        self.assert_restores(VisProdModel(self.space, 5, latent_dim=6, rng=rng))
        self.assert_restores(LabelEmbedModel(self.space, 5, word_dim=3, rng=rng))

    def test_same_seed_same_bytes(self):
        contents = []
        for _ in range(2):
            model = TceModel(self.space, 5, word_dim=3, latent_dim=4, rng=np.random.default_rng(4))
            save_checkpoint(model, self.path)
            with open(self.path, 'rb') as f:
                contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

    def test_header(self):
        model = TceModel(self.space, 5, word_dim=3, latent_dim=4)
        save_checkpoint(model, self.path)
        with open(self.path, 'rb') as f:
            head = f.read(4 + 4 + 16 + 24)
        magic, version, kind = struct.unpack('<4sI16s', head[:24])
        self.assertEqual(magic, b'TCEZ')
        self.assertEqual(version, 1)
        self.assertEqual(kind.rstrip(b'\0'), b'tce')
        self.assertEqual(struct.unpack('<6I', head[24:]), (3, 4, 4, 3, 5, len(model.parameters())))
        ckpt = load_checkpoint(self.path)
        self.assertEqual(list(ckpt.tensors), list(model.parameters()))

    def test_corrupt_files(self):
        save_checkpoint(TceModel(self.space, 5, word_dim=3, latent_dim=4), self.path)
        with open(self.path, 'rb') as f:
            data = f.read()

        def write(blob):
            with open(self.path, 'wb') as f:
                f.write(blob)

        write(data[:-3])
        self.assertRaises(FormatError, load_checkpoint, self.path)
        write(data + b'\0')
        self.assertRaises(FormatError, load_checkpoint, self.path)
        write(b'NOPE' + data[4:])
        self.assertRaises(FormatError, load_checkpoint, self.path)
        write(data[:4] + struct.pack('<I', 2) + data[8:])
        self.assertRaises(CompatibilityError, load_checkpoint, self.path)

    def test_space_mismatch(self):
        save_checkpoint(TceModel(self.space, 5, word_dim=3, latent_dim=4), self.path)
        other = split_concepts(['a0', 'a1', 'a2'], ['o0', 'o1', 'o2'], 0.6, 0)
        self.assertRaises(CompatibilityError, restore_model, self.path, other)
        self.assertRaises(CompatibilityError, restore_model, self.path, self.space, 7)
