import os
import tempfile
from unittest import TestCase, mock

from tcezsl.config import (
    build_config,
    coerce,
    load_config,
    parse_config_text,
    resolve_config,
    write_run_manifest,
)
from tcezsl.errors import ConfigError


class TestConfigFiles(TestCase):
    def test_parse(self):
        text = '# comment\n\nmodel = visprod\n  lambda_rvc=0.5  \n'
        self.assertEqual(parse_config_text(text), {'model': 'visprod', 'lambda_rvc': '0.5'})
        with self.assertRaises(ConfigError) as cm:
            parse_config_text('model visprod\n', 'run.cfg')
        self.assertIn('run.cfg:1', str(cm.exception))

    def test_coerce(self):
        self.assertEqual(coerce('max_epochs', '7'), 7)
        self.assertIs(coerce('rvc_include_unseen', 'yes'), True)
        self.assertIsNone(coerce('weight_decay', 'none'))
        self.assertRaises(ConfigError, coerce, 'epochs', '7')
        self.assertRaises(ConfigError, coerce, 'max_epochs', 'many')
        self.assertRaises(ConfigError, coerce, 'rvc_frozen_semantics', 'maybe')


class TestResolve(TestCase):
    def test_precedence(self):
        snapshot = resolve_config({'max_epochs': '5', 'm_r': '2'}, {'max_epochs': 9, 'batch_size': None})
        self.assertEqual(snapshot['max_epochs'], 9)
        self.assertEqual(snapshot['m_r'], 2.0)
        self.assertEqual(snapshot['batch_size'], 512)
        config = build_config(snapshot)
        self.assertEqual(config.weights.m_r, 2.0)
        self.assertEqual(config.max_epochs, 9)

    def test_seed_from_environment(self):
        with mock.patch.dict(os.environ, {'TCE_SEED': '17'}):
            self.assertEqual(resolve_config()['seed'], 17)
            self.assertEqual(resolve_config({'seed': '3'})['seed'], 3)
            self.assertEqual(resolve_config(None, {'seed': 4})['seed'], 4)
        with mock.patch.dict(os.environ, {'TCE_SEED': 'abc'}):
            self.assertRaises(ConfigError, resolve_config)

    def test_invalid_values(self):
        self.assertRaises(ConfigError, resolve_config, {'batch_size': '0'})
        self.assertRaises(ConfigError, resolve_config, {'auc_smax_mode': 'median'})
        self.assertRaises(ConfigError, resolve_config, {'lambda_tri': '-1'})

    def test_manifest_roundtrip(self):
        snapshot = resolve_config({'lambda_rvc': '0.1', 'weight_decay': 'none'})
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'run_manifest.txt')
            write_run_manifest(path, {'command': 'train', 'data': 'data/x'}, snapshot)
            values = load_config(path)
        self.assertEqual(values['command'], 'train')
        self.assertEqual(values['weight_decay'], 'none')
        self.assertEqual(resolve_config(values), snapshot)
