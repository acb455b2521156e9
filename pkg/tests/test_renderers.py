from unittest import TestCase

from tcezsl.errors import ConfigError
from tcezsl.evaluation import MetricsReport
from tcezsl.renderers import ABLATION_COLUMNS, import_renderer, render_table, table_tokens
from tcezsl.renderers._base import BaseRenderer
from tcezsl.renderers.csv import CsvRenderer


def report(**values):
    base = dict.fromkeys(MetricsReport.FIELDS, 0.0)
    base.update(values)
    return MetricsReport(**base)


class TestRenderers(TestCase):
    def setUp(self):
        self.rows = [('tce', report(open_seen=30.68, all_hm=35.642)), ('visprod', report(auc=2.5))]

    def test_csv(self):
        text = render_table(self.rows, 'csv', ('open_seen', 'all_hm'))
        self.assertEqual(text, 'run,open_seen,all_hm\ntce,30.68,35.64\nvisprod,0.00,0.00\n')

    def test_markdown(self):
        text = render_table([('a|b', report(attr_acc=50))], 'markdown', ABLATION_COLUMNS)
        lines = text.splitlines()
        self.assertEqual(lines[0], '| run | attr_acc | obj_acc | open_unseen | open_seen | all_hm |')
        self.assertEqual(lines[1], '|---|---:|---:|---:|---:|---:|')
        self.assertEqual(lines[2], '| a\\|b | 50.00 | 0.00 | 0.00 | 0.00 | 0.00 |')

    def test_tokens(self):
        tokens = table_tokens(self.rows[:1], ('auc',))
        self.assertEqual(tokens[0], {'type': 'table_head', 'columns': ['auc']})
        self.assertEqual(tokens[1], {'type': 'table_row', 'label': 'tce', 'values': ['0.00']})

    def test_register(self):
        renderer = CsvRenderer()
        renderer.register('note', lambda r, token: '# ' + token['text'] + '\n')
        text = renderer([{'type': 'note', 'text': 'seed 0'}] + table_tokens(self.rows[1:], ('auc',)))
        self.assertEqual(text, '# seed 0\nrun,auc\nvisprod,2.50\n')
        self.assertRaises(AttributeError, renderer.render_token, {'type': 'chart'})

    def test_import(self):
        self.assertIsInstance(import_renderer('markdown'), BaseRenderer)
        renderer = CsvRenderer()
        self.assertIs(import_renderer(renderer), renderer)
        self.assertIsInstance(import_renderer('tcezsl.renderers.csv.CsvRenderer'), CsvRenderer)
        self.assertRaises(ConfigError, import_renderer, 'html')
