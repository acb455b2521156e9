import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import __version__ as version
from .checkpoint import restore_model, save_checkpoint
from .config import build_config, load_config, resolve_config, write_run_manifest
from .dataforge import Dataset, SynthSpec, expected_counts, generate_synthetic, load_feature_dataset, write_dataset
from .embedspace import load_word_vectors
from .errors import ConfigError, TceError
from .evaluation import read_metrics_csv, write_curve_csv, write_metrics_csv
from .hooks import add_csv_log_hook
from .renderers import ABLATION_COLUMNS, REPORT_COLUMNS, render_table
from .trainer import Trainer, ablation_matrix, evaluate, rvc_sweep
from .util import seed_from_env

log = logging.getLogger('tcezsl')

MANIFEST_FILE = 'run_manifest.txt'
EVAL_MANIFEST_FILE = 'eval_manifest.txt'
CHECKPOINT_FILE = 'model.ckpt'
TRAIN_LOG_FILE = 'train_log.csv'
METRICS_FILE = 'metrics.csv'
CURVE_FILE = 'curve.csv'


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError('{!r} is not a number'.format(text))
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError('must lie in (0, 1), got {}'.format(text))
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError('{!r} is not an integer'.format(text))
    if value <= 0:
        raise argparse.ArgumentTypeError('must be positive, got {}'.format(text))
    return value


def _assignment(text: str) -> Tuple[str, str]:
    key, sep, value = text.partition('=')
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError('expected key=value, got {!r}'.format(text))
    return key.strip(), value.strip()


def _output(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _load_dataset(args: argparse.Namespace, seed: int) -> Dataset:
    dataset = load_feature_dataset(args.data, seed=seed)
    if getattr(args, 'words', None):
        space = dataset.space
        dataset.word_vectors = load_word_vectors(
            args.words, space.attributes + space.objects, seed=seed
        )
    return dataset


def cmd_gen_data(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else seed_from_env()
    spec = SynthSpec(
        m=args.attrs,
        n=args.objs,
        feature_dim=args.feature_dim,
        seen_fraction=args.seen_frac,
        samples_per_concept=args.per_concept,
        eval_per_concept=args.eval_per_concept,
        noise_sigma=args.noise,
        context_strength=args.context,
        word_dim=args.word_dim,
        semantic_noise=args.semantic_noise,
        seed=seed,
    )
    dataset = generate_synthetic(spec)
    path = write_dataset(dataset, args.out, encoding=args.encoding)
    counts = expected_counts(spec)
    space = dataset.space
    print('wrote {}'.format(path))
    print('concepts: {} seen, {} unseen'.format(len(space.seen), len(space.unseen)))
    for split in ('train', 'val', 'test'):
        print('{}: {} samples'.format(split, counts[split]))
    return 0


def _train_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        'model': args.model,
        'max_epochs': args.epochs,
        'batch_size': args.batch_size,
        'seed': args.seed,
        'threads': args.threads,
    }
    for key, value in args.set or []:
        overrides[key] = value
    return overrides


def _parse_sweep(text: str) -> Tuple[str, List[float]]:
    key, sep, values = text.partition('=')
    if not sep:
        raise ConfigError('--sweep expects key=v1,v2,..., got {!r}'.format(text))
    try:
        parsed = [float(v) for v in values.split(',') if v.strip()]
    except ValueError:
        raise ConfigError('--sweep values must be numbers: {!r}'.format(values))
    if not parsed:
        raise ConfigError('--sweep needs at least one value')
    return key.strip(), parsed


def cmd_train(args: argparse.Namespace) -> int:
    file_values = load_config(args.config) if args.config else {}
    snapshot = resolve_config(file_values, _train_overrides(args))
    config = build_config(snapshot)
    sweep = _parse_sweep(args.sweep) if args.sweep else None

    os.makedirs(args.out, exist_ok=True)
    meta = {
        'command': 'train',
        'config_path': args.config or '',
        'data': args.data,
        'output_dir': args.out,
        'tool_version': version,
    }
    write_run_manifest(os.path.join(args.out, MANIFEST_FILE), meta, snapshot)

    dataset = _load_dataset(args, config.seed)
    if args.ablation:
        rows = ablation_matrix(dataset, config)
        table = render_table(
            [(row.label, row.report) for row in rows], args.renderer, ABLATION_COLUMNS
        )
        _output(table, os.path.join(args.out, 'ablation.' + _suffix(args.renderer)))
        sys.stdout.write(table)
        return 0

    if sweep:
        key, values = sweep
        results = rvc_sweep(dataset, config, key, values)
        table = render_table(
            [('{}={:g}'.format(key, v), report) for v, report in results], args.renderer
        )
        _output(table, os.path.join(args.out, 'sweep.' + _suffix(args.renderer)))
        sys.stdout.write(table)
        return 0

    trainer = Trainer(config)
    add_csv_log_hook(trainer, os.path.join(args.out, TRAIN_LOG_FILE))
    model, train_log = trainer.fit(dataset)
    save_checkpoint(model, os.path.join(args.out, CHECKPOINT_FILE))
    best = train_log.best_report
    if best is not None:
        print('best epoch {} (validation all_hm {:.2f})'.format(train_log.best_epoch, best.all_hm))
    print('wrote {}'.format(os.path.join(args.out, CHECKPOINT_FILE)))
    return 0


def _suffix(renderer: str) -> str:
    return 'md' if renderer == 'markdown' else 'csv'


def cmd_eval(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else seed_from_env()
    dataset = _load_dataset(args, seed)
    model = restore_model(args.checkpoint, dataset.space, dataset.feature_dim)
    report, curve = evaluate(
        model, dataset, args.split, bins=args.bins, smax_mode=args.smax_mode,
        threads=args.threads,
    )
    out = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out, exist_ok=True)
    meta = {
        'command': 'eval',
        'checkpoint': args.checkpoint,
        'data': args.data,
        'split': args.split,
        'output_dir': out,
        'tool_version': version,
    }
    settings = {
        'seed': seed, 'bins': args.bins, 'auc_smax_mode': args.smax_mode, 'threads': args.threads,
    }
    write_run_manifest(os.path.join(out, EVAL_MANIFEST_FILE), meta, settings)
    write_metrics_csv(report, os.path.join(out, METRICS_FILE))
    if curve is not None:
        write_curve_csv(curve, os.path.join(out, CURVE_FILE))
    sys.stdout.write(render_table([(args.split, report)], 'csv'))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rows = []
    for run in args.runs:
        if run.endswith('.csv'):
            path, label = run, os.path.basename(os.path.dirname(os.path.abspath(run)))
        else:
            path, label = os.path.join(run, METRICS_FILE), os.path.basename(os.path.normpath(run))
        rows.append((label, read_metrics_csv(path)))
    _output(render_table(rows, args.renderer, REPORT_COLUMNS), args.output)
    return 0


CMD_HELP = '''Translational concept embeddings for compositional zero-shot learning.

Here are some use cases of the command line tool:

    $ python -m tcezsl gen-data --attrs 16 --objs 12 --seen-frac 0.6 -o data/synth
    $ python -m tcezsl train --data data/synth --model tce --epochs 300 -o runs/tce
    $ python -m tcezsl eval --checkpoint runs/tce/model.ckpt --data data/synth
    $ python -m tcezsl report runs/tce runs/visprod --renderer markdown
'''


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='python -m tcezsl',
        description=CMD_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='log debug messages')
    parser.add_argument('-q', '--quiet', action='store_true', help='log warnings and errors only')
    parser.add_argument('--version', action='version', version='tcezsl ' + version)
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-data', help='write a synthetic compositional dataset')
    gen.add_argument('--attrs', type=_positive, default=16, help='number of attributes')
    gen.add_argument('--objs', type=_positive, default=12, help='number of objects')
    gen.add_argument('--feature-dim', type=_positive, default=64)
    gen.add_argument('--seen-frac', type=_fraction, default=0.6, help='share of seen concepts')
    gen.add_argument('--per-concept', type=_positive, default=50, help='train samples per seen concept')
    gen.add_argument('--eval-per-concept', type=_positive, help='val/test samples per concept')
    gen.add_argument('--noise', type=float, default=0.3, help='feature noise sigma')
    gen.add_argument('--context', type=float, default=0.8, help='context strength in [0, 1]')
    gen.add_argument('--word-dim', type=_positive, default=32)
    gen.add_argument('--semantic-noise', type=float, default=0.1)
    gen.add_argument('--encoding', choices=('text', 'bin'), default='text')
    gen.add_argument('--seed', type=int)
    gen.add_argument('-o', '--out', required=True, help='output directory')
    gen.set_defaults(func=cmd_gen_data)

    tr = sub.add_parser('train', help='train a model and write a checkpoint')
    tr.add_argument('--data', required=True, help='dataset manifest or its directory')
    tr.add_argument('--words', help='word vector file for the attribute and object names')
    tr.add_argument('-c', '--config', help='key = value configuration file')
    tr.add_argument('--model', help='tce, visprod, labelembed or a dotted class path')
    tr.add_argument('--epochs', type=_positive)
    tr.add_argument('--batch-size', type=_positive)
    tr.add_argument('--seed', type=int)
    tr.add_argument('--threads', type=_positive)
    tr.add_argument(
        '--set', type=_assignment, action='append', metavar='KEY=VALUE',
        help='override a configuration key',
    )
    tr.add_argument(
        '--ablation', choices=('table3', 'losses'),
        help='run the loss ablation matrix ("losses" is an alias of "table3")',
    )
    tr.add_argument('--sweep', metavar='KEY=V1,V2', help='sweep rvc_pairs or m_r')
    tr.add_argument('-r', '--renderer', default='csv', help='table renderer for ablations and sweeps')
    tr.add_argument('-o', '--out', required=True, help='run directory')
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser('eval', help='evaluate a checkpoint')
    ev.add_argument('--checkpoint', required=True)
    ev.add_argument('--data', required=True)
    ev.add_argument('--words')
    ev.add_argument('--split', choices=('test', 'val'), default='test')
    ev.add_argument('--bins', type=_positive, default=100)
    ev.add_argument('--threads', type=_positive, default=1)
    ev.add_argument('--smax-mode', choices=('global', 'per_image'), default='global')
    ev.add_argument('--seed', type=int)
    ev.add_argument('-o', '--out', help='output directory, default next to the checkpoint')
    ev.set_defaults(func=cmd_eval)

    rep = sub.add_parser('report', help='merge metrics of several runs into one table')
    rep.add_argument('runs', nargs='+', help='run directories or metrics.csv files')
    rep.add_argument('-r', '--renderer', default='csv', help='csv or markdown')
    rep.add_argument('-o', '--output', help='write the table into file')
    rep.set_defaults(func=cmd_report)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        return int(args.func(args))
    except TceError as e:
        log.error('%s', e)
        return e.exit_code
    except OSError as e:
        log.error('%s', e)
        return 1


def cli() -> None:
    sys.exit(main())


if __name__ == '__main__':
    cli()
