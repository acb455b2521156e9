import os
import re
from typing import Iterator, Tuple

ROOT = os.path.dirname(__file__)

#: a ``## heading`` line, or an example block: inputs, a lone ``.``, expected output
_BLOCK = re.compile(
    r'^`{32} example\n(?P<given>[\s\S]*?)^\.\n(?P<expected>[\s\S]*?)^`{32}$'
    r'|^## +(?P<heading>.+)$',
    flags=re.M,
)


def load_examples(filename: str) -> Iterator[Tuple[str, str, str]]:
    """Yield ``(name, given, expected)`` for every example block of a
    fixture file; names are the lowercased heading plus a counter.
    """
    with open(os.path.join(ROOT, filename), encoding='utf-8') as f:
        text = f.read()

    heading = os.path.splitext(filename)[0]
    counter = 0
    for match in _BLOCK.finditer(text):
        if match.group('heading'):
            heading = re.sub(r'\W+', '_', match.group('heading').strip().lower())
            counter = 0
        elif match.group('given') is not None:
            counter += 1
            yield '{}_{:03d}'.format(heading, counter), match.group('given'), match.group('expected')
