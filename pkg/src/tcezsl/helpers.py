import re
from typing import List, Tuple

#: ``key = value`` line of a config or run manifest file
CONFIG_LINE = re.compile(r'^\s*(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*?)\s*$')
COMMENT_LINE = re.compile(r'^\s*(?:#.*)?$')

#: ``key: value`` header line of a dataset manifest
MANIFEST_HEADER = re.compile(r'^(?P<key>[a-z_]+):\s*(?P<value>.*?)\s*$')

#: characters that would break the manifest grammar inside a name
RESERVED_NAME_CHARS = re.compile(r'[,|;:\n\r]')

_LIST_SPLIT = re.compile(r'\s*,\s*')
_CONCEPT_SPLIT = re.compile(r'\s*;\s*')


def split_names(text: str) -> List[str]:
    if not text.strip():
        return []
    return _LIST_SPLIT.split(text.strip())


def split_concept_names(text: str) -> List[Tuple[str, str]]:
    """Parse ``a1|o1;a2|o2`` into name pairs."""
    pairs = []
    for item in _CONCEPT_SPLIT.split(text.strip()):
        if not item:
            continue
        attr, sep, obj = item.partition('|')
        if not sep:
            raise ValueError('concept {!r} is not written as attr|obj'.format(item))
        pairs.append((attr.strip(), obj.strip()))
    return pairs


def join_concept_names(pairs: List[Tuple[str, str]]) -> str:
    return ';'.join(a + '|' + o for a, o in pairs)
