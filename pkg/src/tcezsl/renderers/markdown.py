from ._base import BaseRenderer, Token


def _escape(text: str) -> str:
    return text.replace('|', '\\|')


class MarkdownRenderer(BaseRenderer):
    """A pipe table for READMEs and issue comments."""
    NAME = 'markdown'

    def table_head(self, token: Token) -> str:
        columns = ['run'] + list(token['columns'])
        head = '| ' + ' | '.join(columns) + ' |\n'
        return head + '|' + '|'.join(['---'] + ['---:'] * (len(columns) - 1)) + '|\n'

    def table_row(self, token: Token) -> str:
        cells = [_escape(token['label'])] + list(token['values'])
        return '| ' + ' | '.join(cells) + ' |\n'
