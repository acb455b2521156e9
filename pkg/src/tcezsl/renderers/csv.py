import csv
import io
from typing import List

from ._base import BaseRenderer, Token


class CsvRenderer(BaseRenderer):
    """Comma separated rows, the header first."""
    NAME = 'csv'

    def _line(self, cells: List[str]) -> str:
        out = io.StringIO()
        csv.writer(out, lineterminator='\n').writerow(cells)
        return out.getvalue()

    def table_head(self, token: Token) -> str:
        return self._line(['run'] + list(token['columns']))

    def table_row(self, token: Token) -> str:
        return self._line([token['label']] + list(token['values']))
