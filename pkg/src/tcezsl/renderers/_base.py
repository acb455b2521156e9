from typing import Any, Callable, ClassVar, Dict, Iterable, Optional

Token = Dict[str, Any]
TokenHandler = Callable[['BaseRenderer', Token], str]


class BaseRenderer(object):
    """Turn result-table tokens into text. The ``type`` of a token names
    the method that renders it: ``table_head`` carries ``columns`` and
    ``table_row`` carries ``label`` and ``values``. Subclasses define
    both; extra token types can be attached with :meth:`register`.
    """

    NAME: ClassVar[str] = "base"

    def __init__(self) -> None:
        self.extra_handlers: Dict[str, TokenHandler] = {}

    def register(self, token_type: str, handler: TokenHandler) -> None:
        """Render tokens of ``token_type`` with ``handler(renderer, token)``,
        e.g. a comment line above the table::

            renderer.register('note', lambda r, token: '# ' + token['text'] + '\\n')
        """
        self.extra_handlers[token_type] = handler

    def handler_for(self, token_type: str) -> Optional[Callable[[Token], str]]:
        method = getattr(type(self), token_type, None)
        if callable(method) and not token_type.startswith('_'):
            return lambda token: method(self, token)
        extra = self.extra_handlers.get(token_type)
        if extra is None:
            return None
        return lambda token: extra(self, token)

    def render_token(self, token: Token) -> str:
        handler = self.handler_for(token['type'])
        if handler is None:
            raise AttributeError('{} cannot render {!r} tokens'.format(self.NAME, token['type']))
        return handler(token)

    def __call__(self, tokens: Iterable[Token]) -> str:
        return ''.join(self.render_token(token) for token in tokens)
