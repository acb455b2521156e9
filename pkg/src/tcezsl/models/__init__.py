from importlib import import_module
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Protocol, Type, Union, cast

import numpy as np

from ..embedspace import ConceptSpace, WordVecTable
from ..errors import ConfigError

if TYPE_CHECKING:
    from ._base import BaseModel

_models = {
    'tce': 'tcezsl.models.tce.TceModel',
    'visprod': 'tcezsl.models.visprod.VisProdModel',
    'labelembed': 'tcezsl.models.labelembed.LabelEmbedModel',
}


class ModelFactory(Protocol):
    NAME: str
    DEFAULT_WEIGHT_DECAY: float
    LATENT_KEY: str

    def __call__(
        self,
        space: ConceptSpace,
        feature_dim: int,
        word_dim: int = ...,
        latent_dim: int = ...,
        rng: Optional[np.random.Generator] = ...,
        words: Optional[WordVecTable] = ...,
        **options: Any,
    ) -> "BaseModel": ...

_cached_models: Dict[str, ModelFactory] = {}

ModelRef = Union[str, Type["BaseModel"]]  # registry name or dotted path


def import_model(name: ModelRef) -> ModelFactory:
    if not isinstance(name, str):
        return cast(ModelFactory, name)

    if name in _cached_models:
        return _cached_models[name]

    if name in _models:
        module_path, cls_name = _models[name].rsplit(".", 1)
    elif "." in name:
        module_path, cls_name = name.rsplit(".", 1)
    else:
        raise ConfigError('unknown model {!r}, expected one of {}'.format(name, sorted(_models)))

    try:
        module = import_module(module_path)
        model = cast(ModelFactory, getattr(module, cls_name))
    except (ImportError, AttributeError) as e:
        raise ConfigError('cannot import model {!r}: {}'.format(name, e))
    _cached_models[name] = model
    return model


def model_names() -> List[str]:
    return sorted(_models)


__all__ = ['import_model', 'model_names', 'ModelFactory']
