"""
Plain-text key-value configuration.

Files use the INI layout of ``setup.cfg``::

  [train]
  epochs = 200
  batch_size = 32

  [augment]
  view_consistent = true

Every config type is a frozen ``attrs`` class,
its fields are filled from one section with :func:`config_from_mapping`.
"""

import configparser
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Type, TypeVar

import attr
from returns.io import IOResult, impure_safe
from returns.result import Failure, Result, Success
from typing_extensions import Final

from lstcmda.primitives.exceptions import ConfigurationError

_ConfigType = TypeVar('_ConfigType')

_TRUE: Final = frozenset(('1', 'true', 'yes', 'on'))
_FALSE: Final = frozenset(('0', 'false', 'no', 'off'))

Sections = Dict[str, Dict[str, str]]


def read_config(path: Path) -> IOResult[Sections, Exception]:
    """Reads every section of a configuration file."""
    return _read_text(path).bind_result(parse_config)


def parse_config(text: str) -> Result[Sections, ConfigurationError]:
    """
    Parses configuration text into plain string sections.

    .. code:: python

      >>> parse_config('[train]\\nepochs = 3\\n').unwrap()
      {'train': {'epochs': '3'}}

    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        return Failure(ConfigurationError(str(exc)))
    return Success({
        section: dict(parser.items(section)) for section in parser.sections()
    })


def config_from_mapping(
    config_type: Type[_ConfigType],
    mapping: Mapping[str, Any],
) -> Result[_ConfigType, ConfigurationError]:
    """
    Builds a config object, converting strings by the field type.

    Unknown keys and values that break a validator are failures.

    .. code:: python

      >>> import attr
      >>> @attr.s(frozen=True, auto_attribs=True)
      ... class Demo(object):
      ...     steps: int = 1
      ...     rate: float = 0.5
      >>> config_from_mapping(Demo, {'steps': '3'}).unwrap()
      Demo(steps=3, rate=0.5)
      >>> config_from_mapping(Demo, {'speed': '3'}).failure()
      ConfigurationError("Demo has no option 'speed'")

    """
    fields = attr.fields_dict(config_type)
    unknown = sorted(set(mapping) - set(fields))
    if unknown:
        return Failure(ConfigurationError(
            '{0} has no option {1}'.format(
                config_type.__name__,
                ', '.join(repr(key) for key in unknown),
            ),
        ))
    try:
        values = {
            key: _coerce(fields[key], raw) for key, raw in mapping.items()
        }
        return Success(config_type(**values))  # type: ignore
    except (TypeError, ValueError) as exc:
        return Failure(ConfigurationError('{0}: {1}'.format(
            config_type.__name__, exc,
        )))


def section_of(
    sections: Sections,
    name: str,
) -> Dict[str, str]:
    """A section by name, empty when the file does not have it."""
    return dict(sections.get(name, {}))


def _coerce(field: 'attr.Attribute[Any]', raw: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    annotation = field.type
    text = raw.strip()
    if annotation is bool:
        return _boolean(text)
    if annotation in (int, float, str):
        return annotation(text)
    if annotation in (Tuple[int, ...], Tuple[float, ...], Tuple[str, ...]):
        item = annotation.__args__[0]
        return tuple(
            item(part.strip()) for part in text.split(',') if part.strip()
        )
    return text


def _boolean(text: str) -> bool:
    lowered = text.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError('{0!r} is not a boolean'.format(text))


@impure_safe
def _read_text(path: Path) -> str:
    return path.read_text(encoding='utf-8')
