"""
Run configuration: filter thresholds, split fractions and pipeline constants
"""


import configparser
import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from .errors import FormatError, IoError

logger = logging.getLogger(__name__)

_SECTION = 'diffsbt'
QUERY_FIELDS = ('diff', 'diffsbt')


@dataclass(frozen=True)
class FilterConfig():
    """
    Noise-filter thresholds, counted in whitespace-delimited word tokens
    """
    min_message_tokens: int = 5
    max_message_tokens: int = 30
    max_diff_tokens: int = 170
    max_hunks: int = 1
    template_path: Optional[str] = None

    def __post_init__(self):
        for name in ('min_message_tokens', 'max_message_tokens',
                     'max_diff_tokens', 'max_hunks'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        if self.min_message_tokens > self.max_message_tokens:
            # pylint: disable=line-too-long
            raise ValueError(
                f'min_message_tokens {self.min_message_tokens} exceeds max_message_tokens {self.max_message_tokens}')


@dataclass(frozen=True)
class SplitConfig():
    """
    Partition fractions; train is shared by the pre-training and fine-tuning stages
    """
    train: float = 110 / 150
    pretrain_val: float = 10 / 150
    pretrain_test: float = 10 / 150
    finetune_val: float = 10 / 150
    finetune_test: float = 10 / 150
    # Tolerated overshoot of a cross-project partition, as a share of all examples
    slack: float = 0.1

    def __post_init__(self):
        fractions = self.fractions()
        if any(value < 0 for _, value in fractions):
            raise ValueError(f'Split fractions must be non-negative: {dict(fractions)}')
        if not math.isclose(sum(value for _, value in fractions), 1.0,
                            abs_tol=1e-9):
            raise ValueError(f'Split fractions must sum to 1: {dict(fractions)}')
        if self.slack < 0:
            raise ValueError(f'slack must be non-negative, got {self.slack}')

    def fractions(self) -> Tuple[Tuple[str, float], ...]:
        """
        (partition name, fraction) pairs in partition order
        """
        return tuple((name, getattr(self, name)) for name in PARTITIONS)


PARTITIONS = ('train', 'pretrain_val', 'pretrain_test',
              'finetune_val', 'finetune_test')


@dataclass(frozen=True)
class RunConfig():
    """
    Every constant a pipeline run depends on
    """
    context_radius: int = 3
    k: int = 5
    seed: int = 0
    query_field: str = 'diff'
    provider_cmd: Optional[str] = None
    filters: FilterConfig = field(default_factory=FilterConfig)
    split: SplitConfig = field(default_factory=SplitConfig)

    def __post_init__(self):
        if self.context_radius < 0:
            raise ValueError(
                f'context_radius must be non-negative, got {self.context_radius}')
        if self.k < 1:
            raise ValueError(f'k must be at least 1, got {self.k}')
        if self.query_field not in QUERY_FIELDS:
            raise ValueError(
                f'query_field must be one of {QUERY_FIELDS}, got {self.query_field!r}')

    def as_dict(self) -> Dict[str, Any]:
        """
        Nested dictionary of all settings
        """
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """
        Short SHA-256 fingerprint of the canonical JSON of the config
        """
        canonical = json.dumps(self.as_dict(), sort_keys=True,
                               separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:12]

    def with_overrides(self, **overrides: Any) -> 'RunConfig':
        """
        Copy with the given top-level or nested keys replaced; None values are ignored
        """
        return _build(self, {k: v for k, v in overrides.items() if v is not None})


_TOP_KEYS = {'context_radius': int, 'k': int, 'seed': int,
             'query_field': str, 'provider_cmd': str}
_FILTER_KEYS = {f.name: f.type for f in dataclasses.fields(FilterConfig)}
_SPLIT_KEYS = {f.name: float for f in dataclasses.fields(SplitConfig)}


def _build(base: RunConfig, values: Dict[str, Any]) -> RunConfig:
    top, filters, split = {}, {}, {}
    for key, value in values.items():
        if key in _TOP_KEYS:
            top[key] = value
        elif key in _FILTER_KEYS:
            filters[key] = value
        elif key in _SPLIT_KEYS:
            split[key] = value
        else:
            raise FormatError(f'Unknown config key: {key!r}')
    return dataclasses.replace(
        base,
        filters=dataclasses.replace(base.filters, **filters),
        split=dataclasses.replace(base.split, **split),
        **top)


def _convert(key: str, raw: str) -> Any:
    if key in ('provider_cmd', 'template_path'):
        return raw or None
    if key == 'query_field':
        return raw
    if key in _SPLIT_KEYS:
        # Fractions may be written as 110/150
        numerator, slash, denominator = raw.partition('/')
        if slash:
            return float(numerator) / float(denominator)
        return float(raw)
    return int(raw)


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """
    Read `key = value` lines (no section header) on top of `base`
    """
    parser = configparser.ConfigParser(comment_prefixes=('#', ';'),
                                       inline_comment_prefixes=('#', ';'),
                                       interpolation=None)
    try:
        parser.read_string(f'[{_SECTION}]\n{text}')
    except configparser.Error as err:
        raise FormatError(f'Invalid config file: {err}') from err

    values = {}
    for key, raw in parser.items(_SECTION):
        if key not in _TOP_KEYS and key not in _FILTER_KEYS and key not in _SPLIT_KEYS:
            raise FormatError(f'Unknown config key: {key!r}')
        try:
            values[key] = _convert(key, raw.strip())
        except (ValueError, ZeroDivisionError) as err:
            raise FormatError(f'Invalid value for {key}: {raw!r}') from err
    try:
        return _build(base or RunConfig(), values)
    except ValueError as err:
        if isinstance(err, FormatError):
            raise
        raise FormatError(f'Invalid config: {err}') from err


def load_config(path: Optional[str], base: Optional[RunConfig] = None) -> RunConfig:
    """
    Load a config file; a missing path yields the defaults
    """
    if path is None:
        return base or RunConfig()
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as err:
        raise IoError(f'Cannot read config file {path}: {err.strerror}') from err
    config = parse_config(text, base)
    logger.debug('Loaded config %s from %s', config.config_hash(), path)
    return config
