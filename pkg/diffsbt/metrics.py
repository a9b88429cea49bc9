"""
BLEU-4, Exact Match and Semantic Similarity scoring of generated explanations
"""


import json
import logging
import math
import shlex
import subprocess  # nosec B404
from dataclasses import dataclass, field
from functools import lru_cache
from json.decoder import JSONDecodeError
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd
from sacrebleu.metrics import BLEU
from sklearn.feature_extraction.text import HashingVectorizer

from . import __version__
from .errors import DimensionMismatch, EmptyInput, FormatError, IoError, ProviderError

logger = logging.getLogger(__name__)

HASHING_FEATURES = 256


@dataclass(frozen=True)
class BleuConfig():
    """
    Sentence BLEU settings: n-gram orders 1..max_order with equal weights;
    orders from `smooth_from` on get add-one smoothing
    """
    max_order: int = 4
    weights: Tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)
    smooth_from: int = 2

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError(f'max_order must be at least 1, got {self.max_order}')
        if len(self.weights) != self.max_order:
            raise ValueError(
                f'Expected {self.max_order} weights, got {len(self.weights)}')
        if not math.isclose(sum(self.weights), 1.0, abs_tol=1e-9):
            raise ValueError(f'BLEU weights must sum to 1: {self.weights}')
        # sacrebleu takes the plain geometric mean of the precisions
        if any(not math.isclose(w, 1 / self.max_order, abs_tol=1e-9) for w in self.weights):
            raise ValueError(f'BLEU weights must be equal: {self.weights}')
        # add-k smoothing in sacrebleu starts at bigrams
        if self.smooth_from != 2:
            raise ValueError(f'Smoothing starts at order 2, got {self.smooth_from}')

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns a dictionary representation of the settings
        """
        return {'max_order': self.max_order, 'weights': list(self.weights),
                'smooth_from': self.smooth_from}


def bleu_tokens(text: str) -> List[str]:
    """
    Lowercased whitespace tokens; punctuation is kept
    """
    return text.lower().split()


@lru_cache(maxsize=8)
def _bleu_model(cfg: BleuConfig) -> BLEU:
    return BLEU(lowercase=True,
                force=True,
                tokenize='none',
                smooth_method='add-k',
                smooth_value=1,
                max_ngram_order=cfg.max_order,
                effective_order=False)


def bleu4(candidate: str, reference: str, cfg: Optional[BleuConfig] = None) -> float:
    """
    Smoothed sentence-level BLEU in [0, 100]
    """
    cfg = cfg or BleuConfig()
    if not bleu_tokens(candidate):
        return 0.0
    # A one-segment corpus scores exactly like the sentence
    result = _bleu_model(cfg).corpus_score([candidate], [[reference]])
    return min(100.0, max(0.0, round(result.score, 12)))


def exact_match(candidate: str, reference: str) -> bool:
    """
    Case- and whitespace-sensitive equality
    """
    return candidate == reference


class EmbeddingProvider(Protocol):
    """
    Anything that turns texts into equal-length vectors, one row per text
    """
    description: str

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        ...


class HashingProvider():
    """
    Feature-hashed term-frequency vectors, L2-normalized

    Only a lexical stand-in: scores are NOT comparable to a sentence encoder's.
    """

    def __init__(self, n_features: int = HASHING_FEATURES):
        self.vectorizer = HashingVectorizer(n_features=n_features,
                                            alternate_sign=False,
                                            norm='l2',
                                            lowercase=True,
                                            tokenizer=str.split,
                                            token_pattern=None)
        self.description = f'hashing:{n_features}'

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """
        One dense row per text
        """
        return self.vectorizer.transform(list(texts)).toarray()


class CommandProvider():
    """
    External embedding process: one text per stdin line in, one vector of
    space-separated decimals per stdout line out
    """

    def __init__(self, command: str, timeout: Optional[float] = None):
        self.command = command
        self.argv = shlex.split(command)
        if not self.argv:
            raise ValueError('Provider command is empty')
        self.timeout = timeout
        self.description = f'command:{command}'

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """
        Run the provider once over all texts
        """
        if not texts:
            return np.zeros((0, 0))
        payload = ''.join(t.replace('\r', ' ').replace('\n', ' ') + '\n'
                          for t in texts)
        try:
            result = subprocess.run(self.argv, input=payload,  # nosec B603
                                    capture_output=True, text=True,
                                    encoding='utf-8', timeout=self.timeout,
                                    check=False)
        except (OSError, subprocess.SubprocessError) as err:
            raise ProviderError(f'Cannot run provider {self.command!r}: {err}') from err
        if result.returncode != 0:
            # pylint: disable=line-too-long
            raise ProviderError(
                f'Provider {self.command!r} exited with status {result.returncode}: {result.stderr.strip()}')

        lines = [line for line in result.stdout.splitlines() if line.strip()]
        if len(lines) != len(texts):
            raise ProviderError(
                f'Provider returned {len(lines)} vectors for {len(texts)} texts')
        try:
            rows = [[float(value) for value in line.split()] for line in lines]
        except ValueError as err:
            raise ProviderError(f'Provider returned a non-numeric vector: {err}') from err
        if len({len(row) for row in rows}) != 1 or not rows[0]:
            raise ProviderError('Provider vectors do not share one dimension')
        return np.array(rows, dtype=float)


def cosine(first: np.ndarray, second: np.ndarray) -> float:
    """
    Cosine of two vectors clipped to [-1, 1]; 0 when either is all-zero
    """
    first = np.asarray(first, dtype=float).ravel()
    second = np.asarray(second, dtype=float).ravel()
    if first.shape != second.shape:
        raise DimensionMismatch(
            f'Embeddings have different lengths: {first.size} and {second.size}')
    first_norm = np.linalg.norm(first)
    second_norm = np.linalg.norm(second)
    if first_norm == 0 or second_norm == 0:
        logger.warning('Zero embedding vector; similarity set to 0')
        return 0.0
    if np.array_equal(first, second):
        return 1.0
    value = float(np.dot(first, second) / (first_norm * second_norm))
    return float(np.clip(value, -1.0, 1.0))


def semantic_similarity(candidate: str,
                        reference: str,
                        provider: Optional[EmbeddingProvider] = None) -> float:
    """
    Cosine of the provider's embeddings of the two texts
    """
    provider = provider or HashingProvider()
    vectors = provider.embed([candidate, reference])
    return cosine(vectors[0], vectors[1])


@dataclass(frozen=True)
class MetricRow():
    """
    Scores of one (candidate, reference) pair
    """
    id: str  # pylint: disable=invalid-name
    bleu: float
    exact: int
    semsim: float

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns a dictionary representation of the row
        """
        return {'id': self.id, 'bleu': self.bleu, 'exact': self.exact,
                'semsim': self.semsim}


@dataclass(frozen=True)
class MetricReport():
    """
    Per-pair scores with their corpus means
    """
    rows: Tuple[MetricRow, ...]
    bleu_config: BleuConfig = field(default_factory=BleuConfig)
    provider: str = f'hashing:{HASHING_FEATURES}'

    @property
    def aggregates(self) -> Dict[str, float]:
        """
        mean_bleu, exact_match_rate (percent), mean_semsim and count
        """
        count = len(self.rows)
        if count == 0:
            return {'mean_bleu': 0.0, 'exact_match_rate': 0.0,
                    'mean_semsim': 0.0, 'count': 0}
        return {
            'mean_bleu': float(np.mean([r.bleu for r in self.rows])),
            'exact_match_rate': 100 * float(np.mean([r.exact for r in self.rows])),
            'mean_semsim': float(np.mean([r.semsim for r in self.rows])),
            'count': count,
        }

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns the JSON document representation of the report
        """
        return {
            'header': {'version': __version__,
                       'bleu': self.bleu_config.as_dict(),
                       'provider': self.provider},
            'aggregates': self.aggregates,
            'rows': [r.as_dict() for r in self.rows],
        }

    def to_dataframe(self) -> pd.DataFrame:
        """
        Per-pair scores indexed by example id
        """
        frame = pd.DataFrame([r.as_dict() for r in self.rows],
                             columns=['id', 'bleu', 'exact', 'semsim'])
        frame.index = frame.pop('id')
        return frame

    def __repr__(self):
        agg = self.aggregates
        # pylint: disable=line-too-long
        return f"MetricReport(count={agg['count']}, BLEU={agg['mean_bleu']:.2f}, EM={agg['exact_match_rate']:.2f}, SemSim={agg['mean_semsim']:.4f})"


def evaluate_corpus(rows: Sequence[Tuple[str, str, str]],
                    cfg: Optional[BleuConfig] = None,
                    provider: Optional[EmbeddingProvider] = None) -> MetricReport:
    """
    Score (id, candidate, reference) rows, keeping input order
    """
    if not rows:
        raise EmptyInput('No rows to evaluate')
    cfg = cfg or BleuConfig()
    provider = provider or HashingProvider()
    candidates = [candidate for _, candidate, _ in rows]
    references = [reference for _, _, reference in rows]
    # One provider call for every text
    vectors = provider.embed(candidates + references)
    if len(vectors) != 2 * len(rows):
        raise ProviderError(
            f'Provider returned {len(vectors)} vectors for {2 * len(rows)} texts')
    out_l = []
    for position, (row_id, candidate, reference) in enumerate(rows):
        out_l.append(MetricRow(
            row_id,
            bleu4(candidate, reference, cfg),
            int(exact_match(candidate, reference)),
            cosine(vectors[position], vectors[len(rows) + position])))
    return MetricReport(tuple(out_l), cfg, provider.description)


def report_from_dict(doc: Any) -> MetricReport:
    """
    Rebuild a report from its JSON document
    """
    try:
        header = doc['header']
        bleu = header['bleu']
        cfg = BleuConfig(int(bleu['max_order']),
                         tuple(float(w) for w in bleu['weights']),
                         int(bleu['smooth_from']))
        rows = tuple(MetricRow(str(r['id']), float(r['bleu']), int(r['exact']),
                               float(r['semsim']))
                     for r in doc['rows'])
        return MetricReport(rows, cfg, str(header['provider']))
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f'Malformed metric report: {err}') from err


def store_report(report: MetricReport, path: str) -> None:
    """
    Write the report as one JSON document
    """
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(report.as_dict(), handle, indent=2)
            handle.write('\n')
    except OSError as err:
        raise IoError(f'Cannot write report {path}: {err.strerror}') from err


def load_report(path: str) -> MetricReport:
    """
    Read a report written by store_report
    """
    try:
        with open(path, encoding='utf-8') as handle:
            doc = json.load(handle)
    except OSError as err:
        raise IoError(f'Cannot read report {path}: {err.strerror}') from err
    except JSONDecodeError as err:
        raise FormatError(f'Invalid report JSON: {err.msg}', err.lineno) from err
    return report_from_dict(doc)
