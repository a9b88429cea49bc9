"""
Nearest-neighbour explanation retrieval: bag-of-words cosine top-k, then BLEU rerank
"""


import json
import logging
from dataclasses import dataclass
from json.decoder import JSONDecodeError
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.metrics.pairwise import cosine_similarity

from .corpus import DatasetExample
from .errors import EmptyInput, FormatError, IoError
from .metrics import bleu4

logger = logging.getLogger(__name__)

INDEX_VERSION = 1
DEFAULT_K = 5
# How the stored and query texts become vectors; reported in provenance
BAG_OF_WORDS = 'term-frequency, whitespace tokens, case-sensitive, cosine'
# Cosines are compared after rounding so float noise cannot reorder ties
COSINE_DECIMALS = 12


@dataclass(frozen=True)
class Provenance():
    """
    Which stored example an explanation came from, and why
    """
    index: int
    example_id: str
    cosine: float
    bleu: float
    bag_of_words: str = BAG_OF_WORDS

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns a dictionary representation of the provenance
        """
        return {'index': self.index, 'example_id': self.example_id,
                'cosine': self.cosine, 'bleu': self.bleu,
                'bag_of_words': self.bag_of_words}


def _vectorizer(vocabulary: Dict[str, int]) -> CountVectorizer:
    return CountVectorizer(vocabulary=vocabulary, tokenizer=str.split,
                           lowercase=False, token_pattern=None)


class RetrievalIndex():
    """
    Term-frequency vectors of stored diffs with their commit messages
    """

    def __init__(self,
                 vocabulary: Dict[str, int],
                 vectors: sparse.csr_matrix,
                 diffs: Sequence[str],
                 messages: Sequence[str],
                 ids: Optional[Sequence[str]] = None,
                 field: str = 'diff'):
        ids = list(ids) if ids is not None else [str(i) for i in range(len(diffs))]
        if not vectors.shape[0] == len(diffs) == len(messages) == len(ids):
            # pylint: disable=line-too-long
            raise ValueError(
                f'Index parts differ in length: {vectors.shape[0]} vectors, {len(diffs)} diffs, {len(messages)} messages, {len(ids)} ids')
        if vectors.shape[1] != len(vocabulary):
            raise ValueError(
                f'Vector dimension {vectors.shape[1]} does not match vocabulary size {len(vocabulary)}')
        self.vocabulary = dict(vocabulary)
        self.vectors = sparse.csr_matrix(vectors)
        self.diffs = list(diffs)
        self.messages = list(messages)
        self.ids = ids
        self.field = field

    def transform(self, texts: Sequence[str]) -> sparse.csr_matrix:
        """
        Term-frequency vectors over the index vocabulary; unknown terms are dropped
        """
        if not self.vocabulary:
            return sparse.csr_matrix((len(texts), 0), dtype=np.int64)
        return _vectorizer(self.vocabulary).transform(list(texts)).tocsr()

    def terms(self) -> List[str]:
        """
        Vocabulary in column order
        """
        return sorted(self.vocabulary, key=self.vocabulary.__getitem__)

    def __len__(self):
        return len(self.diffs)

    def __eq__(self, other):
        if not isinstance(other, RetrievalIndex):
            return NotImplemented
        return (self.vocabulary == other.vocabulary
                and self.diffs == other.diffs
                and self.messages == other.messages
                and self.ids == other.ids
                and self.field == other.field
                and self.vectors.shape == other.vectors.shape
                and (self.vectors != other.vectors).nnz == 0)

    def __repr__(self):
        return f'RetrievalIndex({len(self):,} entries, {len(self.vocabulary):,} terms)'


def build_index(pairs: Sequence[Tuple[str, str]],
                ids: Optional[Sequence[str]] = None,
                field: str = 'diff') -> RetrievalIndex:
    """
    Index (diff text, message) pairs; columns follow first occurrence of each term
    """
    if not pairs:
        raise EmptyInput('Cannot build an index without pairs')
    diffs = [diff for diff, _ in pairs]
    vocabulary: Dict[str, int] = {}
    for diff in diffs:
        for term in diff.split():
            vocabulary.setdefault(term, len(vocabulary))
    if vocabulary:
        vectors = _vectorizer(vocabulary).transform(diffs).tocsr()
    else:
        vectors = sparse.csr_matrix((len(diffs), 0), dtype=np.int64)
    index = RetrievalIndex(vocabulary, vectors, diffs,
                           [message for _, message in pairs], ids, field)
    logger.info('Initialized %s index entries!', f'{len(index):,}')
    return index


def index_examples(examples: Iterable[DatasetExample], field: str = 'diff') -> RetrievalIndex:
    """
    Index dataset examples by their raw diff or by their diffSBT input
    """
    pairs, ids = [], []
    for example in examples:
        text = example.diff if field == 'diff' else example.input_sequence
        if text is None:
            raise ValueError(f'Example {example.id} has no diff to index')
        pairs.append((text, example.target_message))
        ids.append(example.id)
    return build_index(pairs, ids, field)


def rank_candidates(index: RetrievalIndex, query: str, k: int = DEFAULT_K) -> List[Tuple[int, float]]:
    """
    Top-k (entry, cosine) pairs by cosine, ties to the lower entry
    """
    if k < 1:
        raise ValueError(f'k must be at least 1, got {k}')
    if not len(index):
        raise EmptyInput('The index is empty')
    k = min(k, len(index))
    query_vector = index.transform([query])
    if query_vector.nnz == 0:
        logger.warning('Query shares no terms with the index; using its first %s entries', k)
        return [(i, 0.0) for i in range(k)]
    scores = np.round(cosine_similarity(query_vector, index.vectors).ravel(),
                      COSINE_DECIMALS)
    order = np.lexsort((np.arange(len(index)), -scores))
    return [(int(i), float(scores[i])) for i in order[:k]]


def explain(index: RetrievalIndex, query: str, k: int = DEFAULT_K) -> Tuple[str, Provenance]:
    """
    Message of the top-k entry whose stored diff has the highest BLEU against the query
    """
    scored = [(bleu4(query, index.diffs[position]), position, score)
              for position, score in rank_candidates(index, query, k)]
    bleu, position, score = min(scored, key=lambda s: (-s[0], s[1]))
    return index.messages[position], Provenance(position, index.ids[position],
                                                score, bleu)


def explain_all(index: RetrievalIndex,
                queries: Iterable[str],
                k: int = DEFAULT_K) -> List[Tuple[str, Provenance]]:
    """
    explain over many queries, in input order
    """
    return [explain(index, query, k) for query in queries]


def store_index(index: RetrievalIndex, path: str) -> None:
    """
    NDJSON file: a vocabulary header row, then one row per entry
    """
    header = {'version': INDEX_VERSION, 'field': index.field,
              'vocabulary': index.terms()}
    try:
        with open(path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(json.dumps(header, ensure_ascii=False) + '\n')
            for position in range(len(index)):
                row = index.vectors[position]
                counts = sorted(zip(row.indices.tolist(), row.data.tolist()))
                handle.write(json.dumps({
                    'id': index.ids[position],
                    'diff': index.diffs[position],
                    'message': index.messages[position],
                    'counts': [[int(c), int(n)] for c, n in counts],
                }, ensure_ascii=False) + '\n')
    except OSError as err:
        raise IoError(f'Cannot write index {path}: {err.strerror}') from err


def _parse_index(lines: Iterable[str]) -> RetrievalIndex:
    header: Optional[Dict[str, Any]] = None
    ids, diffs, messages = [], [], []
    rows, cols, data = [], [], []
    size = 0
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except JSONDecodeError as err:
            raise FormatError(f'Invalid JSON: {err.msg}', line_number) from err
        try:
            if header is None:
                if doc.get('version') != INDEX_VERSION:
                    raise ValueError(f"Unsupported index version {doc.get('version')!r}")
                header = doc
                size = len(header['vocabulary'])
                continue
            position = len(ids)
            ids.append(str(doc['id']))
            diffs.append(str(doc['diff']))
            messages.append(str(doc['message']))
            for column, count in doc['counts']:
                if not 0 <= column < size:
                    raise ValueError(f'Column {column} is outside the vocabulary')
                rows.append(position)
                cols.append(int(column))
                data.append(int(count))
        except (AttributeError, KeyError, TypeError, ValueError) as err:
            raise FormatError(f'Malformed index row: {err}', line_number) from err
    if header is None:
        raise FormatError('Index file has no header row')
    vocabulary = {term: column for column, term in enumerate(header['vocabulary'])}
    vectors = sparse.csr_matrix((data, (rows, cols)), shape=(len(ids), len(vocabulary)),
                                dtype=np.int64)
    return RetrievalIndex(vocabulary, vectors, diffs, messages, ids,
                          header.get('field', 'diff'))


def load_index(path: str) -> RetrievalIndex:
    """
    Read an index written by store_index
    """
    try:
        with open(path, encoding='utf-8') as handle:
            return _parse_index(handle)
    except OSError as err:
        raise IoError(f'Cannot read index {path}: {err.strerror}') from err
