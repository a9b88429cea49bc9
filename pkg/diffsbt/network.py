"""
GitHub repository search client
"""


import json
import logging
import os
import time
from dataclasses import dataclass
from datetime import timedelta
from json.decoder import JSONDecodeError
from typing import Any, Dict, List, Optional, Tuple

import requests
from requests_cache import CachedSession

from .api_data import (CACHE_NAME, DEFAULT_LANGUAGE, DEFAULT_MIN_STARS, MAX_PAGES,
                       PER_PAGE, REPOSITORY_FIELDS, REQUEST_HEADERS,
                       SEARCH_RESULT_CAP, SEARCH_REPOSITORIES_URL, TOKEN_ENV)
from .errors import AuthError, NetworkError, RateLimitError

logger = logging.getLogger(__name__)

# A star bucket: inclusive lower bound, inclusive upper bound or None for open
Bucket = Tuple[int, Optional[int]]


@dataclass(frozen=True)
class RepoDescriptor():
    """
    A hosted repository found by the star-bucket search
    """
    full_name: str
    stars: int
    clone_url: str

    def __post_init__(self):
        owner, slash, name = self.full_name.partition('/')
        if not slash or not owner or not name or '/' in name:
            raise ValueError(f'Repository name must be "owner/name": {self.full_name!r}')
        if self.stars < 0:
            raise ValueError(f'Star count must be non-negative, got {self.stars}')

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns a dictionary representation of the descriptor
        """
        return {'full_name': self.full_name, 'stars': self.stars,
                'clone_url': self.clone_url}

    def __repr__(self):
        return f'{self.full_name} ({self.stars:,} stars)'


def bucket_query(bucket: Bucket, language: str = DEFAULT_LANGUAGE) -> str:
    """
    Search qualifier string for one star bucket
    """
    low, high = bucket
    stars = f'stars:>={low}' if high is None else f'stars:{low}..{high}'
    return f'language:{language} {stars}' if language else stars


def split_bucket(bucket: Bucket) -> Tuple[Bucket, Bucket]:
    """
    Halve a bucket whose result count exceeds the search cap; returns (low, high)
    """
    low, high = bucket
    if high is None:
        middle = max(2 * low, low + 1)
    else:
        if low >= high:
            raise ValueError(f'Bucket [{low}, {high}] cannot be split')
        middle = (low + high + 1) // 2
    return (low, middle - 1), (middle, high)


class RepositorySearch():
    """
    Walks star buckets from the most starred down, keeping every query under
    the 1000-result cap of the search endpoint
    """

    def __init__(self,
                 auth_token: str,
                 session: Optional[requests.Session] = None,
                 language: str = DEFAULT_LANGUAGE):
        if not auth_token:
            raise AuthError(f'No API token given; set {TOKEN_ENV}')
        self.auth_token = auth_token
        self.language = language
        self.session = session if session is not None \
            else CachedSession(CACHE_NAME, expire_after=timedelta(hours=1))
        # Final buckets with their reported totals, in the order searched
        self.buckets: List[Tuple[Bucket, int]] = []

    def search_page(self, bucket: Bucket, page: int) -> Dict[str, Any]:
        """
        Fetch one result page for a bucket
        """
        params = {'q': bucket_query(bucket, self.language), 'sort': 'stars',
                  'order': 'desc', 'per_page': PER_PAGE, 'page': page}
        headers = dict(REQUEST_HEADERS,
                       Authorization=f'Bearer {self.auth_token}')
        try:
            response = self.session.get(SEARCH_REPOSITORIES_URL,
                                        params=params, headers=headers,
                                        timeout=30)
        except requests.RequestException as err:
            raise NetworkError(f'Search request failed: {err}') from err

        self.check_status(response)
        try:
            data = json.loads(response.content)
        except JSONDecodeError as err:
            raise NetworkError(
                'Invalid JSON data returned from network!') from err
        if 'items' not in data:
            message = data.get('message', data)
            raise NetworkError(f'No repository data returned from GitHub: {message}')
        return data

    @staticmethod
    def check_status(response: requests.Response) -> None:
        """
        Map error statuses onto AuthError, RateLimitError or NetworkError
        """
        status = response.status_code
        if status < 400:
            return
        if status == 401:
            raise AuthError('GitHub rejected the API token')
        headers = response.headers
        if status == 429 or (status == 403 and (
                headers.get('Retry-After') is not None
                or headers.get('X-RateLimit-Remaining') == '0')):
            raise RateLimitError('GitHub rate limit reached',
                                 retry_after=_retry_after(headers))
        raise NetworkError(f'Search request failed with HTTP {status}')

    def collect_bucket(self, bucket: Bucket, first: Dict[str, Any]) -> List[RepoDescriptor]:
        """
        Read every page of a bucket that fits under the cap
        """
        out_l = [_descriptor(item) for item in first['items']]
        total = min(first.get('total_count', 0), SEARCH_RESULT_CAP)
        pages = min(MAX_PAGES, -(-total // PER_PAGE))
        for page in range(2, pages + 1):
            items = self.search_page(bucket, page)['items']
            if not items:
                break
            out_l.extend(_descriptor(item) for item in items)
        return out_l

    def fetch(self, min_stars: int = DEFAULT_MIN_STARS) -> List[RepoDescriptor]:
        """
        All repositories with at least `min_stars` stars, most starred first
        """
        if min_stars < 0:
            raise ValueError(f'min_stars must be non-negative, got {min_stars}')
        found: Dict[str, RepoDescriptor] = {}
        pending: List[Bucket] = [(min_stars, None)]
        while pending:
            bucket = pending.pop()
            first = self.search_page(bucket, 1)
            total = first.get('total_count', 0)
            low, high = bucket
            if total > SEARCH_RESULT_CAP and low != high:
                lower, upper = split_bucket(bucket)
                # Stack order: the higher stars are searched first
                pending.extend([lower, upper])
                continue
            if total > SEARCH_RESULT_CAP:
                logger.warning('%s matches %s repositories; keeping the first %s',
                               bucket_query(bucket, self.language), total,
                               SEARCH_RESULT_CAP)
            self.buckets.append((bucket, total))
            for descriptor in self.collect_bucket(bucket, first):
                if descriptor.stars >= min_stars:
                    found.setdefault(descriptor.full_name, descriptor)
            logger.debug('Bucket [%s, %s]: %s repositories', low, high, total)

        out_l = sorted(found.values(), key=lambda d: (-d.stars, d.full_name))
        logger.info('Initialized %s repositories!', f'{len(out_l):,}')
        return out_l


def _descriptor(item: Dict[str, Any]) -> RepoDescriptor:
    try:
        return RepoDescriptor(**{ours: item[theirs]
                                 for theirs, ours in REPOSITORY_FIELDS.items()})
    except (KeyError, TypeError, ValueError) as err:
        raise NetworkError(f'Malformed repository entry: {err}') from err


def _retry_after(headers: Any) -> Optional[int]:
    retry_after = headers.get('Retry-After')
    if retry_after is not None and str(retry_after).isdigit():
        return int(retry_after)
    reset = headers.get('X-RateLimit-Reset')
    if reset is not None and str(reset).isdigit():
        return max(0, int(reset) - int(time.time()))
    return None


def fetch_repositories(min_stars: int = DEFAULT_MIN_STARS,
                       auth_token: Optional[str] = None,
                       session: Optional[requests.Session] = None) -> List[RepoDescriptor]:
    """
    Star-bucketed repository search; the token defaults to $SDX_API_TOKEN
    """
    token = auth_token if auth_token is not None else os.environ.get(TOKEN_ENV)
    return RepositorySearch(token or '', session=session).fetch(min_stars)
