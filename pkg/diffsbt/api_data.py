"""
Constants for the GitHub repository search API
"""


API_ROOT = 'https://api.github.com'
SEARCH_REPOSITORIES_URL = f'{API_ROOT}/search/repositories'

# Environment variable holding the personal access token
TOKEN_ENV = 'SDX_API_TOKEN'

# The search endpoint never returns more than 1000 results for one query
SEARCH_RESULT_CAP = 1000
PER_PAGE = 100
MAX_PAGES = SEARCH_RESULT_CAP // PER_PAGE

DEFAULT_MIN_STARS = 300
DEFAULT_LANGUAGE = 'python'

CACHE_NAME = 'diffsbt_cache'

REQUEST_HEADERS = {
    'Accept': 'application/vnd.github+json',
    'X-GitHub-Api-Version': '2022-11-28',
}

# Response fields copied into a RepoDescriptor
REPOSITORY_FIELDS = {
    'full_name': 'full_name',
    'stargazers_count': 'stars',
    'clone_url': 'clone_url',
}
