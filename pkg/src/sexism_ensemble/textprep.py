"""Mention and URL masking for social-media text."""

import re

MENTION_TOKEN = "__mention__"
URL_TOKEN = "__URL__"
MASK_TOKENS = (MENTION_TOKEN, URL_TOKEN)

# No match directly after a word character (e-mail addresses, or text glued to an
# earlier replacement), and never re-absorb a mask token: keeps masking idempotent.
_MENTION_RE = re.compile(r"(?<!\w)@(?!__mention__|__URL__)\w{1,30}")
_URL_RE = re.compile(r"(?<!\w)(?:https?://|www\.)\S*", re.IGNORECASE)


def mask_mentions_urls(text: str) -> str:
    """Replace URLs with ``__URL__`` and @-handles with ``__mention__``.

    >>> mask_mentions_urls("@maria stop https://t.co/abc now")
    '__mention__ stop __URL__ now'
    """
    text = _URL_RE.sub(URL_TOKEN, text)
    return _MENTION_RE.sub(MENTION_TOKEN, text)
