import hashlib
import re

DEFAULT_VOCAB_BUCKETS = 2**15

_SEPARATORS = re.compile(r"[^0-9A-Za-z]+")


def split_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric runs of ``text``."""
    return [token.lower() for token in _SEPARATORS.split(text) if token]


def token_hash(token: str) -> int:
    """Stable 64-bit hash, independent of interpreter hash seeding."""
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


def tokenize_context(text: str, vocab_buckets: int = DEFAULT_VOCAB_BUCKETS) -> list[int]:
    """Bucket ids of the tokens of ``text``; ``vocab_buckets`` must be a power of two."""
    mask = vocab_buckets - 1
    return [token_hash(token) & mask for token in split_tokens(text)]
