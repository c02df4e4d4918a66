"""Small shared helpers."""

import hashlib


def stable_seed(*parts) -> int:
    """Derive a reproducible 63-bit seed from arbitrary labeled parts.

    Unlike ``hash()``, the result does not vary across processes, so seeds
    derived per review id or per pipeline stage are stable between runs.
    """
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big") >> 1
