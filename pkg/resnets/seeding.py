import hashlib
from typing import Union

import numpy as np

SeedPart = Union[int, str]


def _part_to_int(part: SeedPart) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(str(part).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *parts: SeedPart) -> int:
    """Derive a 63-bit seed from an experiment seed and any int/str parts.

    The result depends only on the arguments, never on how many seeds were
    derived before, so work keyed this way can run in any order.
    """
    entropy = [_part_to_int(seed)] + [_part_to_int(p) for p in parts]
    state = np.random.SeedSequence(entropy).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & 0x7FFFFFFFFFFFFFFF
