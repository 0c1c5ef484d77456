"""Labelled random substreams.

Every random draw in a run descends from one integer seed. Substreams are
keyed by short labels (module name, layer, ...) hashed with CRC-32 so the
mapping is stable across interpreter sessions, unlike ``hash()``.
"""
import zlib

import numpy as np


def _label_key(label):
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed, *labels):
    """Return a Generator for ``seed`` and the given labels.

    Identical (seed, labels) pairs give identical streams; any change in a
    label yields a statistically independent stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_label_key(x) for x in labels))
    return np.random.Generator(np.random.PCG64(ss))
