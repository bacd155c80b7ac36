"""LIBSVM ingestion and agent partitioning for robust logistic regression."""

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameterError, ParseError

THETA = 1e-5
NU = 10.0


@dataclass(frozen=True, eq=False)
class RobustLogRegData:
    """Binary classification samples plus their assignment to agents.

    ``partition`` is an ``(m, n)`` integer array; row ``i`` lists the sample
    indices held by agent ``i``.  It is ``None`` until :func:`partition` runs.
    """

    features: np.ndarray
    labels: np.ndarray
    partition: np.ndarray = None
    theta: float = THETA
    nu: float = NU

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, size, seed=0):
        """Random subset of ``size`` samples (drops any partition)."""
        if size > self.n_samples:
            raise InvalidParameterError(f"subset of {size} from {self.n_samples} samples")
        idx = np.sort(np.random.default_rng(seed).choice(self.n_samples, size, replace=False))
        return replace(self, features=self.features[idx], labels=self.labels[idx], partition=None)


def _parse_label(token, lineno):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"bad label {token!r}", lineno) from None
    if value in (1.0, -1.0):
        return value
    if value == 0.0:
        return -1.0
    raise ParseError(f"label {token!r} is not binary (expected +1/-1 or 0/1)", lineno)


def parse_libsvm(lines, d_x=None):
    """Parse LIBSVM rows ``label idx:val ...`` into dense arrays.

    Indices are 1-based in the text and 0-based in the result.  When ``d_x``
    is omitted it is taken from the largest index seen.
    """
    labels, rows, cols, vals = [], [], [], []
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_parse_label(tokens[0], lineno))
        row = len(labels) - 1
        for tok in tokens[1:]:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {tok!r}", lineno)
            try:
                j, v = int(idx), float(val)
            except ValueError:
                raise ParseError(f"expected index:value, got {tok!r}", lineno) from None
            if j < 1:
                raise ParseError(f"feature index {j} is not 1-based", lineno)
            if d_x is not None and j > d_x:
                raise ParseError(f"feature index {j} exceeds d_x = {d_x}", lineno)
            rows.append(row)
            cols.append(j - 1)
            vals.append(v)
    if not labels:
        raise ParseError("no samples found")
    if d_x is None:
        d_x = max(cols) + 1 if cols else 1
    features = np.zeros((len(labels), d_x))
    # repeated indices on one line: last value wins
    features[rows, cols] = vals
    return features, np.array(labels)


def load_libsvm(path, d_x=None):
    with open(path) as fh:
        features, labels = parse_libsvm(fh, d_x)
    return RobustLogRegData(features=features, labels=labels)


def write_libsvm(path, features, labels):
    """Write dense samples in LIBSVM text form, omitting zero entries."""
    with open(path, "w") as fh:
        for a, b in zip(features, labels):
            nz = np.flatnonzero(a)
            items = " ".join(f"{j + 1}:{float(a[j])!r}" for j in nz)
            fh.write(f"{int(b):+d} {items}\n")


def partition(data, m, seed=0, pad=False):
    """Shuffle samples with ``seed`` and split them contiguously over ``m`` agents.

    If ``m`` does not divide the sample count, raise unless ``pad`` is set, in
    which case trailing shuffled samples are duplicated to equalize counts.
    """
    if int(m) != m or m < 1:
        raise InvalidParameterError(f"need m >= 1 agents, got {m}")
    m = int(m)
    n_total = data.n_samples
    order = np.random.default_rng(seed).permutation(n_total)
    features, labels = data.features, data.labels
    extra = (-n_total) % m
    if extra:
        if not pad:
            raise InvalidParameterError(
                f"{n_total} samples cannot be split equally over {m} agents (use pad)"
            )
        dup = order[-extra:]
        features = np.vstack([features, features[dup]])
        labels = np.concatenate([labels, labels[dup]])
        order = np.concatenate([order, np.arange(n_total, n_total + extra)])
    parts = order.reshape(m, -1)
    return replace(data, features=features, labels=labels, partition=parts)
