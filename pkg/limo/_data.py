"Label/feature containers, file formats, splitting and the quadrant generator"

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from ._gen_utils import LazyProperty, LoadError, logger, substream


class LabelMatrix:
    """Binary relevance matrix Y of shape (m, l)

    Parameters
    ----------
    bits : array-like of shape (n_instances, n_labels)
        entries must be exactly 0 or 1 (bool is accepted).

    Notes
    -----
    The stored array is read-only. Index sets Y+ / Y- of rows and columns
    are computed once on first access.
    """
    def __init__(self, bits):
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise ValueError(f"label matrix needs to be 2-d, got shape {arr.shape}")
        m, l = arr.shape
        if m < 1 or l < 1:
            raise ValueError(f"label matrix needs m >= 1 and l >= 1, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            if not np.all((arr == 0) | (arr == 1)):
                raise ValueError("label matrix entries need to be exactly 0 or 1")
        self._bits = arr.astype(np.int8)
        self._bits.setflags(write=False)

    @property
    def bits(self):
        return self._bits

    @property
    def shape(self):
        return self._bits.shape

    @property
    def m(self):
        return self._bits.shape[0]

    @property
    def l(self):
        return self._bits.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self._bits if dtype is None else self._bits.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, LabelMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._bits, other._bits)

    def __repr__(self):
        return f"LabelMatrix(m={self.m}, l={self.l})"

    @LazyProperty
    def row_counts(self):
        "|Y+_{i.}| for every row"
        return self._bits.sum(axis=1).astype(np.int64)

    @LazyProperty
    def col_counts(self):
        "|Y+_{.j}| for every column"
        return self._bits.sum(axis=0).astype(np.int64)

    @LazyProperty
    def _row_sets(self):
        return tuple((np.flatnonzero(row == 1), np.flatnonzero(row == 0)) for row in self._bits)

    @LazyProperty
    def _col_sets(self):
        return tuple((np.flatnonzero(col == 1), np.flatnonzero(col == 0)) for col in self._bits.T)

    def row_pos(self, i):
        return self._row_sets[i][0]

    def row_neg(self, i):
        return self._row_sets[i][1]

    def col_pos(self, j):
        return self._col_sets[j][0]

    def col_neg(self, j):
        return self._col_sets[j][1]


class FeatureMatrix:
    """Instance matrix X of shape (m, d), dense ndarray or scipy CSR

    Parameters
    ----------
    values : array-like | scipy.sparse matrix
    """
    def __init__(self, values):
        if sparse.issparse(values):
            values = sparse.csr_matrix(values, dtype=np.float64)
            values.sort_indices()
            data = values.data
        else:
            values = np.array(values, dtype=np.float64)
            if values.ndim != 2:
                raise ValueError(f"feature matrix needs to be 2-d, got shape {values.shape}")
            data = values
        if not np.all(np.isfinite(data)):
            raise ValueError("feature matrix contains non-finite values")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"feature matrix needs m >= 1 and d >= 1, got shape {values.shape}")
        if not sparse.issparse(values):
            values.setflags(write=False)
        self._values = values

    @property
    def values(self):
        return self._values

    @property
    def is_sparse(self):
        return sparse.issparse(self._values)

    @property
    def shape(self):
        return self._values.shape

    @property
    def m(self):
        return self._values.shape[0]

    @property
    def d(self):
        return self._values.shape[1]

    def toarray(self):
        return self._values.toarray() if self.is_sparse else np.array(self._values)

    def tocsr(self):
        return self._values if self.is_sparse else sparse.csr_matrix(self._values)

    def rows(self, idx):
        return FeatureMatrix(self._values[np.asarray(idx)])

    def __array__(self, dtype=None, copy=None):
        arr = self.toarray()
        return arr if dtype is None else arr.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.toarray(), other.toarray())

    def __repr__(self):
        kind = 'sparse' if self.is_sparse else 'dense'
        return f"FeatureMatrix(m={self.m}, d={self.d}, {kind})"


class Dataset:
    """Bundles features X and labels Y

    Parameters
    ----------
    features : FeatureMatrix | array-like | scipy.sparse matrix
    labels : LabelMatrix | array-like
    label_names : sequence of str, optional
    """
    def __init__(self, features, labels, label_names=None):
        if not isinstance(features, FeatureMatrix):
            features = FeatureMatrix(features)
        if not isinstance(labels, LabelMatrix):
            labels = LabelMatrix(labels)
        if features.m != labels.m:
            raise ValueError(f"features have {features.m} rows but labels have {labels.m}")
        if label_names is not None:
            label_names = tuple(str(name) for name in label_names)
            if len(label_names) != labels.l:
                raise ValueError(f"{len(label_names)} label names given for {labels.l} labels")
        self.features = features
        self.labels = labels
        self.label_names = label_names

    @property
    def m(self):
        return self.labels.m

    @property
    def d(self):
        return self.features.d

    @property
    def l(self):
        return self.labels.l

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features.rows(rows), self.labels.bits[rows], self.label_names)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.features == other.features and self.labels == other.labels

    def __repr__(self):
        return f"Dataset(m={self.m}, d={self.d}, l={self.l})"


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split specification

    train_fraction : float in (0, 1)
    seed : int >= 0
    """
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction={self.train_fraction} needs to lie in (0, 1)")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed={self.seed} needs to be a non-negative integer")

    def sizes(self, m):
        "(n_train, n_test) for m rows, rounding half up"
        n_train = int(math.floor(self.train_fraction * m + 0.5))
        return n_train, m - n_train


def split(data, spec):
    """Random train/test partition of a Dataset

    Parameters
    ----------
    data : Dataset
    spec : SplitSpec

    Returns
    -------
    train, test : Dataset
        the first round(train_fraction * m) rows of a seeded permutation
        form the training part.
    """
    n_train, n_test = spec.sizes(data.m)
    if n_train < 1 or n_test < 1:
        raise ValueError(f"split of m={data.m} with train_fraction={spec.train_fraction} "
                         f"gives train={n_train}, test={n_test}; both need to be non-empty")
    perm = substream(spec.seed, 'split').permutation(data.m)
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


def _read_lines(path):
    text = Path(path).read_text(encoding='utf-8')
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def _parse_float(token, path, lineno):
    try:
        value = float(token)
    except ValueError:
        raise LoadError(f"non-numeric value {token!r}", path, lineno) from None
    if not math.isfinite(value):
        raise LoadError(f"non-finite value {token!r}", path, lineno)
    return value


def load_dense(path):
    """Read the dense text format

    First line holds ``m d l``; each of the next m lines holds d reals
    followed by l binary digits, separated by whitespace.

    Parameters
    ----------
    path : str | Path

    Returns
    -------
    data : Dataset
    """
    lines = _read_lines(path)
    if not lines:
        raise LoadError("empty file", path, 1)
    header = lines[0].split()
    try:
        m, d, l = (int(tok) for tok in header)
    except ValueError:
        raise LoadError(f"malformed header {lines[0]!r}, expected 'm d l'", path, 1) from None
    if m < 1 or d < 1 or l < 1:
        raise LoadError(f"header needs m, d, l >= 1, got {m} {d} {l}", path, 1)
    if len(lines) - 1 != m:
        raise LoadError(f"header announces {m} rows, found {len(lines) - 1}", path, min(len(lines), m + 1) + 1)

    x = np.empty((m, d), dtype=np.float64)
    y = np.empty((m, l), dtype=np.int8)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        tokens = line.split()
        if len(tokens) != d + l:
            raise LoadError(f"expected {d + l} fields, found {len(tokens)}", path, lineno)
        for k, tok in enumerate(tokens[:d]):
            x[i, k] = _parse_float(tok, path, lineno)
        for k, tok in enumerate(tokens[d:]):
            if tok not in ('0', '1'):
                raise LoadError(f"label token {tok!r} is not 0 or 1", path, lineno)
            y[i, k] = tok == '1'
    logger.debug(f"loaded dense dataset {path}: m={m}, d={d}, l={l}")
    return Dataset(x, y)


def save_dense(data, path):
    """Write a Dataset in the dense text format

    Features are written with the shortest repr that round-trips exactly.
    """
    x = data.features.toarray()
    y = data.labels.bits
    with open(path, 'w', encoding='utf-8', newline='\n') as fp:
        fp.write(f"{data.m} {data.d} {data.l}\n")
        for xi, yi in zip(x, y):
            fp.write(' '.join(repr(float(v)) for v in xi))
            fp.write(' ')
            fp.write(' '.join(str(int(v)) for v in yi))
            fp.write('\n')


def _is_header(tokens):
    return len(tokens) == 3 and all(tok.isdigit() for tok in tokens)


def load_sparse(path, l, d=None):
    """Read the sparse multi-label text format

    Each line is ``lab,lab,...,lab idx:val idx:val ...`` with 1-based label
    and feature indices. A line starting with whitespace has an empty label
    field. Blank lines are skipped wherever they occur. An optional
    ``m d l`` header line is accepted.

    Parameters
    ----------
    path : str | Path
    l : int
        number of labels
    d : int | None
        feature dimension; defaults to the largest feature index seen.

    Returns
    -------
    data : Dataset
        with CSR features.
    """
    if l < 1:
        raise ValueError(f"l={l} needs to be >= 1")
    lines = _read_lines(path)
    start = 0
    if lines and _is_header(lines[0].split()):
        _, d_header, l_header = (int(tok) for tok in lines[0].split())
        if l_header != l:
            raise LoadError(f"header announces l={l_header}, caller expects l={l}", path, 1)
        d = d_header if d is None else d
        start = 1

    indptr = [0]
    indices = []
    values = []
    y_rows = []
    max_index = 0
    for k, line in enumerate(lines[start:]):
        lineno = k + start + 1
        if not line.strip():
            continue
        if line[:1].isspace():
            label_field, rest = '', line
        else:
            label_field, _, rest = line.partition(' ')
            if '\t' in label_field:
                label_field, _, tail = label_field.partition('\t')
                rest = tail + ' ' + rest
        y_row = np.zeros(l, dtype=np.int8)
        if label_field:
            for tok in label_field.split(','):
                try:
                    lab = int(tok)
                except ValueError:
                    raise LoadError(f"non-numeric label {tok!r}", path, lineno) from None
                if not 1 <= lab <= l:
                    raise LoadError(f"label index {lab} out of range 1..{l}", path, lineno)
                y_row[lab - 1] = 1
        seen = set()
        for tok in rest.split():
            idx_tok, sep, val_tok = tok.partition(':')
            if not sep:
                raise LoadError(f"feature token {tok!r} is not 'idx:val'", path, lineno)
            try:
                idx = int(idx_tok)
            except ValueError:
                raise LoadError(f"non-numeric feature index {idx_tok!r}", path, lineno) from None
            if idx < 1:
                raise LoadError(f"feature index {idx} needs to be >= 1", path, lineno)
            if idx in seen:
                raise LoadError(f"duplicate feature index {idx}", path, lineno)
            if d is not None and idx > d:
                raise LoadError(f"feature index {idx} exceeds d={d}", path, lineno)
            seen.add(idx)
            indices.append(idx - 1)
            values.append(_parse_float(val_tok, path, lineno))
            max_index = max(max_index, idx)
        indptr.append(len(indices))
        y_rows.append(y_row)

    if not y_rows:
        raise LoadError("no data lines", path, start + 1)
    d = max_index if d is None else d
    if d < 1:
        raise LoadError("no features found and no d given", path, start + 1)
    x = sparse.csr_matrix((np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64),
                           np.asarray(indptr, dtype=np.int64)), shape=(len(y_rows), d))
    logger.debug(f"loaded sparse dataset {path}: m={len(y_rows)}, d={d}, l={l}, nnz={x.nnz}")
    return Dataset(x, np.vstack(y_rows))


QUADRANT_LABEL_NAMES = ('A', 'B', 'C', 'D')

# (sign x, sign y) -> label set over (A, B, C, D)
QUADRANT_TABLE = {
    (-1, 1): (1, 0, 0, 0),
    (1, 1): (1, 1, 0, 0),
    (-1, -1): (0, 1, 1, 0),
    (1, -1): (1, 1, 0, 1),
}


def quadrant_labels(points):
    """Label rows of the quadrant layout for points with non-zero coordinates

    Parameters
    ----------
    points : ndarray of shape (n, 2)

    Returns
    -------
    y : ndarray of shape (n, 4), int8
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"points need shape (n, 2), got {points.shape}")
    if np.any(points == 0):
        raise ValueError("points on an axis have no quadrant")
    signs = np.sign(points).astype(int)
    return np.array([QUADRANT_TABLE[tuple(s)] for s in signs], dtype=np.int8)


def synth_quadrant(n, seed, max_attempts=1000):
    """Uniform points in (-1, 1)^2 labelled by quadrant

    Parameters
    ----------
    n : int
        number of instances, >= 4
    seed : int
    max_attempts : int
        redraws (each from a fresh substream) until every label has both a
        positive and a negative instance.

    Returns
    -------
    data : Dataset
        d=2, l=4 with labels named A, B, C, D.
    """
    if n < 4:
        raise ValueError(f"n={n} needs to be >= 4")
    for attempt in range(max_attempts):
        rng = substream(seed, 'synth', attempt)
        x = rng.uniform(-1.0, 1.0, size=(n, 2))
        # open square, and no point on an axis
        bad = np.any((x == 0.0) | (x == -1.0), axis=1)
        while bad.any():
            x[bad] = rng.uniform(-1.0, 1.0, size=(int(bad.sum()), 2))
            bad = np.any((x == 0.0) | (x == -1.0), axis=1)
        y = quadrant_labels(x)
        counts = y.sum(axis=0)
        if np.all((counts > 0) & (counts < n)):
            if attempt:
                logger.debug(f"synth_quadrant needed {attempt + 1} draws for n={n}")
            return Dataset(x, y, QUADRANT_LABEL_NAMES)
    raise RuntimeError(f"synth_quadrant(n={n}) could not populate every label in {max_attempts} draws")


def load_matrix(path, binary=False):
    """Read a plain matrix file: header ``m l``, then m whitespace separated rows

    A dense dataset file (header ``m d l``) is accepted as well when
    `binary` is set; its label block is returned.

    Parameters
    ----------
    path : str | Path
    binary : bool
        require exactly 0/1 entries

    Returns
    -------
    values : ndarray of shape (m, l)
    """
    lines = _read_lines(path)
    if not lines:
        raise LoadError("empty file", path, 1)
    header = lines[0].split()
    if binary and len(header) == 3:
        return load_dense(path).labels.bits
    try:
        m, l = (int(tok) for tok in header)
    except ValueError:
        raise LoadError(f"malformed header {lines[0]!r}, expected 'm l'", path, 1) from None
    if m < 1 or l < 1:
        raise LoadError(f"header needs m, l >= 1, got {m} {l}", path, 1)
    if len(lines) - 1 != m:
        raise LoadError(f"header announces {m} rows, found {len(lines) - 1}", path, min(len(lines), m + 1) + 1)
    out = np.empty((m, l), dtype=np.int8 if binary else np.float64)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        tokens = line.split()
        if len(tokens) != l:
            raise LoadError(f"expected {l} fields, found {len(tokens)}", path, lineno)
        for k, tok in enumerate(tokens):
            if binary:
                if tok not in ('0', '1'):
                    raise LoadError(f"entry {tok!r} is not 0 or 1", path, lineno)
                out[i, k] = tok == '1'
            else:
                out[i, k] = _parse_float(tok, path, lineno)
    return out


def save_matrix(values, path):
    "Write a matrix in the format read by load_matrix"
    values = np.asarray(values)
    integral = np.issubdtype(values.dtype, np.integer) or values.dtype == np.bool_
    with open(path, 'w', encoding='utf-8', newline='\n') as fp:
        fp.write(f"{values.shape[0]} {values.shape[1]}\n")
        for row in values:
            if integral:
                fp.write(' '.join(str(int(v)) for v in row))
            else:
                fp.write(' '.join(repr(float(v)) for v in row))
            fp.write('\n')
