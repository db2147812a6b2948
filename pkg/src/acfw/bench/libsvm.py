"""Reader and writer for the LIBSVM sparse text format.

Each line is ``label idx:val idx:val ...`` with 1-based, strictly increasing
feature indices. Labels are mapped to {0, 1}: a label is 0 when it is
``<= 0`` or, for two-valued files, equal to the smaller observed label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


class LibSVMFormatError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class SparseDesign:
    n_rows: int
    n_cols: int
    entries: list  # per row: list of (col, value) with increasing col
    labels: np.ndarray

    def __post_init__(self):
        for i, row in enumerate(self.entries):
            cols = [c for c, _ in row]
            if any(b <= a for a, b in zip(cols, cols[1:])):
                raise ValueError(f"row {i}: column indices not strictly increasing")
            if cols and (cols[0] < 0 or cols[-1] >= self.n_cols):
                raise ValueError(f"row {i}: column index out of range")

    def to_csr(self):
        indptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        indices, data = [], []
        for i, row in enumerate(self.entries):
            indptr[i + 1] = indptr[i] + len(row)
            for c, v in row:
                indices.append(c)
                data.append(v)
        return sparse.csr_matrix(
            (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), indptr),
            shape=(self.n_rows, self.n_cols),
        )

    @classmethod
    def from_matrix(cls, mat, labels):
        mat = sparse.csr_matrix(mat)
        mat.sort_indices()
        entries = []
        for i in range(mat.shape[0]):
            lo, hi = mat.indptr[i], mat.indptr[i + 1]
            entries.append([(int(c), float(v)) for c, v in zip(mat.indices[lo:hi], mat.data[lo:hi])])
        return cls(mat.shape[0], mat.shape[1], entries, np.asarray(labels, dtype=float))

    def __eq__(self, other):
        return (
            isinstance(other, SparseDesign)
            and self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and self.entries == other.entries
            and np.array_equal(self.labels, other.labels)
        )


def map_labels(raw):
    raw = np.asarray(raw, dtype=float)
    uniq = np.unique(raw)
    if len(uniq) == 2:
        return (raw != uniq[0]).astype(float)
    return (raw > 0).astype(float)


def parse_libsvm_lines(lines, n_cols=None):
    raw_labels, entries = [], []
    max_col = -1
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw_labels.append(float(tokens[0]))
        except ValueError:
            raise LibSVMFormatError(lineno, f"non-numeric label {tokens[0]!r}") from None
        row, prev = [], 0
        for tok in tokens[1:]:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise LibSVMFormatError(lineno, f"malformed token {tok!r}")
            try:
                j, v = int(idx), float(val)
            except ValueError:
                raise LibSVMFormatError(lineno, f"non-numeric token {tok!r}") from None
            if j <= prev:
                raise LibSVMFormatError(lineno, f"feature indices must be increasing and >= 1 (got {j} after {prev})")
            prev = j
            row.append((j - 1, v))
        if row:
            max_col = max(max_col, row[-1][0])
        entries.append(row)
    if not entries:
        raise LibSVMFormatError(0, "empty file")
    if n_cols is None:
        n_cols = max_col + 1
    elif max_col >= n_cols:
        raise LibSVMFormatError(0, f"feature index {max_col + 1} exceeds n_cols={n_cols}")
    return SparseDesign(len(entries), n_cols, entries, map_labels(raw_labels))


def parse_libsvm(path, n_cols=None):
    with open(path) as fh:
        return parse_libsvm_lines(fh, n_cols)


def format_libsvm(design):
    """Serialize with labels written as +1/-1."""
    out = []
    for label, row in zip(design.labels, design.entries):
        parts = ["+1" if label > 0 else "-1"]
        parts.extend(f"{c + 1}:{v!r}" for c, v in row)
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def write_libsvm(design, path):
    with open(path, "w") as fh:
        fh.write(format_libsvm(design))
