"""Dense tensors, even-order paired operators, and the flattening index map.

The flattening convention is generalized column-major: a 1-based multi-index
``(i1, ..., iN)`` over mode sizes ``(I1, ..., IN)`` maps to the single
1-based position

    ivec(i, I) = i1 + sum_{k>=2} (ik - 1) * I1 * ... * I(k-1),

so the first mode varies fastest.  Under this map an even-order paired
operator unfolds to an ordinary sparse matrix, the paired contraction of two
operators becomes a matrix product, and applying an operator to a tensor
becomes a matrix-vector product on the tensor's column-major vectorization.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, ValidationError

__all__ = [
    "DenseTensor",
    "PairedOperator",
    "check_dims",
    "contract_power",
    "ivec",
    "ivec_inverse",
]


def check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    """Validate a shape: a non-empty tuple of positive mode sizes."""
    out = tuple(int(d) for d in dims)
    if len(out) == 0:
        raise DimensionError("shape must have at least one mode")
    if any(d < 1 for d in out):
        raise DimensionError(f"mode sizes must be positive, got {out}")
    return out


def ivec(index: Sequence[int], dims: Sequence[int]) -> int:
    """Flatten a 1-based multi-index into a single 1-based position.

    The map is a bijection from the index box onto ``1..prod(dims)`` with the
    first mode varying fastest.

    >>> ivec((2, 3), (4, 5))
    10
    """
    dims = check_dims(dims)
    if len(index) != len(dims):
        raise DimensionError(
            f"multi-index has {len(index)} modes, shape has {len(dims)}"
        )
    pos = 0
    stride = 1
    for k, (i, d) in enumerate(zip(index, dims), start=1):
        i = int(i)
        if not 1 <= i <= d:
            raise IndexError(f"index {i} out of range 1..{d} in mode {k}")
        pos += (i - 1) * stride
        stride *= d
    return pos + 1


def ivec_inverse(position: int, dims: Sequence[int]) -> tuple[int, ...]:
    """Invert :func:`ivec`: recover the 1-based multi-index of a flat position."""
    dims = check_dims(dims)
    total = math.prod(dims)
    position = int(position)
    if not 1 <= position <= total:
        raise IndexError(f"position {position} out of range 1..{total}")
    rem = position - 1
    out = []
    for d in dims:
        rem, digit = divmod(rem, d)
        out.append(digit + 1)
    return tuple(out)


def as_cubical_array(data, minimum_order: int) -> np.ndarray:
    """Coerce to a float array with all mode sizes equal; not exported."""
    arr = data.array if isinstance(data, DenseTensor) else np.asarray(data, dtype=float)
    if arr.ndim < minimum_order:
        raise DimensionError(f"tensor order must be at least {minimum_order}")
    n = arr.shape[0]
    if any(d != n for d in arr.shape):
        raise DimensionError(f"tensor must be cubical, got shape {arr.shape}")
    return arr


def _zero_based(index: Sequence[int], dims: tuple[int, ...]) -> tuple[int, ...]:
    if len(index) != len(dims):
        raise DimensionError(
            f"multi-index has {len(index)} modes, shape has {len(dims)}"
        )
    out = []
    for k, (i, d) in enumerate(zip(index, dims), start=1):
        i = int(i)
        if not 1 <= i <= d:
            raise IndexError(f"index {i} out of range 1..{d} in mode {k}")
        out.append(i - 1)
    return tuple(out)


class DenseTensor:
    """Order-k real tensor whose flat layout follows the ``ivec`` order.

    The wrapped array is frozen after construction; operations return new
    objects, so instances are safe to share across threads.
    """

    __slots__ = ("_array",)

    def __init__(self, array, shape: Sequence[int] | None = None, copy: bool = True):
        arr = np.array(array, dtype=float, copy=copy)
        if shape is not None:
            arr = arr.reshape(check_dims(shape), order="F")
        if arr.ndim == 0:
            raise DimensionError("a tensor needs at least one mode")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("tensor entries must be finite")
        # Column-major storage makes vec() a zero-copy view in ivec order.
        arr = np.asfortranarray(arr)
        arr.setflags(write=False)
        self._array = arr

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(check_dims(shape)), copy=False)

    @classmethod
    def from_entries(
        cls, shape: Sequence[int], entries: Iterable[tuple[Sequence[int], float]]
    ) -> "DenseTensor":
        """Build from 1-based coordinate entries; duplicates accumulate."""
        shape = check_dims(shape)
        flat = np.zeros(math.prod(shape))
        for index, value in entries:
            flat[ivec(index, shape) - 1] += float(value)
        return cls(flat.reshape(shape, order="F"), copy=False)

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the underlying data."""
        return self._array

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def order(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    def vec(self) -> np.ndarray:
        """Column-major vectorization; position ``ivec(i, shape) - 1`` holds entry ``i``."""
        return self._array.ravel(order="F")

    def get(self, index: Sequence[int]) -> float:
        """Entry at a 1-based multi-index."""
        return float(self._array[_zero_based(index, self.shape)])

    def nonzero_entries(self) -> Iterator[tuple[tuple[int, ...], float]]:
        """Yield ``(multi_index, value)`` for nonzero entries in flat order."""
        flat = self.vec()
        for pos in np.flatnonzero(flat):
            yield ivec_inverse(int(pos) + 1, self.shape), float(flat[pos])

    def __repr__(self) -> str:
        return f"DenseTensor(shape={self.shape}, nnz={int(np.count_nonzero(self._array))})"


def contract_power(tensor, x, copies: int | None = None) -> np.ndarray:
    """Contract every mode after the first with copies of a vector.

    For an order-m cubical tensor ``T`` and a length-n vector ``x`` this
    returns the length-n vector with entries

        out[i] = sum_{i2..im} T[i, i2, .., im] * x[i2] * ... * x[im],

    the order-(m-1) polynomial map that drives the mean-field dynamics.  For
    m = 2 it reduces to the matrix-vector product.
    """
    arr = tensor.array if isinstance(tensor, DenseTensor) else np.asarray(tensor, dtype=float)
    vec = np.asarray(x, dtype=float)
    if arr.ndim < 2:
        raise DimensionError("contract_power needs a tensor of order >= 2")
    if vec.ndim != 1:
        raise DimensionError("x must be a vector")
    n = vec.shape[0]
    if any(d != n for d in arr.shape):
        raise DimensionError(
            f"tensor must be cubical with mode size {n}, got shape {arr.shape}"
        )
    expected = arr.ndim - 1
    if copies is None:
        copies = expected
    if copies != expected:
        raise DimensionError(f"copies must equal order - 1 = {expected}, got {copies}")
    out = arr
    for _ in range(copies):
        out = out @ vec
    return out


class PairedOperator:
    """Even-order paired tensor stored through its sparse unfolding.

    A paired operator with pair count N maps order-N tensors of shape
    ``col_shape`` to order-N tensors of shape ``row_shape``.  The compiled
    sparse-column matrix holds the entry for multi-index pair ``(i, j)`` at
    matrix position ``(ivec(i, row_shape), ivec(j, col_shape))``; structural
    zeros are never stored.
    """

    __slots__ = ("row_shape", "col_shape", "_matrix")

    def __init__(self, row_shape: Sequence[int], col_shape: Sequence[int], matrix):
        self.row_shape = check_dims(row_shape)
        self.col_shape = check_dims(col_shape)
        if len(self.row_shape) != len(self.col_shape):
            raise DimensionError(
                "row and column shapes must have the same number of modes"
            )
        mat = sp.csc_matrix(matrix)
        expected = (math.prod(self.row_shape), math.prod(self.col_shape))
        if mat.shape != expected:
            raise DimensionError(
                f"unfolded matrix has shape {mat.shape}, expected {expected}"
            )
        if mat.nnz and not np.all(np.isfinite(mat.data)):
            raise ValidationError("paired operator entries must be finite")
        mat.eliminate_zeros()
        mat.sort_indices()
        self._matrix = mat

    @classmethod
    def from_entries(
        cls,
        row_shape: Sequence[int],
        col_shape: Sequence[int],
        entries: Iterable[tuple[Sequence[int], Sequence[int], float]],
    ) -> "PairedOperator":
        """Build from ``(row_index, col_index, value)`` triples; duplicates accumulate."""
        row_shape = check_dims(row_shape)
        col_shape = check_dims(col_shape)
        rows, cols, vals = [], [], []
        for i, j, v in entries:
            rows.append(ivec(i, row_shape) - 1)
            cols.append(ivec(j, col_shape) - 1)
            vals.append(float(v))
        mat = sp.coo_matrix(
            (vals, (rows, cols)),
            shape=(math.prod(row_shape), math.prod(col_shape)),
        )
        return cls(row_shape, col_shape, mat)

    @classmethod
    def identity(cls, shape: Sequence[int]) -> "PairedOperator":
        shape = check_dims(shape)
        return cls(shape, shape, sp.identity(math.prod(shape), format="csc"))

    @classmethod
    def zeros(cls, row_shape: Sequence[int], col_shape: Sequence[int]) -> "PairedOperator":
        row_shape = check_dims(row_shape)
        col_shape = check_dims(col_shape)
        mat = sp.csc_matrix((math.prod(row_shape), math.prod(col_shape)))
        return cls(row_shape, col_shape, mat)

    @property
    def pair_count(self) -> int:
        return len(self.row_shape)

    @property
    def row_size(self) -> int:
        return self._matrix.shape[0]

    @property
    def col_size(self) -> int:
        return self._matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self._matrix.nnz

    @property
    def unfolded(self) -> sp.csc_matrix:
        """The compiled sparse unfolding.  Treat as read-only."""
        return self._matrix

    def entry(self, row_index: Sequence[int], col_index: Sequence[int]) -> float:
        r = ivec(row_index, self.row_shape) - 1
        c = ivec(col_index, self.col_shape) - 1
        return float(self._matrix[r, c])

    def entries(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...], float]]:
        """Yield ``(row_index, col_index, value)`` in column-major order."""
        coo = self._matrix.tocoo()
        order = np.lexsort((coo.row, coo.col))
        for k in order:
            yield (
                ivec_inverse(int(coo.row[k]) + 1, self.row_shape),
                ivec_inverse(int(coo.col[k]) + 1, self.col_shape),
                float(coo.data[k]),
            )

    def __matmul__(self, other: "PairedOperator") -> "PairedOperator":
        """Paired contraction; equals the matrix product of the unfoldings."""
        if not isinstance(other, PairedOperator):
            return NotImplemented
        if self.col_shape != other.row_shape:
            raise DimensionError(
                f"inner shapes differ: {self.col_shape} vs {other.row_shape}"
            )
        return PairedOperator(
            self.row_shape, other.col_shape, self._matrix @ other._matrix
        )

    def apply(self, operand):
        """Contract with an order-N tensor over all column modes.

        Accepts a :class:`DenseTensor` or a bare array and returns the same
        kind; equivalent to unfolding, multiplying the vectorization, and
        reshaping back.
        """
        wrap = isinstance(operand, DenseTensor)
        arr = operand.array if wrap else np.asarray(operand, dtype=float)
        if arr.shape != self.col_shape:
            raise DimensionError(
                f"operand shape {arr.shape} does not match column shape {self.col_shape}"
            )
        out = self._matrix @ arr.ravel(order="F")
        out = np.asarray(out).reshape(self.row_shape, order="F")
        return DenseTensor(out, copy=False) if wrap else out

    def _same_shapes(self, other: "PairedOperator") -> None:
        if self.row_shape != other.row_shape or self.col_shape != other.col_shape:
            raise DimensionError("paired operators must share row and column shapes")

    def __add__(self, other: "PairedOperator") -> "PairedOperator":
        if not isinstance(other, PairedOperator):
            return NotImplemented
        self._same_shapes(other)
        return PairedOperator(self.row_shape, self.col_shape, self._matrix + other._matrix)

    def __sub__(self, other: "PairedOperator") -> "PairedOperator":
        if not isinstance(other, PairedOperator):
            return NotImplemented
        self._same_shapes(other)
        return PairedOperator(self.row_shape, self.col_shape, self._matrix - other._matrix)

    def __mul__(self, scalar) -> "PairedOperator":
        return PairedOperator(self.row_shape, self.col_shape, self._matrix * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "PairedOperator":
        return self * -1.0

    def __repr__(self) -> str:
        return (
            f"PairedOperator(row_shape={self.row_shape}, "
            f"col_shape={self.col_shape}, nnz={self.nnz})"
        )
