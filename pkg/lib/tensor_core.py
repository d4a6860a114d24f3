"""Dense complex tensors and the spectral kernels shared by the engine.

Everything is complex128. Real groups (SO, Sp as real form, G2) are embedded
in complex matrices so a single code path serves every family.
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg

from lib.error_handling import ShapeError, UsageError

logger = logging.getLogger(__name__)

DEFAULT_REL_CUTOFF = 1e-8
HERMITIAN_TOL = 1e-10
JSON_DROP_BELOW = 1e-14


@dataclass(frozen=True)
class Tensor:
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.complex128, copy=True)
        if data.ndim == 0:
            data = data.reshape(())
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor has non-finite entries")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def as_matrix(self):
        """View as a square matrix: first half of the axes are rows."""
        if self.ndim == 2:
            return self.data
        if self.ndim % 2:
            raise ShapeError(f"cannot view rank-{self.ndim} tensor as a matrix")
        rows = int(np.prod(self.shape[: self.ndim // 2]))
        return self.data.reshape(rows, -1)


@dataclass(frozen=True)
class HermitianEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def as_array(m):
    if isinstance(m, Tensor):
        return m.data
    return np.asarray(m, dtype=np.complex128)


def _square(m, op):
    m = as_array(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{op} needs a square matrix, got shape {m.shape}")
    return m


def contract(a, b, pairs):
    """Sum over the paired axes; free axes of ``a`` come first, then those of ``b``.

    The paired axes are flattened in row-major order (lexicographic over the
    paired indices, first pair slowest) and reduced by a single matrix product,
    so the summation order is fixed for given shapes.
    """
    a, b = as_array(a), as_array(b)
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ShapeError(f"an axis is paired twice in {pairs}")
    for i, j in pairs:
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise ShapeError(f"pair ({i}, {j}) out of range for ranks {a.ndim} and {b.ndim}")
        if a.shape[i] != b.shape[j]:
            raise ShapeError(
                f"axis {i} of a has extent {a.shape[i]} but axis {j} of b has extent {b.shape[j]}")
    return Tensor(np.tensordot(a, b, axes=(axes_a, axes_b)))


def symmetrize(m):
    m = _square(m, "symmetrize")
    return (m + m.conj().T) / 2


def eig_hermitian(m):
    m = _square(m, "eig_hermitian")
    w, u = scipy.linalg.eigh(symmetrize(m))
    return HermitianEig(eigenvalues=np.asarray(w, dtype=float), eigenvectors=u)


def pseudoinverse(m, rel_cutoff=DEFAULT_REL_CUTOFF):
    """Moore-Penrose inverse of a Hermitian matrix through its eigendecomposition."""
    if not 0 < rel_cutoff < 1:
        raise UsageError(f"relative cutoff must lie in (0, 1), got {rel_cutoff}")
    eig = eig_hermitian(m)
    w = eig.eigenvalues
    scale = np.max(np.abs(w)) if w.size else 0.0
    if scale == 0:
        return Tensor(np.zeros_like(as_array(m)))
    keep = np.abs(w) >= rel_cutoff * scale
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    u = eig.eigenvectors
    return Tensor((u * inv) @ u.conj().T)


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = as_array(m)
    return np.linalg.norm(m - m.conj().T) <= tol * max(np.linalg.norm(m), 1.0)


def expm(m):
    m = _square(m, "expm")
    if not m.any():
        return Tensor(np.eye(m.shape[0], dtype=np.complex128))
    if is_hermitian(m):
        eig = eig_hermitian(m)
        u = eig.eigenvectors
        return Tensor((u * np.exp(eig.eigenvalues)) @ u.conj().T)
    if is_hermitian(1j * m):
        # m = -i h with h Hermitian
        eig = eig_hermitian(1j * m)
        u = eig.eigenvectors
        return Tensor((u * np.exp(-1j * eig.eigenvalues)) @ u.conj().T)
    return Tensor(scipy.linalg.expm(m))


def expm_skew_batch(stack):
    """expm of a stack of skew-Hermitian matrices, shape (..., d, d)."""
    stack = np.asarray(stack, dtype=np.complex128)
    h = 1j * stack
    h = (h + np.swapaxes(h.conj(), -1, -2)) / 2
    w, u = np.linalg.eigh(h)
    return (u * np.exp(-1j * w)[..., None, :]) @ np.swapaxes(u.conj(), -1, -2)


def tensor_to_json(t, drop_below=JSON_DROP_BELOW):
    data = as_array(t)
    entries = []
    for idx in np.argwhere(np.abs(data) >= drop_below):
        value = data[tuple(idx)]
        entries.append({"idx": [int(i) for i in idx], "re": float(value.real), "im": float(value.imag)})
    return {"shape": [int(s) for s in data.shape], "entries": entries}


def tensor_from_json(document):
    shape = tuple(document["shape"])
    data = np.zeros(shape, dtype=np.complex128)
    for entry in document["entries"]:
        idx = tuple(entry["idx"])
        if len(idx) != len(shape):
            raise ShapeError(f"entry index {list(idx)} does not match shape {list(shape)}")
        data[idx] = complex(entry["re"], entry["im"])
    return Tensor(data)
