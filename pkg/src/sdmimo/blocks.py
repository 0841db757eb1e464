"""Hermitian matrices that are block diagonal with square blocks.

Pilot-domain covariances (MN x MN) and stacked-channel covariances (MK x MK)
are block diagonal in every case that matters here, so they are stored as a
stack of blocks and only expanded on request.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class BlockDiagonal:
    blocks: np.ndarray  # (n_blocks, b, b)

    @classmethod
    def repeat(cls, block: np.ndarray, n: int) -> "BlockDiagonal":
        return cls(np.broadcast_to(block, (n,) + block.shape).copy())

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def block_size(self) -> int:
        return self.blocks.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        n = self.n_blocks * self.block_size
        return (n, n)

    def dense(self) -> np.ndarray:
        return scipy.linalg.block_diag(*self.blocks)

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.blocks, axis1=1, axis2=2).reshape(-1)

    def trace(self) -> float:
        return float(np.real(np.trace(self.blocks, axis1=1, axis2=2).sum()))

    def identical(self) -> bool:
        return bool(np.all(self.blocks == self.blocks[0]))

    def map(self, fn) -> "BlockDiagonal":
        return BlockDiagonal(np.stack([fn(b) for b in self.blocks]))

    def __add__(self, other: "BlockDiagonal") -> "BlockDiagonal":
        return BlockDiagonal(self.blocks + other.blocks)

    def __sub__(self, other: "BlockDiagonal") -> "BlockDiagonal":
        return BlockDiagonal(self.blocks - other.blocks)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve with a stacked right-hand side of shape (..., n_blocks * b)."""
        b = self.block_size
        r = rhs.reshape(rhs.shape[:-1] + (self.n_blocks, b))
        out = np.empty(r.shape, dtype=np.result_type(r, self.blocks))
        if self.identical():
            f = hermitian_factor(self.blocks[0])
            flat = r.reshape(-1, b).T
            out = scipy.linalg.cho_solve(f, flat).T.reshape(r.shape)
        else:
            for i, blk in enumerate(self.blocks):
                f = hermitian_factor(blk)
                out[..., i, :] = scipy.linalg.cho_solve(f, r[..., i, :].reshape(-1, b).T).T.reshape(
                    r.shape[:-2] + (b,))
        return out.reshape(rhs.shape)


def hermitian_factor(A: np.ndarray, jitter: float = 0.0):
    """Cholesky factor of a Hermitian positive definite matrix.

    ``jitter`` adds ``jitter * trace / n`` to the diagonal first. A failed
    factorization raises ``numpy.linalg.LinAlgError`` with the smallest
    eigenvalue in the message.
    """
    A = 0.5 * (A + A.conj().T)
    if jitter:
        A = A + jitter * np.real(np.trace(A)) / A.shape[0] * np.eye(A.shape[0])
    try:
        return scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(A)
        raise np.linalg.LinAlgError(
            f"covariance is not positive definite (min eigenvalue {w.min():.3e}, "
            f"trace {np.real(np.trace(A)):.3e})") from exc


def as_dense(C) -> np.ndarray:
    return C.dense() if isinstance(C, BlockDiagonal) else np.asarray(C)


def hermitian_solve(C, rhs: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """C^{-1} rhs for rhs of shape (..., n); C dense or block diagonal."""
    if isinstance(C, BlockDiagonal) and not jitter:
        return C.solve(rhs)
    f = hermitian_factor(as_dense(C), jitter)
    n = rhs.shape[-1]
    return scipy.linalg.cho_solve(f, rhs.reshape(-1, n).T).T.reshape(rhs.shape)
