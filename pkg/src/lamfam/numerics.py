"""Linear algebra, special functions and seeded randomness.

Every scale matrix in the package is stored through its lower Cholesky
factor; :class:`SpdMatrix` serves solves, log-determinants and sampling
from a single factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import lapack, solve_triangular
from scipy.special import gammaln

__all__ = [
    "NotPositiveDefiniteError",
    "SpdMatrix",
    "SeededRng",
    "as_generator",
    "cholesky",
    "solve_spd",
    "logdet",
    "quad_form",
    "log_gamma",
    "spd_with_condition",
]


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization breaks down.

    Attributes:
        pivot: zero-based index of the first non-positive pivot.
    """

    def __init__(self, pivot: int, detail: str = ""):
        self.pivot = pivot
        msg = f"matrix is not positive definite (failing pivot index {pivot})"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive definite matrix held as ``L @ L.T``."""

    chol: np.ndarray

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.chol, dtype=float))
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError(f"Cholesky factor must be square, got shape {L.shape}")
        diag = np.diag(L)
        if not np.all(np.isfinite(L)) or np.any(diag <= 0.0):
            raise NotPositiveDefiniteError(int(np.argmin(diag)), "non-positive factor diagonal")
        L = np.tril(L)
        L.setflags(write=False)
        object.__setattr__(self, "chol", L)

    @classmethod
    def from_matrix(cls, M) -> SpdMatrix:
        return cholesky(M)

    @classmethod
    def identity(cls, d: int) -> SpdMatrix:
        return cls(np.eye(d))

    @property
    def dim(self) -> int:
        return self.chol.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        M = self.chol @ self.chol.T
        M.setflags(write=False)
        return M

    @cached_property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @cached_property
    def chol_inv(self) -> np.ndarray:
        """``L^{-1}``, cached so repeated solves are plain matrix products."""
        Linv = solve_triangular(self.chol, np.eye(self.dim), lower=True)
        Linv.setflags(write=False)
        return Linv

    @cached_property
    def inverse(self) -> np.ndarray:
        Linv = self.chol_inv
        inv = Linv.T @ Linv
        inv = 0.5 * (inv + inv.T)
        inv.setflags(write=False)
        return inv

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: matrix is {self.dim}x{self.dim}, rhs has {b.shape[0]} rows")
        return self.chol_inv.T @ (self.chol_inv @ b)

    def whiten(self, v) -> np.ndarray:
        """Return ``L^{-1} v`` (works row-wise for a batch of shape (n, d))."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: expected trailing size {self.dim}, got {v.shape[-1]}")
        return v @ self.chol_inv.T

    def quad_form(self, v) -> np.ndarray | float:
        """``v^T M^{-1} v``; batched over leading axes of ``v``."""
        z = self.whiten(v)
        if z.ndim == 1:
            return float(z @ z)
        out = np.einsum("...i,...i->...", z, z)
        return float(out) if np.ndim(out) == 0 else out

    def scaled(self, c: float) -> SpdMatrix:
        if c <= 0:
            raise ValueError(f"scale factor must be positive, got {c}")
        return SpdMatrix(np.sqrt(c) * self.chol)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim}, logdet={self.logdet:.6g})"


def cholesky(M, sym_tol: float = 1e-10) -> SpdMatrix:
    """Factor a symmetric matrix.

    Raises:
        ValueError: if ``M`` is not square or not symmetric (relative ``sym_tol``).
        NotPositiveDefiniteError: with the failing pivot index.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(float(np.max(np.abs(M))), 1.0)
    if np.max(np.abs(M - M.T)) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    L, info = lapack.dpotrf(0.5 * (M + M.T), lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise ValueError(f"dpotrf argument {-info} invalid")
    return SpdMatrix(L)


def solve_spd(M: SpdMatrix, b) -> np.ndarray:
    return M.solve(b)


def logdet(M: SpdMatrix) -> float:
    return M.logdet


def quad_form(M: SpdMatrix, v) -> float:
    return M.quad_form(v)


def log_gamma(x):
    """Natural log of the Gamma function for positive arguments."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0) or np.any(np.isnan(arr)):
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    out = gammaln(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SeededRng:
    """Reproducible stream keyed by a 64-bit seed plus a tuple of stream ids.

    ``SeededRng(seed).child(run, iteration)`` gives an independent stream per
    (run, iteration); equal keys always reproduce identical draws.
    """

    seed: int
    stream: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {self.seed}")
        if any(int(s) < 0 for s in self.stream):
            raise ValueError("stream ids must be non-negative")

    def child(self, *ids: int) -> SeededRng:
        return SeededRng(self.seed, self.stream + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.seed), len(self.stream), *self.stream])
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededRng):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def spd_with_condition(d: int, kappa: float, rng) -> SpdMatrix:
    """Random ``Q diag(lam) Q^T`` with eigenvalues geometrically spaced in [1, kappa].

    ``Q`` comes from the QR decomposition of a standard Gaussian matrix with
    the signs of ``R``'s diagonal folded in, so it is Haar distributed.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not kappa >= 1.0:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    if d == 1:
        return SpdMatrix.identity(1)
    gen = as_generator(rng)
    Q, R = np.linalg.qr(gen.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    lam = np.geomspace(1.0, kappa, d)
    M = (Q * lam) @ Q.T
    return cholesky(0.5 * (M + M.T))
