"""Brownian increments and iterated stochastic integrals.

One step of the scheme needs, for every particle, the increments
``dW[i, j]`` and the double integrals ``I[i, j2, j1] = int int dW^{i,j2}_r
dW^{i,j1}_s`` over the step.  The diagonal entries have the closed form
``(dW**2 - h) / 2``; the off-diagonal entries contain the Levy area, which
has no finite-dimensional sampler for m >= 2 and is approximated by the
truncated trigonometric expansion of Kloeden-Platen-Wright with the Gaussian
tail correction of Wiktorsson (2001).  With K expansion terms the mean-square
truncation error per area is O(h**2 / K**2).

When the measure-correction term of the scheme is enabled, the integrals
coupling different particles are needed as well.  They are produced by one
expansion over the stacked (N*m)-dimensional increment vector, so the whole
block is jointly consistent; the diagonal particle blocks of that matrix are
the own-particle integrals.

``chen_aggregate`` composes blocks over adjacent subintervals exactly, which
is how a fine-step reference path and its coarse-step counterparts share one
underlying Brownian path.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ShapeError

DEFAULT_K = 20

_TAIL_CONST = np.pi ** 2 / 6.0


def _tail_weight(K):
    """sum_{k > K} 1/k**2, the variance weight of the truncated tail."""
    return _TAIL_CONST - sum(1.0 / k ** 2 for k in range(1, K + 1))


@dataclass(frozen=True)
class NoiseBlock:
    """Noise of one time step for the whole ensemble.

    ``own_I[i, j2, j1]`` is the double integral with inner component ``j2``
    and outer component ``j1`` of particle ``i``.  ``cross_I`` (present only
    when cross-particle integrals were requested) is the full
    ``(N*m, N*m)`` matrix over the stacked index ``p = i*m + j``, with
    ``cross_I[p, q]`` the integral with inner component ``p`` and outer
    component ``q``.
    """

    h: float
    dW: np.ndarray
    own_I: np.ndarray
    cross_I: np.ndarray | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise ShapeError(f"step length must be positive, got {self.h}")
        N, m = self.dW.shape
        if self.own_I.shape != (N, m, m):
            raise ShapeError(
                f"own_I has shape {self.own_I.shape}, expected {(N, m, m)}")
        if self.cross_I is not None and self.cross_I.shape != (N * m, N * m):
            raise ShapeError(
                f"cross_I has shape {self.cross_I.shape}, "
                f"expected {(N * m, N * m)}")

    @property
    def n_particles(self):
        return self.dW.shape[0]

    @property
    def m(self):
        return self.dW.shape[1]

    @property
    def has_cross(self):
        return self.cross_I is not None

    @classmethod
    def from_increments(cls, dW, h, with_cross=False):
        """Deterministic block with zero Levy areas (test hook).

        The diagonal and the symmetric part are exact; the antisymmetric
        area part is zero, so this is *not* distributionally correct for
        m >= 2.  It exists so tests can force specific increments.
        """
        dW = np.asarray(dW, dtype=np.float64)
        N, m = dW.shape
        own = 0.5 * np.einsum("ia,ib->iab", dW, dW)
        idx = np.arange(m)
        own[:, idx, idx] -= 0.5 * h
        cross = None
        if with_cross:
            flat = dW.reshape(-1)
            cross = 0.5 * np.outer(flat, flat)
            cross[np.diag_indices_from(cross)] -= 0.5 * h
        return cls(h=float(h), dW=dW, own_I=own, cross_I=cross)


def _sample_batched_integrals(rng, B, M, h, K):
    """Increments and iterated-integral matrices for B independent systems.

    Each system is an M-dimensional Brownian motion over one step of length
    ``h``.  Returns ``(dW, I)`` with shapes ``(B, M)`` and ``(B, M, M)``;
    ``I[b, p, q]`` has inner component p and outer component q.
    """
    dW = rng.standard_normal((B, M)) * np.sqrt(h)
    I = 0.5 * np.einsum("bp,bq->bpq", dW, dW)
    idx = np.arange(M)
    I[:, idx, idx] -= 0.5 * h
    if M == 1:
        return dW, I

    # truncated Brownian-bridge expansion of the antisymmetric area
    coef = np.sqrt(2.0 / h)
    A = np.zeros((B, M, M))
    for k in range(1, K + 1):
        X = rng.standard_normal((B, M))
        U = rng.standard_normal((B, M)) + coef * dW
        A += (np.einsum("bp,bq->bpq", X, U)
              - np.einsum("bp,bq->bpq", U, X)) / k

    # Gaussian tail correction: conditionally on dW the discarded tail sum
    # is centred Gaussian; its exact conditional covariance over the
    # antisymmetric components is matched by
    #   sqrt(2) * S  +  sqrt(2/h) * (xi dW^T - dW xi^T)
    # with S an antisymmetric matrix of independent standard normals and xi
    # a fresh standard normal vector, scaled by sqrt(tail_weight) * h/(2 pi).
    Z = rng.standard_normal((B, M, M))
    S = np.triu(Z, k=1)
    S = S - np.transpose(S, (0, 2, 1))
    xi = rng.standard_normal((B, M))
    tail = (np.sqrt(2.0) * S
            + coef * (np.einsum("bp,bq->bpq", xi, dW)
                      - np.einsum("bp,bq->bpq", dW, xi)))
    A += np.sqrt(_tail_weight(K)) * tail
    I += (h / (2.0 * np.pi)) * A
    return dW, I


def sample_step_noise(rng, N, m, h, K=DEFAULT_K, with_cross=False):
    """Draw one step's NoiseBlock for N particles.

    Without the cross flag each particle gets its own m-dimensional
    expansion (vectorised over particles).  With it, one expansion runs over
    the stacked (N*m)-dimensional increment, which scales as O((N*m)**2 * K)
    and is intended for small ensembles only.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if N < 1 or m < 1:
        raise ValueError(f"need N >= 1 and m >= 1, got N={N}, m={m}")

    if with_cross:
        dW_flat, I_full = _sample_batched_integrals(rng, 1, N * m, h, K)
        dW = dW_flat.reshape(N, m)
        cross = np.ascontiguousarray(I_full[0])
        own = np.empty((N, m, m))
        for i in range(N):
            own[i] = cross[i * m:(i + 1) * m, i * m:(i + 1) * m]
        return NoiseBlock(h=float(h), dW=dW, own_I=own, cross_I=cross)

    dW, own = _sample_batched_integrals(rng, N, m, h, K)
    return NoiseBlock(h=float(h), dW=dW, own_I=own, cross_I=None)


def _chen_pair(b1, b2):
    if b1.dW.shape != b2.dW.shape or b1.has_cross != b2.has_cross:
        raise ShapeError("cannot aggregate noise blocks of different shapes")
    dW = b1.dW + b2.dW
    # inner increment from the first subinterval, outer from the second
    own = b1.own_I + b2.own_I + np.einsum("ia,ib->iab", b1.dW, b2.dW)
    cross = None
    if b1.has_cross:
        cross = (b1.cross_I + b2.cross_I
                 + np.outer(b1.dW.reshape(-1), b2.dW.reshape(-1)))
    return NoiseBlock(h=b1.h + b2.h, dW=dW, own_I=own, cross_I=cross)


def chen_aggregate(fine_blocks):
    """Compose noise blocks over consecutive subintervals into one block.

    The composition identity is exact: the coarse increments are sums and
    the coarse double integrals pick up the product of inner increments from
    earlier subintervals with outer increments from later ones.  No
    additional approximation is introduced.
    """
    blocks = list(fine_blocks)
    if not blocks:
        raise ValueError("need at least one noise block")
    if len(blocks) == 1:
        return blocks[0]
    return reduce(_chen_pair, blocks)
