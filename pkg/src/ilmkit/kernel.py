"""Infection kernels: power-law in distance, or weighted sums of contact networks.

Index conventions: ``i`` is the susceptible individual and ``j`` the
infective, both 0-based here. A network entry ``C[i, j]`` is the weight of
the route along which ``j`` can infect ``i``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ModelError, SingularDistanceError


def distance_matrix(coords):
    """Euclidean distances between all pairs of 2-D points."""
    xy = np.asarray(coords, dtype=float)
    if xy.ndim != 2 or xy.shape[1] != 2 or xy.shape[0] < 1:
        raise DataError("coords must be a non-empty sequence of (x, y) pairs")
    if not np.all(np.isfinite(xy)):
        raise DataError("coords contain non-finite values")
    diff = xy[:, None, :] - xy[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(d, 0.0)
    d.setflags(write=False)
    return d


@dataclass(frozen=True, eq=False)
class SpatialContext:
    distances: np.ndarray
    # log d_ij, -inf on the diagonal and for coincident pairs
    log_distances: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.distances.shape[0]

    kind = "spatial"


@dataclass(frozen=True, eq=False)
class NetworkContext:
    matrices: tuple

    @property
    def size(self):
        return self.matrices[0].shape[0]

    @property
    def n_networks(self):
        return len(self.matrices)

    kind = "network"


def spatial_context(coords):
    d = distance_matrix(coords)
    with np.errstate(divide="ignore"):
        logd = np.log(d)
    logd.setflags(write=False)
    return SpatialContext(d, logd)


def network_context(matrices):
    mats = tuple(np.asarray(m, dtype=float) for m in matrices)
    if not mats:
        raise ModelError("a network kernel needs at least one contact matrix")
    n = mats[0].shape[0]
    for m in mats:
        if m.shape != (n, n):
            raise ModelError("contact matrices must all be N x N")
    return NetworkContext(mats)


def _network_weights(ctx, beta):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size == 0:
        if ctx.n_networks != 1:
            raise ModelError("beta may only be omitted for a single network")
        return np.ones(1)
    if beta.size != ctx.n_networks:
        raise ModelError(
            f"network kernel has {ctx.n_networks} matrices but {beta.size} beta values"
        )
    return beta


def kernel_value(ctx, beta, i, j):
    """kappa(i, j) for a single ordered pair (0-based, i != j)."""
    if i == j:
        raise ModelError("the kernel is not defined for i == j")
    if ctx.kind == "spatial":
        (b,) = np.asarray(beta, dtype=float).reshape(-1)
        d = ctx.distances[i, j]
        if d == 0.0:
            raise SingularDistanceError(i + 1, j + 1)
        return float(d ** -b)
    w = _network_weights(ctx, beta)
    return float(sum(wk * m[i, j] for wk, m in zip(w, ctx.matrices)))


def kernel_matrix(ctx, beta):
    """Full kernel matrix K[i, j] = kappa(i, j) with a zero diagonal.

    Coincident spatial pairs come out as ``inf``; callers decide whether the
    pair actually interacts (see :func:`check_finite_pairs`).
    """
    if ctx.kind == "spatial":
        (b,) = np.asarray(beta, dtype=float).reshape(-1)
        k = np.exp(-b * ctx.log_distances)
        np.fill_diagonal(k, 0.0)
        return k
    w = _network_weights(ctx, beta)
    k = w[0] * ctx.matrices[0]
    for wk, m in zip(w[1:], ctx.matrices[1:]):
        k = k + wk * m
    return k


def pair_kernel(ctx, beta, rows, cols):
    """Kernel values for arrays of (susceptible, infective) index pairs."""
    if ctx.kind == "spatial":
        (b,) = np.asarray(beta, dtype=float).reshape(-1)
        logd = ctx.log_distances[rows, cols]
        if logd.size and np.isneginf(logd).any():
            k = int(np.flatnonzero(np.isneginf(logd))[0])
            raise SingularDistanceError(int(rows[k]) + 1, int(cols[k]) + 1)
        return np.exp(-b * logd)
    w = _network_weights(ctx, beta)
    out = w[0] * ctx.matrices[0][rows, cols]
    for wk, m in zip(w[1:], ctx.matrices[1:]):
        out = out + wk * m[rows, cols]
    return out


def check_finite_pairs(k, rows, cols):
    """Raise if any kernel entry used by the (rows x cols) block is singular."""
    block = k[np.ix_(rows, cols)]
    if block.size and not np.all(np.isfinite(block)):
        a, b = np.argwhere(~np.isfinite(block))[0]
        raise SingularDistanceError(int(rows[a]) + 1, int(cols[b]) + 1)


def infectious_pressure(ctx, beta, trans_values, i, infectives):
    """Sum over infectives j of Omega_T(j) * kappa(i, j).

    ``trans_values`` holds Omega_T for every individual (all ones when the
    model has no transmissibility covariates).
    """
    infectives = [int(j) for j in infectives]
    if i in infectives:
        raise ModelError(f"individual {i + 1} cannot exert pressure on itself")
    total = 0.0
    for j in infectives:
        total += trans_values[j] * kernel_value(ctx, beta, i, j)
    return total
