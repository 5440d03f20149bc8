"""Group knockoff construction.

Given a design X with Gram matrix Sigma = X'X and a column grouping, builds
a knockoff matrix X_tilde satisfying

    X_tilde' X_tilde = Sigma,      X_tilde' X = Sigma - S,

where S is symmetric PSD and group-block-diagonal (S[G_i, G_j] = 0 for
i != j).  S is chosen equivariantly: S_i = gamma * Sigma[G_i, G_i] with a
single global gamma made as large as possible subject to S <= 2*Sigma, i.e.

    gamma = min(1, 2 * lambda_min(D Sigma D)),
    D = blockdiag(Sigma[G_i, G_i]^{-1/2}).

The knockoffs are then

    X_tilde = X (I - Sigma^{-1} S) + U_tilde C,

with U_tilde an orthonormal n x p matrix orthogonal to the span of X and
C'C = 2S - S Sigma^{-1} S (factored by eigendecomposition with clipping,
since the matrix is exactly singular when gamma hits the constraint
boundary and a strict Cholesky would fail there).

Requires n >= 2p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .design import GroupedDesign, gram
from .errors import DataValidationError, NumericalError

__all__ = [
    "KnockoffAugmentation",
    "ConditionReport",
    "block_inverse_sqrt",
    "equivariant_gamma",
    "build_s_matrix",
    "orthonormal_complement",
    "psd_factor",
    "construct_group_knockoffs",
    "verify_knockoff_conditions",
    "shrink_gamma",
]

# Relative eigenvalue floor for declaring a diagonal block (or the whitened
# Gram) numerically singular.
EIG_FLOOR = 1e-10

# When the constraint 2*lambda_min binds (gamma < 1), gamma is shrunk by this
# relative amount before building S so that 2*Sigma - S stays numerically PSD.
GAMMA_SHRINK = 1e-7


@dataclass(frozen=True)
class ConditionReport:
    """Maximum deviations from the knockoff conditions, plus a verdict."""

    max_gram_dev: float
    max_cross_dev: float
    max_off_block: float
    min_eig_s: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class KnockoffAugmentation:
    """A constructed knockoff matrix together with its ingredients.

    Attributes
    ----------
    X_tilde : (n, p) knockoff matrix.
    S : (p, p) group-block-diagonal PSD matrix with X_tilde'X = Sigma - S.
    gamma : the scale actually used for S (after the boundary shrink).
    U_tilde : (n, p) orthonormal matrix orthogonal to the span of X.
    C : (p, p) factor with C'C = 2S - S Sigma^{-1} S.
    diagnostics : ConditionReport measured on the finished construction.
    """

    X_tilde: np.ndarray
    S: np.ndarray
    gamma: float
    U_tilde: np.ndarray
    C: np.ndarray
    diagnostics: ConditionReport


def shrink_gamma(gamma: float) -> float:
    """Apply the boundary shrink used by :func:`construct_group_knockoffs`."""
    return gamma * (1.0 - GAMMA_SHRINK) if gamma < 1.0 else 1.0


def block_inverse_sqrt(Sigma: np.ndarray, groups, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    """Block-diagonal matrix D with D[G_i, G_i] = Sigma[G_i, G_i]^{-1/2}.

    Each block's symmetric inverse square root comes from its
    eigendecomposition.  A block whose smallest eigenvalue is at or below
    ``eig_floor`` times its trace is treated as singular.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    D = np.zeros_like(Sigma)
    for i, g in enumerate(groups):
        block = Sigma[np.ix_(g, g)]
        block = (block + block.T) / 2.0
        w, V = linalg.eigh(block)
        floor = eig_floor * max(np.trace(block), 1.0)
        if w[0] <= floor:
            raise NumericalError(
                f"group {i} has a singular Gram block (min eigenvalue {w[0]:.3e})"
            )
        D[np.ix_(g, g)] = (V / np.sqrt(w)) @ V.T
    return D


def equivariant_gamma(Sigma: np.ndarray, groups, eig_floor: float = EIG_FLOOR) -> float:
    """The largest gamma in [0, 1] with gamma * blockdiag(Sigma_i) <= 2*Sigma.

    Equals min(1, 2 * lambda_min(D Sigma D)) for the block-whitening D of
    :func:`block_inverse_sqrt`.
    """
    D = block_inverse_sqrt(Sigma, groups, eig_floor=eig_floor)
    M = D @ Sigma @ D
    M = (M + M.T) / 2.0
    lam_min = linalg.eigvalsh(M)[0]
    if lam_min <= eig_floor:
        raise NumericalError(
            f"design too degenerate for knockoffs: whitened Gram has minimum "
            f"eigenvalue {lam_min:.3e}"
        )
    return min(1.0, 2.0 * lam_min)


def build_s_matrix(Sigma: np.ndarray, groups, gamma: float) -> np.ndarray:
    """Group-block-diagonal S with S[G_i, G_i] = gamma * Sigma[G_i, G_i].

    Off-block entries are exactly zero.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    S = np.zeros_like(Sigma)
    for g in groups:
        block = Sigma[np.ix_(g, g)]
        S[np.ix_(g, g)] = gamma * (block + block.T) / 2.0
    return S


# Mixed into the basis-completion seed so the Gaussian draw lives in a
# different stream than any data simulated from the same user seed (a draw
# that reproduces X itself would be annihilated by the projection).
_BASIS_STREAM_TAG = 0x6F727468


def _basis_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed.spawn(1)[0])
    if seed is None:
        return np.random.default_rng()
    entropy = [int(s) for s in np.atleast_1d(seed)]
    return np.random.default_rng([_BASIS_STREAM_TAG] + entropy)


def orthonormal_complement(X: np.ndarray, seed=0) -> np.ndarray:
    """An n x p orthonormal matrix orthogonal to the column span of X.

    Deterministic given ``seed``: the basis is completed from a seeded
    Gaussian draw, projected against col(X), and re-orthonormalized (two
    projection/QR rounds keep both conditions near machine precision).

    Raises
    ------
    DataValidationError
        If n < 2p (not enough dimensions for a p-dimensional complement).
    NumericalError
        If X is column-rank deficient.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2 * p:
        raise DataValidationError(
            f"knockoff construction requires n >= 2*p observations, got n={n}, p={p}"
        )
    Qx, Rx = linalg.qr(X, mode="economic")
    if np.min(np.abs(np.diag(Rx))) <= 1e-10 * max(np.max(np.abs(np.diag(Rx))), 1.0):
        raise NumericalError("design matrix is column-rank deficient")
    rng = _basis_rng(seed)
    for attempt in range(3):
        U = rng.standard_normal((n, p))
        ok = True
        for _ in range(2):
            U -= Qx @ (Qx.T @ U)
            U, Ru = linalg.qr(U, mode="economic")
            if np.min(np.abs(np.diag(Ru))) <= 1e-12:
                ok = False  # degenerate draw; try a fresh one
                break
        if ok:
            return U
    raise NumericalError("failed to complete an orthonormal complement basis")


def psd_factor(M: np.ndarray, clip_tol: float | None = None) -> np.ndarray:
    """A factor C with C'C = M for symmetric PSD M, tolerating tiny negatives.

    Eigenvalues in [-clip_tol, 0) are clipped to zero; anything below
    -clip_tol means M is not PSD and the construction is invalid.  The
    default clip_tol is 1e-6 times the spectral radius of M.
    """
    M = np.asarray(M, dtype=float)
    M = (M + M.T) / 2.0
    w, V = linalg.eigh(M)
    scale = np.max(np.abs(w)) if w.size else 0.0
    if clip_tol is None:
        clip_tol = 1e-6 * scale
    if w[0] < -clip_tol:
        raise NumericalError(
            f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e}, "
            f"tolerance {-clip_tol:.3e})"
        )
    w = np.clip(w, 0.0, None)
    return (np.sqrt(w)[:, None]) * V.T


def construct_group_knockoffs(design: GroupedDesign, seed=0,
                              eig_floor: float = EIG_FLOOR) -> KnockoffAugmentation:
    """Construct the equivariant group knockoff matrix for ``design``.

    Requires n >= 2p and an invertible Gram matrix.  Randomness enters only
    through the orthonormal complement and is fixed by ``seed``.
    """
    X = design.X
    n, p = X.shape
    if n < 2 * p:
        raise DataValidationError(
            f"knockoff construction requires n >= 2*p observations, got n={n}, p={p}"
        )
    Sigma = gram(design)
    gamma = shrink_gamma(equivariant_gamma(Sigma, design.groups, eig_floor=eig_floor))
    S = build_s_matrix(Sigma, design.groups, gamma)
    try:
        cho = linalg.cho_factor(Sigma)
    except linalg.LinAlgError as exc:
        raise NumericalError("Gram matrix is not positive definite") from exc
    SigmaInvS = linalg.cho_solve(cho, S)
    M = 2.0 * S - S @ SigmaInvS
    C = psd_factor(M)
    U = orthonormal_complement(X, seed=seed)
    X_tilde = X @ (np.eye(p) - SigmaInvS) + U @ C
    report = verify_knockoff_conditions(X, X_tilde, S, design.groups)
    return KnockoffAugmentation(
        X_tilde=X_tilde, S=S, gamma=gamma, U_tilde=U, C=C, diagnostics=report
    )


def verify_knockoff_conditions(X: np.ndarray, X_tilde: np.ndarray, S: np.ndarray,
                               groups, tol: float = 1e-8) -> ConditionReport:
    """Measure how far (X, X_tilde, S) is from the group knockoff conditions.

    Reports max |X_tilde'X_tilde - Sigma|, max |X_tilde'X - (Sigma - S)|,
    the largest off-block entry of S, and the smallest eigenvalue of S;
    passes iff all are within ``tol`` (min eigenvalue >= -tol).
    """
    X = np.asarray(X, dtype=float)
    X_tilde = np.asarray(X_tilde, dtype=float)
    S = np.asarray(S, dtype=float)
    Sigma = X.T @ X
    Sigma = (Sigma + Sigma.T) / 2.0
    gram_dev = float(np.max(np.abs(X_tilde.T @ X_tilde - Sigma)))
    cross_dev = float(np.max(np.abs(X_tilde.T @ X - (Sigma - S))))
    off = S.copy()
    for g in groups:
        off[np.ix_(g, g)] = 0.0
    max_off = float(np.max(np.abs(off)))
    min_eig = float(linalg.eigvalsh((S + S.T) / 2.0)[0])
    passed = gram_dev <= tol and cross_dev <= tol and max_off <= tol and min_eig >= -tol
    return ConditionReport(
        max_gram_dev=gram_dev,
        max_cross_dev=cross_dev,
        max_off_block=max_off,
        min_eig_s=min_eig,
        tol=tol,
        passed=passed,
    )
