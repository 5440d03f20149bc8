import numpy as np

from groupknockoff.design import new_grouped_design, normalize_columns
from groupknockoff.simulation import _covariance_sqrt, within_between_covariance


def make_design(n, p, m, rho=0.0, gamma_factor=0.0, seed=0):
    """Random normalized grouped design with equal group sizes."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(m), p // m)
    Z = rng.standard_normal((n, p))
    if rho > 0.0:
        Sigma = within_between_covariance(p, labels, rho, gamma_factor)
        Z = Z @ _covariance_sqrt(Sigma).T
    return normalize_columns(new_grouped_design(Z, labels))


def random_orthogonal(n, seed=0):
    """Haar-ish orthogonal matrix from the QR of a Gaussian draw."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))
