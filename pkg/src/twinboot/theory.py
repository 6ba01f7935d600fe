"""Closed-form reference values and an independent numerical-Hessian check."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize

from twinboot import _pykernels
from twinboot.problems.two_basin import two_well_potential


class TheoryDomainError(ValueError):
    pass


def sigma_true_gaussian(sigma_data, m):
    """Standard deviation of the mean of ``m`` samples with per-dimension std ``sigma_data``."""
    if sigma_data < 0 or m < 1:
        raise ValueError("need sigma_data >= 0 and m >= 1")
    return sigma_data / math.sqrt(m)


@dataclass(frozen=True)
class Curvature:
    epsilon: float
    lambda_perp: float
    lambda_par: float
    S: float


def curvature_correction(d, sigma_well):
    """Principal curvatures of the two-well potential at a well centre and the factor S."""
    if not sigma_well > 0:
        raise ValueError("sigma_well must be positive")
    s2 = sigma_well * sigma_well
    eps = math.exp(-d * d / (2.0 * s2))
    lam_perp = (1.0 + eps) / s2
    lam_par = (1.0 + eps) / s2 - eps * d * d / (s2 * s2)
    if lam_par <= 0:
        raise TheoryDomainError(
            f"wells merge: lambda_par = {lam_par:.6g} <= 0 for d={d}, sigma_well={sigma_well}"
        )
    S = math.sqrt(0.5 * (1.0 / lam_perp + 1.0 / lam_par))
    return Curvature(eps, lam_perp, lam_par, S)


def sigma_theory_two_basin(d, sigma_well, sigma_data, m):
    """Curvature-corrected single-well reference ``S * sigma_data / sqrt(m)``."""
    return curvature_correction(d, sigma_well).S * sigma_data / math.sqrt(m)


def estimator_variance(tau_sq, kind="two-sample", n=None):
    """Variance of the variance estimators for Gaussian draws with variance ``tau_sq``.

    kind ``two-sample``: ``2 tau^4``; ``b-sample`` (``n`` = B draws, unbiased
    sample variance): ``2 tau^4 / (B - 1)``; ``grouped`` (``n`` = group size):
    ``2 tau^4 / D``.
    """
    if tau_sq < 0:
        raise ValueError("tau_sq must be non-negative")
    t4 = 2.0 * tau_sq * tau_sq
    if kind == "two-sample":
        return t4
    if kind == "b-sample":
        if n is None or n < 2:
            raise ValueError("B-sample estimator needs B >= 2")
        return t4 / (n - 1)
    if kind == "grouped":
        if n is None or n < 1:
            raise ValueError("grouped estimator needs D >= 1")
        return t4 / n
    raise ValueError(f"unknown estimator kind {kind!r}")


def numerical_hessian(f, x, h=1e-5):
    """Central-difference Hessian of scalar ``f`` at ``x``, symmetrised."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    H = np.empty((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        for j in range(i, n):
            fpp = f(x + eye[i] + eye[j])
            fpm = f(x + eye[i] - eye[j])
            fmp = f(x - eye[i] + eye[j])
            fmm = f(x - eye[i] - eye[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h * h)
    return H


def hessian_from_gradient(grad, x, h=1e-5):
    """Central differences of an analytic gradient, symmetrised."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def hessian_S(d, sigma_well, at="center", h=1e-5, method="gradient"):
    """S from finite-difference curvatures of the two-well potential.

    ``at="center"`` evaluates at the well centre ``(-d/2, 0)``; ``at="minimum"``
    evaluates at the numerically located minimum reached from that centre.
    ``method="gradient"`` differences the analytic gradient, ``"value"``
    differences the potential itself (less accurate, ~1e-7).
    Returns ``(S, point, eigenvalues)``; S is ``inf`` when an eigenvalue is
    not positive.
    """
    mu1 = np.array([-d / 2.0, 0.0])
    mu2 = np.array([d / 2.0, 0.0])
    zero = np.zeros((1, 2))

    def f(w):
        return float(two_well_potential(w, mu1, mu2, sigma_well))

    def grad(w):
        return _pykernels.two_well_loss_grad(np.asarray(w, dtype=np.float64), zero,
                                             mu1, mu2, sigma_well)[1]

    point = mu1
    if at == "minimum":
        res = minimize(f, mu1, jac=grad, method="BFGS", options={"gtol": 1e-13})
        point = res.x
    elif at != "center":
        raise ValueError("at must be 'center' or 'minimum'")
    if method == "gradient":
        H = hessian_from_gradient(grad, point, h)
    elif method == "value":
        H = numerical_hessian(f, point, h)
    else:
        raise ValueError("method must be 'gradient' or 'value'")
    eig = np.linalg.eigvalsh(H)
    if np.any(eig <= 0):
        return math.inf, point, eig
    return math.sqrt(0.5 * float(np.sum(1.0 / eig))), point, eig
