"""Dense matrix-function kernels.

Everything here operates on small dense matrices and is vectorised over
leading "batch" axes, so that e.g. ``expm(T * x[:, None, None])`` evaluates
one exponential per observation in a single call.
"""

from dataclasses import dataclass
import cmath
import math
import warnings

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import InvalidArgumentError, UnsupportedCaseError


@dataclass(frozen=True)
class KernelConfig:
    """Tolerances used by the kernels and the checks built on them."""

    vanloan_tol: float = 1e-8
    ml_exp_tol: float = 1e-10
    stochastic_tol: float = 1e-12
    cond_limit: float = 1e8
    ml_series_radius: float = 5.0


DEFAULT_CONFIG = KernelConfig()


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise InvalidArgumentError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return A


# ---------------------------------------------------------------------------
# matrix exponential
# ---------------------------------------------------------------------------

# Pade(13) coefficients and the 1-norm bound under which it is accurate to
# double precision (Higham, 2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
    16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(A):
    """Matrix exponential by scaling and squaring with a degree-13 Pade
    approximant.

    ``A`` may carry leading batch dimensions; each trailing square matrix is
    scaled by its own power of two.

    >>> expm([[0.0, 1.0], [0.0, 0.0]])
    array([[1., 1.],
           [0., 1.]])
    """
    A = _as_square(A)
    n = A.shape[-1]
    batch = A.shape[:-2]
    A = A.reshape((-1, n, n))

    norms = np.abs(A).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norms / _THETA13))
    s = np.where(np.isfinite(s) & (s > 0), s, 0).astype(int)
    A = A / np.ldexp(1.0, s)[:, None, None]

    b = _PADE13
    ident = np.broadcast_to(np.eye(n), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    R[norms == 0] = np.eye(n)  # exact identity rather than b0 I / b0 I

    # squarings, each matrix only as often as its own scaling requires
    for step in range(int(s.max(initial=0))):
        idx = np.nonzero(s > step)[0]
        R[idx] = R[idx] @ R[idx]
    return R.reshape(batch + (n, n))


# ---------------------------------------------------------------------------
# Kronecker algebra
# ---------------------------------------------------------------------------

def kron_product(A, B):
    return np.kron(_as_square(A), _as_square(B, "B"))


def kron_sum(A, B):
    """Kronecker sum ``A (+) B = A (x) I + I (x) B``."""
    A = _as_square(A)
    B = _as_square(B, "B")
    return np.kron(A, np.eye(B.shape[0])) + np.kron(np.eye(A.shape[0]), B)


def kron_sum_many(mats):
    out = _as_square(mats[0])
    for M in mats[1:]:
        out = kron_sum(out, M)
    return out


# ---------------------------------------------------------------------------
# Van Loan block exponential
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VanLoanResult:
    exp_block: np.ndarray
    integral_block: np.ndarray


def vanloan_integral(T, t, pi_row, y):
    """Return ``exp(T y)`` and ``int_0^y exp(T(y-u)) t pi exp(T u) du``.

    Both come out of a single exponential of the block matrix
    ``[[T, t pi], [0, T]] * y``.  ``y`` may be an array; ``pi_row`` may then
    carry a matching leading axis (one row vector per ``y``).
    """
    T = _as_square(T, "T")
    p = T.shape[0]
    t = np.asarray(t, dtype=float).reshape(p)
    pi_row = np.asarray(pi_row, dtype=float)
    if pi_row.shape[-1] != p:
        raise InvalidArgumentError(
            f"pi_row has length {pi_row.shape[-1]}, expected {p}")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise InvalidArgumentError("y must be finite and nonnegative")

    batch = np.broadcast_shapes(y.shape, pi_row.shape[:-1])
    y = np.broadcast_to(y, batch)
    pi_row = np.broadcast_to(pi_row, batch + (p,))
    M = np.zeros(batch + (2 * p, 2 * p))
    M[..., :p, :p] = T
    M[..., p:, p:] = T
    M[..., :p, p:] = t[:, None] * pi_row[..., None, :]
    E = expm(M * y[..., None, None])
    return VanLoanResult(E[..., :p, :p], E[..., :p, p:])


# ---------------------------------------------------------------------------
# spectral functions
# ---------------------------------------------------------------------------

def _eig_checked(M, cond_limit):
    w, V = np.linalg.eig(M)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > cond_limit:
        raise UnsupportedCaseError(
            f"matrix is (numerically) defective: eigenvector condition {cond:.3g}")
    return w, V


def _is_integer(x):
    return float(x).is_integer()


def real_matrix_power(M, theta, config=DEFAULT_CONFIG):
    """Return ``M ** (-theta)`` for ``M`` with spectrum in the right half plane.

    Integer ``theta`` uses repeated linear solves. Otherwise the principal
    power is taken through an eigendecomposition, which is refused when the
    eigenvector matrix is worse conditioned than ``config.cond_limit``.
    """
    M = _as_square(M, "M")
    theta = float(theta)
    if theta <= -1:
        raise InvalidArgumentError("theta must exceed -1")
    n = M.shape[0]
    if _is_integer(theta):
        out = np.eye(n)
        for _ in range(int(theta)):
            out = np.linalg.solve(M, out)
        return out
    w, V = _eig_checked(M, config.cond_limit)
    if np.any(w.real <= 0):
        raise InvalidArgumentError("eigenvalues of M must have positive real part")
    out = (V * w ** (-theta)) @ np.linalg.inv(V)
    return out.real if np.isrealobj(M) else out


def _ml_series(z, alpha, beta):
    # extra working digits to absorb cancellation between large terms
    kmax_mag = 0.0
    az = abs(z)
    if az > 0:
        ks = np.arange(0, 4000)
        logs = ks * math.log(az) - special.gammaln(alpha * ks + beta)
        kmax_mag = max(0.0, float(np.max(logs)) / math.log(10))
    dps = 25 + int(kmax_mag)
    with mpmath.workdps(dps):
        zz = mpmath.mpc(z)
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        total = mpmath.mpc(0)
        term_pow = mpmath.mpc(1)
        tol = mpmath.mpf(10) ** (-(dps - 2))
        k = 0
        small = 0
        while k < 100000:
            term = term_pow * mpmath.rgamma(a * k + b)
            total += term
            if abs(term) <= tol * max(abs(total), 1):
                small += 1
                if small >= 3 and k * alpha > abs(z) ** (1 / alpha):
                    break
            else:
                small = 0
            term_pow *= zz
            k += 1
        return complex(total)


def _ml_integral(z, alpha, beta):
    """Mittag-Leffler function by inverting its Laplace transform.

    Uses ``E_{a,b}(z) = (1/2 pi i) int exp(s) s^(a-b) / (s^a - z) ds`` with
    the Bromwich line folded onto two rays ``arg s = +-phi`` plus the
    residues of the poles ``s^a = z`` lying between them.
    """
    theta = cmath.phase(z) / alpha  # argument of the pole on the principal sheet
    has_pole = abs(theta) < math.pi
    candidates = np.linspace(0.6, 0.95, 8) * math.pi
    if has_pole:
        phi = float(candidates[np.argmax(np.abs(candidates - abs(theta)))])
    else:
        phi = 0.8 * math.pi

    total = 0j
    if has_pole and abs(theta) < phi:
        sp = abs(z) ** (1 / alpha) * cmath.exp(1j * theta)
        total += cmath.exp(sp) * sp ** (1 - beta) / alpha

    # r = u^(1/alpha) removes the r^(alpha-1) singularity at the origin
    c = math.cos(phi)
    upper = (45.0 / abs(c)) ** alpha
    expo = (1 - beta) / alpha

    def ray(sign):
        e_phi = cmath.exp(1j * sign * phi)
        e_aphi = cmath.exp(1j * sign * alpha * phi)
        e_ab = cmath.exp(1j * sign * (alpha - beta) * phi)

        def f(u):
            if u == 0.0:
                if expo > 0:
                    return 0j
                pw = 1.0
            else:
                pw = u ** expo
            s = u ** (1 / alpha) * e_phi
            return cmath.exp(s) * pw * e_ab * e_phi / (alpha * (u * e_aphi - z))

        pts = [abs(z)] if abs(z) < upper else None
        opts = dict(limit=400, epsabs=1e-15, epsrel=1e-13, points=pts)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            re = integrate.quad(lambda u: f(u).real, 0.0, upper, **opts)[0]
            im = integrate.quad(lambda u: f(u).imag, 0.0, upper, **opts)[0]
        return complex(re, im)

    total += (ray(+1) - ray(-1)) / (2j * math.pi)
    return total


def mittag_leffler(z, alpha, beta=1.0, config=DEFAULT_CONFIG):
    """Scalar two-parameter Mittag-Leffler function ``E_{alpha,beta}(z)``.

    Extended-precision power series for ``|z| <= config.ml_series_radius``,
    contour integral otherwise. Accepts complex ``z``; returns ``complex``.
    """
    if not 0 < alpha <= 1:
        raise InvalidArgumentError("alpha must lie in (0, 1]")
    z = complex(z)
    if abs(z) <= config.ml_series_radius:
        return _ml_series(z, alpha, beta)
    if beta >= 1 + alpha:
        raise UnsupportedCaseError("integral representation needs beta < 1 + alpha")
    return _ml_integral(z, alpha, beta)


def mittag_leffler_matrix(A, alpha, beta=1.0, config=DEFAULT_CONFIG):
    """Matrix Mittag-Leffler function via the spectral decomposition of ``A``."""
    A = _as_square(A)
    if not 0 < alpha <= 1:
        raise InvalidArgumentError("alpha must lie in (0, 1]")
    n = A.shape[0]
    if not np.any(A):
        return np.eye(n) * float(mpmath.rgamma(beta))
    w, V = _eig_checked(A, config.cond_limit)
    fw = np.array([mittag_leffler(z, alpha, beta, config) for z in w])
    out = (V * fw) @ np.linalg.inv(V)
    return out.real
