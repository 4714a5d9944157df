"""Equilibria, spectral classification, stochastic stability and persistence.

The deterministic system has three candidate equilibrium branches:

* the trivial state ``(0, 0, 0, 0)``, always an equilibrium;
* a no-import branch with ``X3* = 0``, where ``X1*`` solves a scalar
  equation on ``(0, N)`` and the remaining components follow in closed
  form;
* an import-threshold branch pinned at ``X1* = s3/s2``, where
  eliminating ``X2`` reduces the problem to one quadratic in ``X3``.

On every branch ``X4* = (d1/d2) * X1*`` (renewables balance build-up
against depreciation).

Stochastic stability near an equilibrium is assessed with a matrix
inequality: given symmetric positive-definite ``P`` and noise matrix
``Sigma = diag(sigma_i^2)``, the test asks for the largest ``alpha``
with ``J'P + PJ + P*Sigma*P <= -alpha*P``.  With the default ``P = I``
this reduces to negative definiteness of ``J' + J + Sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericFailureError
from .model import ModelParams, NoiseIntensities, _drift_raw, jacobian, validate_params

BRANCH_TRIVIAL = "trivial"
BRANCH_NO_IMPORT = "no-import"
BRANCH_IMPORT_THRESHOLD = "import-threshold"

#: Spectral stability threshold: real parts in [-MARGINAL_TOL, MARGINAL_TOL]
#: are classified as marginal rather than misread as decisive zeros.
MARGINAL_TOL = 1e-12

_SCAN_POINTS = 1000
_BISECT_TOL = 1e-12
_MAX_BISECT_ITER = 200


@dataclass(frozen=True)
class Equilibrium:
    """One equilibrium branch result.

    ``point`` is meaningful only when ``feasible`` is true, except on the
    import-threshold branch where the pinned components (X1*, X4*) are
    reported even for infeasible records.
    """

    point: np.ndarray
    branch: str
    feasible: bool
    infeasibility_reason: str | None = None


@dataclass(frozen=True)
class StabilityReport:
    """Spectral and matrix-inequality verdicts at an equilibrium."""

    eigenvalues: np.ndarray          # 4 complex numbers
    spectrally_stable: bool          # all real parts < -MARGINAL_TOL
    marginal: bool                   # max real part within +/- MARGINAL_TOL
    lmi_feasible: bool
    alpha: float | None              # decay constant; present iff lmi_feasible
    decay_rate_bound: float | None   # alpha / (2 * lambda_max(P))


@dataclass(frozen=True)
class PersistenceSpec:
    """Weights and constants of the persistence-in-mean hypothesis.

    ``c`` holds four strictly positive weights, ``eta`` the drift lower
    bound (1/year) and ``kappa`` the crowding constant (1/(GW*year)).
    """

    c: tuple[float, float, float, float]
    eta: float
    kappa: float

    def __post_init__(self):
        if len(self.c) != 4 or any(not np.isfinite(ci) or ci <= 0 for ci in self.c):
            raise InvalidInputError(f"weights c must be 4 positive numbers, got {self.c}")
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise InvalidInputError(f"eta must be positive, got {self.eta}")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise InvalidInputError(f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class PersistenceBound:
    """Result of the persistence lower-bound arithmetic.

    ``status`` is one of:

    * ``"bounded"`` -- the noise condition holds and kappa > 0; ``bound``
      carries the long-run lower bound on the weighted time average.
    * ``"condition-failed"`` -- eta does not dominate the noise load
      ``0.5 * sum(c_i * sigma_i^2)``; no conclusion.
    * ``"unbounded"`` -- kappa = 0, so the hypothesis yields no finite
      bound even though the noise condition holds.
    """

    status: str
    noise_load: float
    bound: float | None = None


@dataclass(frozen=True)
class DriftConditionReport:
    """Empirical spot-check of the persistence drift hypothesis on a box.

    A negative ``min_margin`` falsifies the hypothesis at ``argmin``;
    a positive one is evidence only (the hypothesis quantifies over the
    whole positive orthant, which a finite grid cannot certify).
    """

    min_margin: float
    argmin: np.ndarray
    grid_density: int
    box: tuple[tuple[float, float], ...]


def _require_valid(params: ModelParams) -> None:
    report = validate_params(params)
    if not report.ok:
        raise InvalidInputError("; ".join(report.violations))


def _no_import_g(params: ModelParams, x1):
    """Scalar residual whose roots on (0, N) give the no-import X1*."""
    p = params
    ratio = p.z3 / p.z1
    return (p.a1 * (1.0 - x1 / p.W)
            - p.a2 * ratio * ratio * x1 * (p.N - x1) ** 2
            - p.d3 * p.d1 / p.d2)


def _bisect(fn, lo, hi, flo):
    """Plain bisection to |fn| < _BISECT_TOL inside a bracketing interval."""
    for _ in range(_MAX_BISECT_ITER):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if abs(fmid) < _BISECT_TOL or (hi - lo) < 4.0 * np.spacing(abs(mid) + 1.0):
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_equilibria(params: ModelParams) -> list[Equilibrium]:
    """All equilibrium branches: trivial, no-import, import-threshold.

    Returns one record per branch (more if a branch has several roots).
    Infeasible branches are reported with a reason rather than raised,
    so the result always covers all three branches.
    """
    _require_valid(params)
    p = params
    results = [Equilibrium(np.zeros(4), BRANCH_TRIVIAL, True)]
    results.extend(_no_import_branch(p))
    results.extend(_import_threshold_branch(p))
    return results


def _no_import_branch(p: ModelParams) -> list[Equilibrium]:
    """X3* = 0 branch: bracket roots of the scalar residual on (0, N)."""
    grid = np.linspace(0.0, p.N, _SCAN_POINTS + 1)[1:-1]
    vals = _no_import_g(p, grid)
    roots = []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(grid[i])
        elif (a < 0) != (b < 0):
            roots.append(_bisect(lambda x: _no_import_g(p, x), grid[i], grid[i + 1], a))
    if vals[-1] == 0.0:
        roots.append(grid[-1])

    out = []
    for x1 in roots:
        x2 = p.z3 / p.z1 * x1 * (p.N - x1)
        x4 = p.d1 / p.d2 * x1
        point = np.array([x1, x2, 0.0, x4])
        if x2 <= 0 or x4 <= 0:
            out.append(Equilibrium(point, BRANCH_NO_IMPORT, False,
                                   "root yields a nonpositive component"))
        else:
            out.append(Equilibrium(point, BRANCH_NO_IMPORT, True))
    if not out:
        out.append(Equilibrium(
            np.full(4, np.nan), BRANCH_NO_IMPORT, False,
            f"no sign change of the scalar residual on (0, {p.N:g}) "
            f"({_SCAN_POINTS}-point scan)"))
    return out


def _import_threshold_branch(p: ModelParams) -> list[Equilibrium]:
    """X1* = s3/s2 branch: eliminate X2 linearly, solve a quadratic in X3.

    With X1 pinned, the supply balance gives X2 = A + B*X3 where
    A = z3*X1*(N - X1)/z1 and B = (z3*X1 - z2)/z1.  Substituting into
    the demand balance yields

        B*(B+1)*X3^2 + A*(2B+1)*X3 + (A^2 - C0/a2) = 0,

    with C0 the X2-free part of the demand equation.
    """
    x1 = p.s3 / p.s2
    x4 = p.d1 / p.d2 * x1
    pinned = np.array([x1, np.nan, np.nan, x4])

    if p.N <= x1:
        return [Equilibrium(pinned, BRANCH_IMPORT_THRESHOLD, False,
                            f"requires N > s3/s2 (N={p.N:g}, s3/s2={x1:.6g})")]

    a = p.z3 * x1 * (p.N - x1) / p.z1
    b = (p.z3 * x1 - p.z2) / p.z1
    c0 = p.a1 * x1 * (1.0 - x1 / p.W) - p.d3 * x4
    # Coefficients of the monic-scaled quadratic in X3.
    qa = b * (b + 1.0)
    qb = a * (2.0 * b + 1.0)
    qc = a * a - c0 / p.a2

    roots = _stable_quadratic_roots(qa, qb, qc)
    if roots is None:
        disc = qb * qb - 4.0 * qa * qc
        return [Equilibrium(pinned, BRANCH_IMPORT_THRESHOLD, False,
                            f"quadratic in X3 has negative discriminant ({disc:.6g})")]

    out = []
    for x3 in roots:
        x2 = a + b * x3
        if x3 > 0 and x2 > 0:
            out.append(Equilibrium(np.array([x1, x2, x3, x4]),
                                   BRANCH_IMPORT_THRESHOLD, True))
    if not out:
        out.append(Equilibrium(pinned, BRANCH_IMPORT_THRESHOLD, False,
                               f"no root with X2 > 0 and X3 > 0 (roots {roots})"))
    return out


def _stable_quadratic_roots(qa, qb, qc):
    """Real roots of qa*x^2 + qb*x + qc = 0, or None if there are none.

    Uses the q = -(b + sign(b)*sqrt(disc))/2 formulation to avoid
    cancellation; degenerates gracefully to the linear case qa == 0.
    """
    if qa == 0.0:
        if qb == 0.0:
            return None
        return [-qc / qb]
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return None
    sq = np.sqrt(disc)
    q = -0.5 * (qb + np.copysign(sq, qb)) if qb != 0.0 else 0.5 * sq
    r1 = q / qa
    r2 = qc / q if q != 0.0 else 0.0
    return [r1, r2]


def eigenvalues_4x4(m) -> np.ndarray:
    """Eigenvalues of a 4x4 real matrix, in no guaranteed order.

    Delegates to LAPACK's iterative QR reduction; a convergence failure
    surfaces as NumericFailureError.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.shape != (4, 4):
        raise InvalidInputError(f"expected a 4x4 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix has non-finite entries")
    try:
        return np.linalg.eigvals(arr)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(f"eigenvalue iteration failed: {exc}") from exc


def _check_spd(p_mat: np.ndarray) -> np.ndarray:
    """Validate symmetric positive definiteness; return eigenvalues of P."""
    if p_mat.shape != (4, 4) or not np.all(np.isfinite(p_mat)):
        raise InvalidInputError("P must be a finite 4x4 matrix")
    scale = np.linalg.norm(p_mat)
    if np.linalg.norm(p_mat - p_mat.T) > 1e-10 * max(scale, 1.0):
        raise InvalidInputError("P must be symmetric")
    evals = np.linalg.eigvalsh(p_mat)
    if evals[0] <= 0:
        raise InvalidInputError(f"P must be positive definite (min eigenvalue {evals[0]:.3g})")
    return evals


def classify_equilibrium(params: ModelParams,
                         eq: Equilibrium,
                         noise: NoiseIntensities,
                         P: np.ndarray | None = None) -> StabilityReport:
    """Spectral and matrix-inequality stability verdicts at ``eq``.

    The spectral verdict uses the Jacobian eigenvalues at the point.
    The matrix-inequality verdict tests, for the supplied ``P`` (default
    identity), whether M = P^(-1/2) (J'P + PJ + P*Sigma*P) P^(-1/2) is
    negative definite; then alpha = -lambda_max(M) and the almost-sure
    decay rate is bounded by alpha / (2*lambda_max(P)).

    No search over P is performed: the caller supplies one candidate.
    """
    if not eq.feasible:
        raise InvalidInputError(f"cannot classify infeasible equilibrium ({eq.branch})")
    _require_valid(params)

    j = jacobian(eq.point, params)
    eigs = eigenvalues_4x4(j)
    max_re = float(np.max(eigs.real))
    spectrally_stable = max_re < -MARGINAL_TOL
    marginal = abs(max_re) <= MARGINAL_TOL

    if P is None:
        P = np.eye(4)
    else:
        P = np.asarray(P, dtype=np.float64)
    p_evals = _check_spd(P)

    sig2 = noise.as_array() ** 2
    sigma_mat = np.diag(sig2)
    lhs = j.T @ P + P @ j + P @ sigma_mat @ P
    p_inv_sqrt = _symmetric_inverse_sqrt(P)
    m = p_inv_sqrt @ lhs @ p_inv_sqrt
    # Symmetrize before eigvalsh: m is symmetric up to rounding.
    m = 0.5 * (m + m.T)
    lam_max = float(np.linalg.eigvalsh(m)[-1])

    lmi_feasible = lam_max < 0.0
    alpha = -lam_max if lmi_feasible else None
    decay = alpha / (2.0 * float(p_evals[-1])) if lmi_feasible else None
    return StabilityReport(eigenvalues=eigs,
                           spectrally_stable=spectrally_stable,
                           marginal=marginal,
                           lmi_feasible=lmi_feasible,
                           alpha=alpha,
                           decay_rate_bound=decay)


def _symmetric_inverse_sqrt(p_mat: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(p_mat)
    return vecs @ np.diag(1.0 / np.sqrt(evals)) @ vecs.T


def persistence_bound(spec: PersistenceSpec,
                      noise: NoiseIntensities) -> PersistenceBound:
    """Long-run lower bound on the weighted time-averaged state mean.

    The bound ``(eta - 0.5*sum(c_i*sigma_i^2)) / kappa`` applies when the
    noise load does not exceed eta and kappa is strictly positive.
    """
    c = np.asarray(spec.c, dtype=np.float64)
    noise_load = 0.5 * float(np.sum(c * noise.as_array() ** 2))
    if spec.eta < noise_load:
        return PersistenceBound(status="condition-failed", noise_load=noise_load)
    if spec.kappa == 0.0:
        return PersistenceBound(status="unbounded", noise_load=noise_load)
    bound = (spec.eta - noise_load) / spec.kappa
    return PersistenceBound(status="bounded", noise_load=noise_load, bound=bound)


def check_persistence_drift_condition(params: ModelParams,
                                      spec: PersistenceSpec,
                                      box,
                                      n: int = 12) -> DriftConditionReport:
    """Evaluate the persistence drift hypothesis on an n^4 grid over ``box``.

    The margin at X is  sum_i c_i*f_i(X)/X_i - eta + kappa*sum_i X_i;
    the report carries the grid minimum and its location.  This is a
    falsification tool: a negative minimum disproves the hypothesis on
    the box, a positive one proves nothing beyond the sampled points.
    """
    _require_valid(params)
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != 4:
        raise InvalidInputError("box must give (lo, hi) for each of the 4 components")
    for lo, hi in box:
        if not (0.0 < lo <= hi) or not np.isfinite(hi):
            raise InvalidInputError(
                f"box must be strictly positive and ordered, got ({lo}, {hi})")
    if n < 1:
        raise InvalidInputError("grid density n must be >= 1")

    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    grids = np.meshgrid(*axes, indexing="ij")
    x1, x2, x3, x4 = (g.ravel() for g in grids)
    p = params
    f1 = p.a1 * x1 * (1.0 - x1 / p.W) - p.a2 * x2 * (x2 + x3) - p.d3 * x4
    f2 = -p.z1 * x2 - p.z2 * x3 + p.z3 * x1 * (p.N - (x1 - x3))
    f3 = p.s1 * x3 * (p.s2 * x1 - p.s3)
    f4 = p.d1 * x1 - p.d2 * x4
    c1, c2, c3, c4 = spec.c
    margin = (c1 * f1 / x1 + c2 * f2 / x2 + c3 * f3 / x3 + c4 * f4 / x4
              - spec.eta + spec.kappa * (x1 + x2 + x3 + x4))
    idx = int(np.argmin(margin))
    argmin = np.array([x1[idx], x2[idx], x3[idx], x4[idx]])
    return DriftConditionReport(min_margin=float(margin[idx]),
                                argmin=argmin,
                                grid_density=n,
                                box=box)


def equilibrium_residual(eq: Equilibrium, params: ModelParams) -> float:
    """Max-norm of the drift at an equilibrium point (0 for exact roots)."""
    if not np.all(np.isfinite(eq.point)):
        return float("nan")
    return float(np.max(np.abs(_drift_raw(eq.point, params))))
