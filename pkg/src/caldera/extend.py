"""Dominated extension of a rank-one prescription to a full linear lift.

Given a positive operator T carrying alpha*|f|^p onto |g|^p, the map
H(h) = (T(alpha*|h|^p))^(1/p) is a sublinear majorant with H(f) = |g|.
Each output coordinate prescribes a rank-one constraint l(f) = g_i with
|l(h)| <= H_i(h); two independent constructions extend it to a linear
functional: a closed form that saturates Holder's inequality, and a greedy
basis-by-basis extension that solves for a feasible interval at every new
direction.  Stacking the rows yields L with Lf = g and |Lh| <= H(h), which
pins the operator norm on both convexified spaces at 2^(1-1/p) when
alpha = 2^(p-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalFailure
from .kfunc import default_t_grid, profile
from .lattice import (
    INF,
    Couple,
    LatticeVector,
    convexify_couple,
    is_l1_linf,
    norm_values,
    vector,
)
from .majorize import MatrixOperator, construct_positive_operator

ENDPOINT_TOL = 1e-9
ENDPOINT_MAX_ITER = 10_000
DEGENERATE_SET_TOL = 1e-10
INTERVAL_EMPTY_TOL = 1e-7
ROW_RESCALE_TOL = 1e-8
RESIDUAL_BUDGET = 1e-8
DOMINATION_SLACK = 1e-9


def default_alpha(p: float) -> float:
    return 2.0 ** (p - 1.0)


@dataclass(frozen=True)
class SublinearMajorant:
    """Componentwise map h -> (T(alpha*|h|^p))^(1/p) for a positive T."""

    operator: MatrixOperator
    alpha: float
    p: float

    def __post_init__(self):
        if not self.operator.positive:
            raise DomainError("majorant requires a positive operator")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise DomainError("alpha must be a positive real")
        if not (1.0 < self.p < INF):
            raise DomainError("exponent must lie in (1, inf)")

    def row_weights(self, i: int) -> np.ndarray:
        return self.alpha * self.operator.entries[i]


def apply_majorant(majorant: SublinearMajorant, h) -> LatticeVector:
    space = majorant.operator.space
    hv = np.asarray(h, dtype=float)
    powered = majorant.alpha * np.abs(hv) ** majorant.p
    out = majorant.operator.apply(powered) ** (1.0 / majorant.p)
    return vector(space, out)


def _apply_majorant_rows(majorant: SublinearMajorant, rows: np.ndarray) -> np.ndarray:
    powered = majorant.alpha * np.abs(rows) ** majorant.p
    return (powered @ majorant.operator.entries.T) ** (1.0 / majorant.p)


# ---------------------------------------------------------------------------
# property audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyReport:
    ok: bool
    checked: int
    violations: tuple

    def __bool__(self) -> bool:  # pragma: no cover - convenience
        return self.ok


def check_minkowski(
    operator: MatrixOperator, h1, h2, p: float, abs_tol: float = 1e-12
) -> PropertyReport:
    """Componentwise (G|h1+h2|^p)^(1/p) <= (G|h1|^p)^(1/p) + (G|h2|^p)^(1/p)."""
    if not operator.positive:
        raise DomainError("positivity of the operator is required")
    if not (1.0 < p < INF):
        raise DomainError("exponent must lie in (1, inf)")
    a = np.asarray(h1, dtype=float)
    b = np.asarray(h2, dtype=float)
    lhs = operator.apply(np.abs(a + b) ** p) ** (1.0 / p)
    rhs = operator.apply(np.abs(a) ** p) ** (1.0 / p) + operator.apply(
        np.abs(b) ** p
    ) ** (1.0 / p)
    excess = lhs - rhs
    bad = np.flatnonzero(excess > abs_tol)
    violations = tuple((int(i), float(excess[i])) for i in bad)
    return PropertyReport(ok=not violations, checked=a.size, violations=violations)


def check_sublinear(
    majorant: SublinearMajorant,
    sample_count: int = 10_000,
    seed: int = 0,
    rel_tol: float = 1e-12,
    abs_tol: float = 1e-12,
) -> PropertyReport:
    """Sampled homogeneity H(c h) = |c| H(h) and subadditivity of H."""
    n = majorant.operator.space.n
    rng = np.random.Generator(np.random.Philox(key=seed))
    signs = rng.choice([-1.0, 1.0], size=(sample_count, 2 * n))
    mags = 10.0 ** rng.uniform(-2.0, 2.0, size=(sample_count, 2 * n))
    h1 = signs[:, :n] * mags[:, :n]
    h2 = signs[:, n:] * mags[:, n:]
    scal = rng.choice([-1.0, 1.0], size=sample_count) * 10.0 ** rng.uniform(
        -2.0, 2.0, size=sample_count
    )

    base = _apply_majorant_rows(majorant, h1)
    scaled = _apply_majorant_rows(majorant, scal[:, None] * h1)
    hom_err = np.abs(scaled - np.abs(scal)[:, None] * base)
    hom_bad = hom_err > rel_tol * np.maximum(scaled, 1e-300)

    together = _apply_majorant_rows(majorant, h1 + h2)
    apart = base + _apply_majorant_rows(majorant, h2)
    sub_bad = together - apart > abs_tol

    bad_rows = np.flatnonzero(np.any(hom_bad | sub_bad, axis=1))
    violations = tuple(int(i) for i in bad_rows[:32])
    return PropertyReport(
        ok=not violations, checked=sample_count, violations=violations
    )


# ---------------------------------------------------------------------------
# row extensions
# ---------------------------------------------------------------------------


def _row_feasible_target(g_i: float, attainable: float, slack: float) -> float:
    """Clamp the prescription onto the feasible ball, erroring past slack."""
    mag = abs(g_i)
    if mag <= attainable:
        return g_i
    if attainable == 0.0:
        raise DomainError("cannot dominate a nonzero value with a null row")
    if mag > attainable + slack + 1e-12 * attainable:
        raise DomainError(
            f"prescribed value {g_i:.6g} exceeds the attainable bound "
            f"{attainable:.6g} beyond tolerance"
        )
    return math.copysign(attainable, g_i)


def holder_extension_row(
    majorant: SublinearMajorant, f, g_i: float, i: int, slack: float = 0.0
) -> np.ndarray:
    """Closed-form dominated row: the functional saturating Holder at f."""
    fv = np.asarray(f, dtype=float)
    n = majorant.operator.space.n
    if fv.shape != (n,):
        raise DomainError("vector length does not match the operator space")
    if g_i == 0.0:
        return np.zeros(n)
    w = majorant.row_weights(i)
    p = majorant.p
    denom = float(np.sum(w * np.abs(fv) ** p))
    attainable = denom ** (1.0 / p)
    target = _row_feasible_target(float(g_i), attainable, slack)
    return target * w * np.abs(fv) ** (p - 1.0) * np.sign(fv) / denom


def _seminorm(w: np.ndarray, x: np.ndarray, p: float) -> float:
    return float(np.sum(w * np.abs(x) ** p)) ** (1.0 / p)


def _dual_seminorm(w: np.ndarray, ell: np.ndarray, p: float) -> float:
    q = p / (p - 1.0)
    return float(np.sum(w ** (-q / p) * np.abs(ell) ** q)) ** (1.0 / q)


def _gauge_min(
    zeta0: np.ndarray,
    N: np.ndarray,
    a: np.ndarray,
    qd: float,
    lam: float,
    d: np.ndarray,
    u0: np.ndarray,
):
    """Minimize lam * sum(a|zeta0 + Nu|^qd) - d.u by damped Newton steps.

    Coercive for lam > 0, so the minimum is attained and any descent
    sequence converges into it; the curvature diagonal can blow up at zero
    coordinates when qd < 2 and is clipped, which only shortens steps.
    """
    u = u0.copy()
    zeta = zeta0 + N @ u
    gval = float(np.sum(a * np.abs(zeta) ** qd))
    fval = lam * gval - float(d @ u)
    damp = 1e-10
    flat = 0
    for _ in range(ENDPOINT_MAX_ITER):
        az = np.abs(zeta)
        gz = a * qd * np.sign(zeta) * az ** (qd - 1.0)
        grad = lam * (N.T @ gz) - d
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= 1e-12 * (1.0 + abs(fval)) + 1e-300:
            break
        with np.errstate(divide="ignore", over="ignore"):
            hd = a * qd * (qd - 1.0) * az ** (qd - 2.0)
        cap = 1e12 * max(1.0, float(np.max(hd, initial=0.0, where=np.isfinite(hd))))
        hd = np.where(np.isfinite(hd), hd, cap)
        hess = lam * (N.T @ (hd[:, None] * N))
        direction = None
        try:
            direction = -np.linalg.solve(
                hess + damp * np.eye(u.size), grad
            )
        except np.linalg.LinAlgError:
            direction = None
        if direction is None or float(grad @ direction) >= 0.0:
            direction = -grad
        slope = float(grad @ direction)
        step = 1.0
        accepted = False
        for _ in range(120):
            u_new = u + step * direction
            zeta_new = zeta0 + N @ u_new
            g_new = float(np.sum(a * np.abs(zeta_new) ** qd))
            f_new = lam * g_new - float(d @ u_new)
            if f_new <= fval + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            damp *= 10.0
            if damp > 1e10:
                break
            continue
        damp = max(damp * 0.3, 1e-10)
        if fval - f_new <= 1e-15 * (1.0 + abs(fval)):
            flat += 1
        else:
            flat = 0
        u, zeta, gval, fval = u_new, zeta_new, g_new, f_new
        if flat >= 3:
            break
    return u, gval


def _support_value(zeta0, N, a, qd, d, u_center, g_center):
    """Largest d.u over the slice of the dual unit ball, from inside.

    Walks the Lagrange multiplier of the gauge constraint: u(lam) minimizes
    lam*g - d.u and g(u(lam)) decreases in lam, so a log-scale bisection
    pins the active boundary.  Only gauge-feasible iterates contribute, so
    the returned value never overshoots the true support value.
    """
    best = float(d @ u_center)
    lam, u = 1.0, u_center
    lam_lo = None
    lam_hi = None
    for _ in range(40):
        u, g_u = _gauge_min(zeta0, N, a, qd, lam, d, u)
        if g_u > 1.0:
            lam_lo = lam
            lam *= 16.0
        else:
            lam_hi = (lam, u)
            break
        if lam > 1e14:
            break
    if lam_hi is None:
        # constraint numerically saturated everywhere: the slice touches the
        # ball in (almost) one point, already summarized by the center
        return best
    best = max(best, float(d @ lam_hi[1]))
    if lam_lo is None:
        lam = lam_hi[0]
        u = lam_hi[1]
        for _ in range(40):
            lam /= 16.0
            if lam < 1e-14:
                break
            u, g_u = _gauge_min(zeta0, N, a, qd, lam, d, u)
            if g_u > 1.0:
                lam_lo = lam
                break
            best = max(best, float(d @ u))
        if lam_lo is None:
            return best
    lo, (hi, u) = lam_lo, lam_hi
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        u, g_u = _gauge_min(zeta0, N, a, qd, mid, d, u)
        if g_u > 1.0:
            lo = mid
        else:
            hi = mid
            best = max(best, float(d @ u))
        if hi / lo < 1.0 + 1e-12:
            break
    return best


def _dual_interval(
    V: np.ndarray, z: np.ndarray, vals: np.ndarray, w: np.ndarray, p: float
):
    """Feasible range for the next value: <zeta, z> over dominated zeta.

    The functionals that agree with the current prescription on span(V) and
    respect the seminorm form a compact convex set; its image under z is
    exactly the interval of admissible extensions.  Both endpoints reported
    here come from explicitly feasible functionals, so any point between
    them keeps the construction dominated; solver error narrows the bracket
    but cannot poison it.
    """
    m, j = V.shape
    qd = p / (p - 1.0)
    a = w ** (-qd / p)
    zeta0, *_ = np.linalg.lstsq(V.T, vals, rcond=None)
    if j >= m:
        val = float(z @ zeta0)
        return val, val, float(np.sum(a * np.abs(zeta0) ** qd))
    U = np.linalg.svd(V, full_matrices=True)[0]
    N = U[:, j:]
    u_c, g_c = _gauge_min(
        zeta0, N, a, qd, 1.0, np.zeros(m - j), np.zeros(m - j)
    )
    base = float(z @ (zeta0 + N @ u_c))
    d0 = N.T @ z
    if g_c >= 1.0 - DEGENERATE_SET_TOL or float(np.linalg.norm(d0)) <= 1e-14 * float(
        np.linalg.norm(z)
    ):
        return base, base, g_c
    off = float(z @ zeta0)
    hi = off + _support_value(zeta0, N, a, qd, d0, u_c, g_c)
    lo = off - _support_value(zeta0, N, a, qd, -d0, u_c, g_c)
    return min(lo, hi), max(lo, hi), g_c


def greedy_hb_extension_row(
    majorant: SublinearMajorant, f, g_i: float, i: int, slack: float = 0.0
) -> np.ndarray:
    """Dominated row built by extending over a basis one direction at a time.

    Starting from l(f) = g_i on the line through f, each new direction z gets
    the midpoint of its feasible interval
    [sup_y(l(y) - q(y - z)), inf_y(q(y + z) - l(y))].  A dual-norm evaluation
    at the end certifies |l(h)| <= q(h); mild overshoot is scaled away.
    """
    fv = np.asarray(f, dtype=float)
    n = majorant.operator.space.n
    if fv.shape != (n,):
        raise DomainError("vector length does not match the operator space")
    if g_i == 0.0:
        return np.zeros(n)
    p = majorant.p
    w_full = majorant.row_weights(i)
    sup = np.flatnonzero(w_full > 0.0)
    # off the row support the seminorm vanishes, forcing those entries to 0
    if sup.size == 0:
        raise DomainError("cannot dominate a nonzero value with a null row")
    w = w_full[sup]
    fs = fv[sup]
    attainable = _seminorm(w, fs, p)
    target = _row_feasible_target(float(g_i), attainable, slack)

    m = sup.size
    basis = [fs]
    values = [target]
    if m > 1:
        anchor = int(np.argmax(np.abs(fs)))
        ortho = [fs / float(np.linalg.norm(fs))]
        for j in range(m):
            if j == anchor:
                continue
            v = np.zeros(m)
            v[j] = 1.0
            for u in ortho:
                v -= float(u @ v) * u
            v -= sum(float(u @ v) * u for u in ortho)  # second pass for stability
            nv = float(np.linalg.norm(v))
            if nv <= 1e-12:
                raise NumericalFailure(
                    f"row {i}: basis completion degenerated at direction {j}"
                )
            v /= nv
            ortho.append(v)
            z = v
            V = np.stack(basis, axis=1)
            vals = np.asarray(values)
            qz = _seminorm(w, z, p)
            lower, upper, gauge = _dual_interval(V, z, vals, w, p)
            if gauge > 1.0 + INTERVAL_EMPTY_TOL:
                raise NumericalFailure(
                    f"row {i}: feasible interval came up empty at direction {j}",
                    gap=gauge - 1.0,
                )
            lower = max(lower, -qz)
            upper = min(upper, qz)
            if lower > upper:
                lower = upper = 0.5 * (lower + upper)
            basis.append(z)
            values.append(0.5 * (lower + upper))
    V = np.stack(basis, axis=1)
    ell_s = np.linalg.solve(V.T, np.asarray(values))
    rho = _dual_seminorm(w, ell_s, p)
    if rho > 1.0 + ROW_RESCALE_TOL:
        raise NumericalFailure(
            f"row {i}: domination certificate failed with dual norm {rho:.12g}",
            best_value=rho,
            gap=rho - 1.0,
        )
    if rho > 1.0:
        ell_s = ell_s / rho
    ell = np.zeros(n)
    ell[sup] = ell_s
    return ell


# ---------------------------------------------------------------------------
# lift pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LiftResult:
    operator: MatrixOperator
    majorant: SublinearMajorant
    method: str
    alpha: float
    p: float
    residual_lf_g: float
    domination_violations: int
    norm_sample_ratios: tuple
    audit_samples: int
    audit_seed: int


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    residual_lf_g: float
    domination_violations: int
    norm_sample_ratios: tuple
    norm_bound: float
    samples: int
    seed: int


def _require_k_ordering(conv: Couple, f: np.ndarray, g: np.ndarray) -> None:
    ts = default_t_grid()
    prof_f = profile("K", conv, f, ts)
    prof_g = profile("K", conv, g, ts)
    tol = 1e-9 * np.maximum(prof_f.values, 1e-300) + prof_f.gaps + prof_g.gaps
    bad = np.flatnonzero(prof_g.values > prof_f.values + tol)
    if bad.size:
        t = float(ts[bad[0]])
        raise DomainError(
            f"pair is not ordered on the convexified couple: at t={t:.6g} the "
            f"second profile exceeds the first"
        )


def _audit_lift(
    operator: MatrixOperator,
    majorant: SublinearMajorant,
    f: np.ndarray,
    g: np.ndarray,
    conv: Couple,
    samples: int,
    seed: int,
):
    space = operator.space
    residual = float(
        np.max(np.abs(operator.apply(f) - g)) / (1.0 + np.max(np.abs(g)))
    )
    rng = np.random.Generator(np.random.Philox(key=seed))
    h = rng.choice([-1.0, 1.0], size=(samples, space.n)) * 10.0 ** rng.uniform(
        -2.0, 2.0, size=(samples, space.n)
    )
    lh = h @ operator.entries.T
    hh = _apply_majorant_rows(majorant, h)
    viol = int(np.sum(np.any(np.abs(lh) > hh * (1.0 + DOMINATION_SLACK), axis=1)))
    ratios = []
    for spec in (conv.norm0, conv.norm1):
        top = norm_values(spec, space, lh)
        bot = norm_values(spec, space, h)
        ratios.append(float(np.max(top / bot)))
    return residual, viol, tuple(ratios)


def lift_operator(
    couple: Couple,
    f,
    g,
    p: float,
    method: str = "holder",
    alpha: float | None = None,
    audit_samples: int = 2000,
    seed: int = 0,
) -> LiftResult:
    """Full pipeline: majorization, majorant, row extensions, certificates.

    The base couple must be the unweighted (l1, sup) pair; the ordering
    precondition is checked on its p-convexification before any construction
    happens, then T(alpha*|f|^p) = |g|^p is solved for a positive
    substochastic T and the prescription row by row.
    """
    if not is_l1_linf(couple) or not couple.space.is_uniform():
        raise DomainError("lifting requires the unweighted (l1, sup) base couple")
    if method not in ("holder", "greedy"):
        raise DomainError(f"unknown extension method: {method!r}")
    if not (1.0 < p < INF):
        raise DomainError("exponent must lie in (1, inf)")
    if alpha is None:
        alpha = default_alpha(p)
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise DomainError("alpha must be a positive real")
    space = couple.space
    fv = np.asarray(f, dtype=float)
    gv = np.asarray(g, dtype=float)
    if fv.shape != (space.n,) or gv.shape != (space.n,):
        raise DomainError("vectors must match the atom count of the couple")

    conv = convexify_couple(couple, p)
    _require_k_ordering(conv, fv, gv)

    T = construct_positive_operator(space, alpha * np.abs(fv) ** p, np.abs(gv) ** p)
    majorant = SublinearMajorant(operator=T, alpha=alpha, p=p)

    row_fn = holder_extension_row if method == "holder" else greedy_hb_extension_row
    slack = 0.5 * RESIDUAL_BUDGET * (1.0 + float(np.max(np.abs(gv))))
    rows = [row_fn(majorant, fv, float(gv[i]), i, slack=slack) for i in range(space.n)]
    operator = MatrixOperator(space=space, entries=np.stack(rows, axis=0))

    residual, viol, ratios = _audit_lift(
        operator, majorant, fv, gv, conv, audit_samples, seed
    )
    return LiftResult(
        operator=operator,
        majorant=majorant,
        method=method,
        alpha=alpha,
        p=p,
        residual_lf_g=residual,
        domination_violations=viol,
        norm_sample_ratios=ratios,
        audit_samples=audit_samples,
        audit_seed=seed,
    )


def verify_lift(
    result: LiftResult,
    majorant: SublinearMajorant,
    f,
    g,
    couple_p: Couple,
    samples: int = 10_000,
    seed: int = 1,
) -> VerifyReport:
    """Recompute every lift certificate from scratch on a fresh sample set."""
    fv = np.asarray(f, dtype=float)
    gv = np.asarray(g, dtype=float)
    residual, viol, ratios = _audit_lift(
        result.operator, majorant, fv, gv, couple_p, samples, seed
    )
    bound = 2.0 ** (1.0 - 1.0 / result.p)
    ok = (
        residual <= RESIDUAL_BUDGET
        and viol == 0
        and all(r <= bound + DOMINATION_SLACK for r in ratios)
    )
    return VerifyReport(
        ok=ok,
        residual_lf_g=residual,
        domination_violations=viol,
        norm_sample_ratios=ratios,
        norm_bound=bound,
        samples=samples,
        seed=seed,
    )
