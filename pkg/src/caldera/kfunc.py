"""K- and D-functionals on finite couples, exact and numerical.

K(t, f) is the infimum of ||a0||_0 + t ||a1||_1 over all splittings
f = a0 + a1; D(t, f) restricts the infimum to splittings with disjoint
supports.  On a finite space both are finite, nondecreasing and concave in
t, and D never exceeds 2 K.

Three computational routes live here:

* a closed form for the (l1, linf) couple via the weighted decreasing
  rearrangement (the profile is piecewise linear in t),
* a general numerical solver over sign-compatible dominated splittings
  (1-d search over truncation levels when one exponent is infinite,
  projected gradient over the box otherwise),
* exhaustive enumeration of the 2^n disjoint splittings for D.

The inequality checks at the bottom compare these routes against each other
and against the constants that control p-convexification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CapacityError,
    DimensionMismatch,
    DomainError,
    InternalConsistencyError,
    NumericalFailure,
)
from .lattice import (
    INF,
    Couple,
    LatticeVector,
    MeasureSpace,
    convexify_couple,
    effective_exponent,
    is_l1_linf,
    norm,
    vector,
)
from .majorize import weighted_weak_submajorizes

D_EXACT_MAX_N = 22

# relative accuracy contract of the numerical K solver
SOLVER_REL_GAP = 1e-6
SOLVER_MAX_ITER = 100_000

# profile and sandwich comparisons
PROFILE_TOL = 1e-9
SANDWICH_TOL = 1e-9
ORDER_GRID_SLACK = 1e-9


def default_t_grid(lo: float = 1e-3, hi: float = 1e3, count: int = 61) -> np.ndarray:
    if not (0.0 < lo < hi) or count < 2:
        raise DomainError("need 0 < lo < hi and at least two grid points")
    return np.geomspace(lo, hi, count)


def _values(f) -> np.ndarray:
    if isinstance(f, LatticeVector):
        return np.asarray(f.values, dtype=float)
    arr = np.asarray(f, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch("expected a 1-d vector")
    return arr


def _as_grid(t_grid) -> np.ndarray:
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise DomainError("t grid must be a nonempty 1-d array")
    if np.any(ts <= 0.0) or np.any(np.diff(ts) <= 0.0):
        raise DomainError("t grid must be strictly increasing and positive")
    return ts


# ---------------------------------------------------------------------------
# decompositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decomposition:
    """A splitting f = a0 + a1, with a0 measured in norm0 and a1 in norm1."""

    a0: LatticeVector
    a1: LatticeVector

    def reconstruction(self) -> np.ndarray:
        return self.a0.values + self.a1.values

    def is_disjoint(self) -> bool:
        return bool(np.all(self.a0.values * self.a1.values == 0.0))


def check_decomposition(f, dec: Decomposition, rel_tol: float = 1e-12) -> bool:
    fv = _values(f)
    err = np.max(np.abs(dec.reconstruction() - fv), initial=0.0)
    return err <= rel_tol * max(float(np.max(np.abs(fv), initial=0.0)), 1e-300) + 1e-300


def _split_from_modulus(space: MeasureSpace, fv: np.ndarray, u: np.ndarray) -> Decomposition:
    # u = |a0| on the sign pattern of f; a1 picks up the exact remainder
    a0 = np.sign(fv) * u
    a1 = fv - a0
    return Decomposition(a0=vector(space, a0), a1=vector(space, a1))


# ---------------------------------------------------------------------------
# exact route on (l1, linf)
# ---------------------------------------------------------------------------


def require_l1_linf(couple: Couple):
    if not is_l1_linf(couple):
        raise DomainError("operation requires the (l1, linf) couple")


@dataclass(frozen=True)
class _SortedView:
    av: np.ndarray  # moduli, nonincreasing
    wv: np.ndarray  # matching weights
    cw: np.ndarray  # cumulative weights
    cwa: np.ndarray  # cumulative weighted moduli


def _sorted_view(space: MeasureSpace, fv: np.ndarray) -> _SortedView:
    if fv.size != space.n:
        raise DimensionMismatch("vector length does not match atom count")
    a = np.abs(fv)
    order = np.argsort(-a, kind="stable")
    av = a[order]
    wv = space.weights[order]
    return _SortedView(av=av, wv=wv, cw=np.cumsum(wv), cwa=np.cumsum(wv * av))


def _k_exact_batch(view: _SortedView, ts: np.ndarray):
    """Values, truncation levels and split norms of K on (l1, linf)."""
    k = np.minimum(np.searchsorted(view.cw, ts, side="left"), view.av.size - 1)
    prev_w = np.where(k > 0, view.cw[k - 1], 0.0)
    prev_s = np.where(k > 0, view.cwa[k - 1], 0.0)
    inside = ts < view.cw[-1]
    values = np.where(inside, prev_s + (ts - prev_w) * view.av[k], view.cwa[-1])
    levels = np.where(inside, view.av[k], 0.0)
    a0_norm = np.where(inside, prev_s - prev_w * levels, view.cwa[-1])
    a1_norm = levels
    return values, levels, a0_norm, a1_norm


def k_exact_l1_linf(space: MeasureSpace, f, t: float):
    """K(t, f) on the weighted (l1, linf) couple, with an optimal splitting.

    Equals the integral over [0, t] of the weighted decreasing
    rearrangement of |f|; the optimal splitting truncates |f| at the level
    the rearrangement takes at position t.
    """
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t > 0.0):
        raise DomainError(f"t must be a positive real, got {t}")
    fv = _values(f)
    view = _sorted_view(space, fv)
    ts = np.array([float(t)])
    values, levels, _, _ = _k_exact_batch(view, ts)
    c = float(levels[0])
    u = np.maximum(np.abs(fv) - c, 0.0)
    return float(values[0]), _split_from_modulus(space, fv, u)


# ---------------------------------------------------------------------------
# numerical route
# ---------------------------------------------------------------------------


def _pnorm(w: np.ndarray, x: np.ndarray, p: float) -> float:
    if p == INF:
        return float(np.max(x, initial=0.0))
    if p == 1.0:
        return float(np.dot(w, x))
    m = float(np.max(x, initial=0.0))
    if m == 0.0:
        return 0.0
    return m * float(np.sum(w * (x / m) ** p)) ** (1.0 / p)


def _pnorm_rows(w: np.ndarray, rows: np.ndarray, p: float) -> np.ndarray:
    if p == INF:
        return np.max(rows, axis=1, initial=0.0)
    if p == 1.0:
        return rows @ w
    m = np.max(rows, axis=1, initial=0.0)
    safe = np.where(m > 0.0, m, 1.0)
    return m * np.sum(w * (rows / safe[:, None]) ** p, axis=1) ** (1.0 / p)


def _golden_min_batch(fun, lo: np.ndarray, hi: np.ndarray, iters: int = 90):
    """Vectorized golden-section minimization of convex 1-d objectives.

    Returns the best points, their values and a convexity-based bound on the
    remaining gap to the true minimum of each objective over [lo, hi].
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = 1.0 - invphi
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    x1 = a + invphi2 * (b - a)
    x2 = a + invphi * (b - a)
    f1 = fun(x1)
    f2 = fun(x2)
    fa = fun(a)
    fb = fun(b)
    for _ in range(iters):
        take = f1 < f2
        new_a = np.where(take, a, x1)
        new_b = np.where(take, x2, b)
        fa = np.where(take, fa, f1)
        fb = np.where(take, f2, fb)
        h = new_b - new_a
        probe = np.where(take, new_a + invphi2 * h, new_a + invphi * h)
        fp = fun(probe)
        new_x1 = np.where(take, probe, x2)
        new_f1 = np.where(take, fp, f2)
        new_x2 = np.where(take, x1, probe)
        new_f2 = np.where(take, f1, fp)
        a, b, x1, x2, f1, f2 = new_a, new_b, new_x1, new_x2, new_f1, new_f2

    xs = np.stack([a, x1, x2, b])
    fs = np.stack([fa, f1, f2, fb])
    pick = np.argmin(fs, axis=0)
    idx = np.arange(a.size)
    best_x = xs[pick, idx]
    best_f = fs[pick, idx]
    # chord-slope certificate: a convex objective cannot dip below the
    # linearizations drawn from the final bracket
    width_l = np.maximum(best_x - a, 0.0)
    width_r = np.maximum(b - best_x, 0.0)
    slope_l = np.where(width_l > 0.0, (best_f - fa) / np.where(width_l > 0, width_l, 1.0), 0.0)
    slope_r = np.where(width_r > 0.0, (fb - best_f) / np.where(width_r > 0, width_r, 1.0), 0.0)
    gap = np.maximum(
        np.maximum(0.0, slope_r) * width_l, np.maximum(0.0, -slope_l) * width_r
    )
    gap = gap + 1e-14 * np.abs(best_f)
    return best_x, best_f, gap


def _k_truncation_batch(w: np.ndarray, fv: np.ndarray, p0: float, ts: np.ndarray):
    """Numerical K for couples whose second exponent is infinite.

    For any lattice norm on the first slot the best splitting at a given
    sup-level c keeps |a0| = (|f| - c)_+, so K reduces to a convex
    minimization over the single truncation level.
    """
    a = np.abs(fv)
    top = float(np.max(a, initial=0.0))
    if top == 0.0:
        z = np.zeros_like(ts)
        return z, z.copy(), z.copy()

    def objective(cs: np.ndarray) -> np.ndarray:
        excess = np.maximum(a[None, :] - cs[:, None], 0.0)
        return _pnorm_rows(w, excess, p0) + ts * cs

    lo = np.zeros_like(ts)
    hi = np.full_like(ts, top)
    best_c, best_f, gap = _golden_min_batch(objective, lo, hi)
    return best_f, best_c, gap


def _dual_pnorm(w: np.ndarray, z: np.ndarray, p: float) -> float:
    """Norm dual to the weighted p-norm under the plain dot pairing."""
    az = np.abs(z)
    if p == 1.0:
        return float(np.max(az / w, initial=0.0))
    if p == INF:
        return float(np.sum(az))
    q = p / (p - 1.0)
    return _pnorm(w ** (-q / p), az, q)


def _pgd_box(
    w: np.ndarray,
    v: np.ndarray,
    p0: float,
    p1: float,
    t: float,
    max_iter: int = SOLVER_MAX_ITER,
    rel_gap: float = SOLVER_REL_GAP,
):
    """Projected gradient over the box 0 <= u <= v for finite exponents.

    Minimizes N0(u) + t N1(v - u).  Termination is by a certified duality
    gap: any z with dual0(z) <= 1 and dual1(z) <= t yields the lower bound
    <z, v>, and rescaled norm gradients supply such a z that closes the gap
    at every stationary point, faces of the box included.  Barzilai-Borwein
    steps with a backtracking line search keep progress monotone.
    """

    def n_and_grad(x: np.ndarray, p: float):
        val = _pnorm(w, x, p)
        if p == 1.0:
            return val, w.copy()
        if val == 0.0:
            return 0.0, np.zeros_like(x)
        return val, w * (x / val) ** (p - 1.0)

    def phi(u: np.ndarray) -> float:
        return _pnorm(w, u, p0) + t * _pnorm(w, v - u, p1)

    def dual_bound(g0: np.ndarray, g1: np.ndarray) -> float:
        # two candidate multipliers built from the side gradients; each gets
        # shrunk onto the feasible dual box before the pairing is taken
        lb = 0.0
        for z in (g0, t * g1):
            d0 = _dual_pnorm(w, z, p0)
            d1 = _dual_pnorm(w, z, p1)
            scale = min(
                1.0 / d0 if d0 > 1.0 else 1.0,
                t / d1 if d1 > t else 1.0,
            )
            lb = max(lb, scale * float(np.dot(z, v)))
        return lb

    # initial sweep over truncation-style candidates
    quantiles = np.quantile(v[v > 0], [0.25, 0.5, 0.75]) if np.any(v > 0) else []
    candidates = [np.zeros_like(v), v.copy(), 0.5 * v]
    for c in quantiles:
        candidates.append(np.maximum(v - c, 0.0))
        candidates.append(np.minimum(v, c))
    u = min(candidates, key=phi).copy()

    fu = phi(u)
    best_u, best_f = u.copy(), fu
    best_lb = 0.0
    step = 1.0
    prev_u = None
    prev_g = None
    stalls = 0
    for _ in range(max_iter):
        n0, g0 = n_and_grad(u, p0)
        n1, g1 = n_and_grad(v - u, p1)
        g = g0 - t * g1
        fu = n0 + t * n1
        if fu < best_f:
            best_f, best_u = fu, u.copy()
        best_lb = max(best_lb, dual_bound(g0, g1))
        gap = max(best_f - best_lb, 0.0)
        if gap <= rel_gap * max(best_f, 1e-300):
            return best_f, best_u, gap
        if prev_u is not None:
            s = u - prev_u
            y = g - prev_g
            sy = float(np.dot(s, y))
            if sy > 0.0:
                step = float(np.dot(s, s)) / sy
            step = min(max(step, 1e-14), 1e14)
        prev_u, prev_g = u, g
        # backtracking on the projection arc
        accepted = False
        trial_step = step
        for _ in range(120):
            u_new = np.clip(u - trial_step * g, 0.0, v)
            f_new = phi(u_new)
            decrease = float(np.dot(g, u - u_new))
            if f_new <= fu - 1e-4 * decrease and not np.array_equal(u_new, u):
                u = u_new
                step = trial_step
                accepted = True
                break
            trial_step *= 0.5
        if not accepted:
            # restart the step memory once before giving up; the gradient
            # scale can change by many orders across the box
            stalls += 1
            prev_u = prev_g = None
            step = 1.0
            if stalls >= 3:
                break
    gap = max(best_f - best_lb, 0.0)
    if gap <= rel_gap * max(best_f, 1e-300):
        return best_f, best_u, gap
    raise NumericalFailure(
        f"projected gradient stopped with gap {gap:.3e} above target",
        best_value=best_f,
        gap=gap,
    )


def _exponents(couple: Couple):
    return effective_exponent(couple.norm0), effective_exponent(couple.norm1)


def _k_numeric_full(couple: Couple, f, t: float):
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t > 0.0):
        raise DomainError(f"t must be a positive real, got {t}")
    fv = _values(f)
    space = couple.space
    if fv.size != space.n:
        raise DimensionMismatch("vector length does not match atom count")
    w = space.weights
    p0, p1 = _exponents(couple)

    if p1 == INF:
        vals, cs, gaps = _k_truncation_batch(w, fv, p0, np.array([float(t)]))
        u = np.maximum(np.abs(fv) - float(cs[0]), 0.0)
        return float(vals[0]), _split_from_modulus(space, fv, u), float(gaps[0])

    if p0 == INF:
        swapped = Couple(space=space, norm0=couple.norm1, norm1=couple.norm0)
        val, dec, gap = _k_numeric_full(swapped, fv, 1.0 / float(t))
        return (
            float(t) * val,
            Decomposition(a0=dec.a1, a1=dec.a0),
            float(t) * gap,
        )

    best_f, best_u, gap = _pgd_box(w, np.abs(fv), p0, p1, float(t))
    return best_f, _split_from_modulus(space, fv, best_u), gap


def k_numeric(couple: Couple, f, t: float):
    """Numerical K(t, f) with an explicit near-optimal splitting.

    The returned value is within the solver's relative-gap contract of the
    true infimum; a splitting achieving it accompanies the value.
    """
    value, dec, _ = _k_numeric_full(couple, f, t)
    return value, dec


# ---------------------------------------------------------------------------
# exhaustive disjoint route
# ---------------------------------------------------------------------------


def _subset_norms(w: np.ndarray, fv: np.ndarray, p: float) -> np.ndarray:
    """Norm of f restricted to every subset of atoms, indexed by bitmask."""
    n = fv.size
    out = np.zeros(1 << n)
    a = np.abs(fv)
    if p == INF:
        for b in range(n):
            size = 1 << b
            out[size : 2 * size] = np.maximum(out[:size], a[b])
        return out
    x = w * a ** p
    for b in range(n):
        size = 1 << b
        out[size : 2 * size] = out[:size] + x[b]
    if p == 1.0:
        return out
    return out ** (1.0 / p)


def _d_tables(couple: Couple, fv: np.ndarray):
    n = fv.size
    if n > D_EXACT_MAX_N:
        raise CapacityError(f"exhaustive splitting enumeration capped at n = {D_EXACT_MAX_N}")
    p0, p1 = _exponents(couple)
    w = couple.space.weights
    a_table = _subset_norms(w, fv, p0)
    b_table = _subset_norms(w, fv, p1)[::-1]  # complement lookup
    return a_table, b_table


def d_exact(couple: Couple, f, t: float):
    """Exact D(t, f) by enumerating all disjoint splittings."""
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t > 0.0):
        raise DomainError(f"t must be a positive real, got {t}")
    fv = _values(f)
    if fv.size != couple.space.n:
        raise DimensionMismatch("vector length does not match atom count")
    a_table, b_table = _d_tables(couple, fv)
    totals = a_table + float(t) * b_table
    mask = int(np.argmin(totals))
    keep = np.array([(mask >> i) & 1 for i in range(fv.size)], dtype=bool)
    a0 = np.where(keep, fv, 0.0)
    a1 = np.where(keep, 0.0, fv)
    dec = Decomposition(a0=vector(couple.space, a0), a1=vector(couple.space, a1))
    return float(totals[mask]), dec


def _d_batch(couple: Couple, fv: np.ndarray, ts: np.ndarray):
    a_table, b_table = _d_tables(couple, fv)
    values = np.empty_like(ts)
    a0n = np.empty_like(ts)
    a1n = np.empty_like(ts)
    for i, t in enumerate(ts):
        totals = a_table + t * b_table
        mask = int(np.argmin(totals))
        values[i] = totals[mask]
        a0n[i] = a_table[mask]
        a1n[i] = b_table[mask]
    return values, a0n, a1n


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KProfile:
    kind: str
    t_grid: np.ndarray
    values: np.ndarray
    a0_norms: np.ndarray
    a1_norms: np.ndarray
    gaps: np.ndarray = field(default=None, repr=False)


def _validate_profile(prof: KProfile, tol: float = PROFILE_TOL):
    ts, vs = prof.t_grid, prof.values
    scale = max(float(np.max(vs, initial=0.0)), 1e-300)
    slack = tol * scale + 1e-15
    if np.any(np.diff(vs) < -slack):
        raise InternalConsistencyError(f"{prof.kind} profile is not nondecreasing")
    if prof.kind == "K":
        ratio = vs / ts
        if np.any(np.diff(ratio) > tol * np.abs(ratio[:-1]) + 1e-15):
            raise InternalConsistencyError("K(t)/t fails to be nonincreasing")
        if ts.size >= 3:
            t1, t2, t3 = ts[:-2], ts[1:-1], ts[2:]
            v1, v2, v3 = vs[:-2], vs[1:-1], vs[2:]
            chord = ((t3 - t2) * v1 + (t2 - t1) * v3) / (t3 - t1)
            if np.any(v2 < chord - slack):
                raise InternalConsistencyError("K profile fails concavity")


def _k_values(couple: Couple, fv: np.ndarray, ts: np.ndarray):
    """K over a grid, picking the fastest applicable route.

    Returns values, split norms and certified gaps (zero for closed forms).
    """
    space = couple.space
    p0, p1 = _exponents(couple)
    w = space.weights
    if p1 == INF:
        vals, cs, gaps = _k_truncation_batch(w, fv, p0, ts)
        a = np.abs(fv)
        excess = np.maximum(a[None, :] - cs[:, None], 0.0)
        a0n = _pnorm_rows(w, excess, p0)
        a1n = np.minimum(float(np.max(a, initial=0.0)), cs)
        return vals, a0n, a1n, gaps
    if p0 == INF:
        swapped = Couple(space=space, norm0=couple.norm1, norm1=couple.norm0)
        vals, a0n, a1n, gaps = _k_values(swapped, fv, (1.0 / ts)[::-1])
        return (ts * vals[::-1], ts * 0 + a1n[::-1], a0n[::-1], ts * gaps[::-1])
    vals = np.empty_like(ts)
    a0n = np.empty_like(ts)
    a1n = np.empty_like(ts)
    gaps = np.empty_like(ts)
    for i, t in enumerate(ts):
        try:
            value, dec, gap = _k_numeric_full(couple, fv, float(t))
        except NumericalFailure as exc:
            raise NumericalFailure(
                f"K solver failed at t = {t}: {exc}",
                best_value=exc.best_value,
                gap=exc.gap,
            ) from exc
        vals[i] = value
        a0n[i] = norm(couple.norm0, dec.a0)
        a1n[i] = norm(couple.norm1, dec.a1)
        gaps[i] = gap
    return vals, a0n, a1n, gaps


def profile(kind: str, couple: Couple, f, t_grid, validate: bool = True) -> KProfile:
    """Evaluate K or D over a grid and check the shape invariants."""
    if kind not in ("K", "D"):
        raise DomainError(f"profile kind must be 'K' or 'D', got {kind!r}")
    ts = _as_grid(t_grid)
    fv = _values(f)
    if kind == "K":
        if is_l1_linf(couple):
            view = _sorted_view(couple.space, fv)
            vals, _, a0n, a1n = _k_exact_batch(view, ts)
            gaps = np.zeros_like(ts)
        else:
            vals, a0n, a1n, gaps = _k_values(couple, fv, ts)
    else:
        vals, a0n, a1n = _d_batch(couple, fv, ts)
        gaps = np.zeros_like(ts)
    prof = KProfile(
        kind=kind, t_grid=ts, values=vals, a0_norms=a0n, a1_norms=a1n, gaps=gaps
    )
    if validate:
        _validate_profile(prof)
    return prof


# ---------------------------------------------------------------------------
# inequality checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SandwichReport:
    """Outcome of the K <= D <= 2K comparison over a grid."""

    ok: bool
    t_grid: np.ndarray
    k_values: np.ndarray
    d_values: np.ndarray
    max_ratio: float
    violations: tuple


def check_k_d_sandwich(couple: Couple, f, t_grid=None, rel_tol: float = SANDWICH_TOL):
    ts = default_t_grid() if t_grid is None else _as_grid(t_grid)
    fv = _values(f)
    kprof = profile("K", couple, fv, ts, validate=False)
    dprof = profile("D", couple, fv, ts, validate=False)
    kv, dv = kprof.values, dprof.values
    slack = rel_tol * np.maximum(kv, 1e-300) + kprof.gaps
    violations = []
    for i, t in enumerate(ts):
        if dv[i] < kv[i] - slack[i]:
            violations.append((float(t), "D below K", float(kv[i] - dv[i])))
        if dv[i] > 2.0 * kv[i] + 2.0 * slack[i]:
            violations.append((float(t), "D above 2K", float(dv[i] - 2.0 * kv[i])))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(kv > 0.0, dv / np.where(kv > 0, kv, 1.0), 1.0)
    return SandwichReport(
        ok=not violations,
        t_grid=ts,
        k_values=kv,
        d_values=dv,
        max_ratio=float(np.max(ratios, initial=1.0)),
        violations=tuple(violations),
    )


@dataclass(frozen=True)
class PowerSandwichReport:
    """Two-sided comparison of a functional against its convexified twin.

    lower[i] <= middle[i] <= bound * lower[i] is the claim; entries of
    ``violations`` broke it beyond all tolerances, entries of
    ``solver_flags`` broke it by less than the certified solver gap and are
    therefore inconclusive rather than counterexamples.
    """

    ok: bool
    kind: str
    p: float
    bound: float
    t_grid: np.ndarray
    lower: np.ndarray
    middle: np.ndarray
    max_ratio: float
    violations: tuple
    solver_flags: tuple
    corollary_ok: bool = True


def _power_sandwich(kind, couple, f, p, t_grid, tol, solver_slack):
    ts = default_t_grid() if t_grid is None else _as_grid(t_grid)
    if not (math.isfinite(p) and p > 1.0):
        raise DomainError("convexification exponent must lie in (1, inf)")
    fv = _values(f)
    powered = np.abs(fv) ** p
    conv = convexify_couple(couple, p)
    ts_root = ts ** (1.0 / p)
    if kind == "D":
        base_vals, _, _ = _d_batch(couple, powered, ts)
        conv_vals, _, _ = _d_batch(conv, fv, ts_root)
        base_gap = np.zeros_like(ts)
        conv_gap = np.zeros_like(ts)
    else:
        base_vals, _, _, base_gap = _k_values(couple, powered, ts)
        conv_vals, _, _, conv_gap = _k_values(conv, fv, ts_root)
    lower = base_vals ** (1.0 / p)
    middle = conv_vals
    bound = 2.0 ** (1.0 - 1.0 / p)

    scale = np.maximum(lower, 1e-300)
    hard = tol * scale
    soft = hard + solver_slack * scale + base_gap + conv_gap
    violations = []
    flags = []
    for i, t in enumerate(ts):
        low_break = lower[i] - middle[i]
        high_break = middle[i] - bound * lower[i]
        worst = max(low_break, high_break)
        if worst > soft[i]:
            side = "below lower" if low_break >= high_break else "above upper"
            violations.append((float(t), side, float(worst)))
        elif worst > hard[i]:
            flags.append((float(t), float(worst)))
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(middle))):
        violations.append((float("nan"), "non-finite value", math.inf))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(lower > 0.0, middle / scale, 1.0)
    return ts, lower, middle, bound, ratios, tuple(violations), tuple(flags)


def check_d_power_sandwich(
    couple: Couple, f, p: float, t_grid=None, rel_tol: float = SANDWICH_TOL
) -> PowerSandwichReport:
    """D(t, |f|^p)^(1/p) <= D(t^(1/p), f; convexified) <= 2^(1-1/p) times it."""
    ts, lower, middle, bound, ratios, violations, flags = _power_sandwich(
        "D", couple, f, p, t_grid, rel_tol, 0.0
    )
    return PowerSandwichReport(
        ok=not violations,
        kind="D",
        p=float(p),
        bound=bound,
        t_grid=ts,
        lower=lower,
        middle=middle,
        max_ratio=float(np.max(ratios, initial=1.0)),
        violations=violations,
        solver_flags=flags,
    )


def check_k_power_sandwich(
    couple: Couple,
    f,
    p: float,
    t_grid=None,
    rel_tol: float = SANDWICH_TOL,
    solver_slack: float = 2.0 * SOLVER_REL_GAP,
) -> PowerSandwichReport:
    """Same two-sided comparison for K, with solver gaps kept separate.

    Also verifies the squared corollary: K(t, |f|^p) <= 2^p K(t^(1/p), f)^p
    <= 2^(2p) K(t, |f|^p), which follows from the main chain and must hold
    with room to spare.
    """
    ts, lower, middle, bound, ratios, violations, flags = _power_sandwich(
        "K", couple, f, p, t_grid, rel_tol, solver_slack
    )
    k_base = lower ** p
    k_conv_p = middle ** p
    scale = np.maximum(k_base, 1e-300)
    slack = (rel_tol + p * solver_slack) * scale
    corollary_ok = bool(
        np.all(k_base <= 2.0 ** p * k_conv_p + slack)
        and np.all(2.0 ** p * k_conv_p <= 2.0 ** (2.0 * p) * k_base + 2.0 ** p * slack)
    )
    return PowerSandwichReport(
        ok=not violations and corollary_ok,
        kind="K",
        p=float(p),
        bound=bound,
        t_grid=ts,
        lower=lower,
        middle=middle,
        max_ratio=float(np.max(ratios, initial=1.0)),
        violations=violations,
        solver_flags=flags,
        corollary_ok=corollary_ok,
    )


# ---------------------------------------------------------------------------
# K-ordering
# ---------------------------------------------------------------------------


def k_order_dominates(
    couple: Couple, f, g, t_grid=None, slack: float = ORDER_GRID_SLACK
) -> bool:
    """True when K(t, g) <= K(t, f) across the grid.

    On the (l1, linf) couple the comparison is also decided exactly through
    the weighted rearrangement integrals; if the exact decision says the
    domination holds everywhere while the grid sees a violation beyond its
    slack, the two routes contradict each other and that is an internal
    error, not a property of the input.
    """
    ts = default_t_grid() if t_grid is None else _as_grid(t_grid)
    fv = _values(f)
    gv = _values(g)
    kf = profile("K", couple, fv, ts, validate=False)
    kg = profile("K", couple, gv, ts, validate=False)
    tol = slack * np.maximum(kf.values, 1e-300) + kf.gaps + kg.gaps
    grid_ok = bool(np.all(kg.values <= kf.values + tol))
    if is_l1_linf(couple):
        exact_ok = weighted_weak_submajorizes(couple.space, fv, gv)
        if exact_ok and not grid_ok:
            raise InternalConsistencyError(
                "exact rearrangement comparison and grid comparison disagree"
            )
        return exact_ok
    return grid_ok
