"""Binomial comparison probabilities and the checks built on them.

``psi`` compares ``L ~ Bin(j - 1, r1)`` with an independent ``U ~ Bin(n - j, r2)``.
Plugging in the conditional crossing probabilities ``q1, q2`` of the particle
model gives bounds on the law of the gap between two empirical quantiles,
which :func:`sandwich_check` tests by simulation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import betainc, gammaln, xlog1py, xlogy

from ._select import select_rows
from .errors import DomainError, NumericError
from .particles import _positions, order_index
from .quantile import QuantileCurve

RELATIONS = ("<=", "<", ">", ">=")
_ALIASES = {"le": "<=", "lt": "<", "gt": ">", "ge": ">=", "≤": "<=", "≥": ">="}
_SALT_SANDWICH = 5


@dataclass(frozen=True)
class RwParams:
    j: int
    n: int
    r1: float
    r2: float

    def __post_init__(self):
        if not (1 <= self.j <= self.n):
            raise DomainError(f"need 1 <= j <= n, got j={self.j}, n={self.n}")
        if not (0.0 <= self.r1 <= 1.0 and 0.0 <= self.r2 <= 1.0):
            raise DomainError("r1 and r2 must lie in [0, 1]")


def binom_pmf(m: int, r) -> np.ndarray:
    """``P(Bin(m, r) = k)`` for ``k = 0..m`` (rows) and each ``r`` (columns if array)."""
    r = np.asarray(r, dtype=float)
    k = np.arange(m + 1).reshape((-1,) + (1,) * r.ndim)
    logc = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
    return np.exp(logc + xlogy(k, r) + xlog1py(m - k, -r))


def _upper_tails(pmf):
    # tails[k] = P(X >= k), k = 0..m+2; summed from the small end
    rev = np.cumsum(pmf[::-1], axis=0)[::-1]
    return np.concatenate([rev, np.zeros((2,) + pmf.shape[1:])], axis=0)


def psi_pair(j: int, n: int, r1, r2):
    """``(P(L <= U), P(L < U))``, vectorized over matching arrays ``r1, r2``."""
    r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    left, right = j - 1, n - j
    pl = binom_pmf(left, r1)
    tail = _upper_tails(binom_pmf(right, r2))
    kmax = min(left, right + 1)
    le = np.sum(pl[: kmax + 1] * tail[: kmax + 1], axis=0)
    lt = np.sum(pl[: kmax + 1] * tail[1 : kmax + 2], axis=0)
    return np.clip(le, 0.0, 1.0), np.clip(lt, 0.0, 1.0)


def psi(p: RwParams, relation: str = "<=") -> float:
    """``P(L rel U)`` for ``rel`` one of ``<=, <, >, >=``."""
    rel = _ALIASES.get(relation, relation)
    if rel not in RELATIONS:
        raise DomainError(f"unknown relation {relation!r}")
    le, lt = (float(v) for v in psi_pair(p.j, p.n, p.r1, p.r2))
    return {"<=": le, "<": lt, ">": 1.0 - le, ">=": 1.0 - lt}[rel]


@dataclass(frozen=True)
class GapContext:
    curve: QuantileCurve
    s: float
    t: float
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.s < self.t:
            raise DomainError("need 0 <= s < t")

    @property
    def delta(self) -> float:
        return self.t - self.s


def _pieces(curve, s, t, x, y):
    field = curve.field
    a = field.cdf(curve.quantile(s) + x, s)
    b = field.cdf(curve.quantile(t) + x + y, t)
    joint = field.joint_cdf(s, t, curve.quantile(s) + x, curve.quantile(t) + x + y)
    return a, b, joint


def q1q2(ctx: GapContext, x=None, y=None):
    """Crossing probabilities given the side of ``q(s) + x`` at time ``s``.

    ``q1 = P(B(t) > q(t) + x + y | B(s) < q(s) + x)`` and
    ``q2 = P(B(t) < q(t) + x + y | B(s) > q(s) + x)``.  ``x, y`` default to the
    context offsets and may be arrays.
    """
    x = ctx.x if x is None else x
    y = ctx.y if y is None else y
    a, b, joint = _pieces(ctx.curve, ctx.s, ctx.t, np.asarray(x, float), np.asarray(y, float))
    if np.any(a <= 1e-300) or np.any(1.0 - a <= 1e-300):
        raise NumericError("conditioning probability is degenerate")
    q1 = np.clip((a - joint) / a, 0.0, 1.0)
    q2 = np.clip((b - joint) / (1.0 - a), 0.0, 1.0)
    if q1.ndim == 0:
        return float(q1), float(q2)
    return q1, q2


def mu_sigma(alpha: float, q1, q2):
    """``mu = alpha q1 - (1 - alpha) q2`` and ``sigma = alpha q1 + (1 - alpha) q2``."""
    return alpha * q1 - (1.0 - alpha) * q2, alpha * q1 + (1.0 - alpha) * q2


def rwest_ratio(p: RwParams, alpha: float, tau: float) -> float:
    """``psi<= n^tau mu^(2 tau) / sigma^tau`` with ``mu, sigma`` from ``(r1, r2)``."""
    if tau <= 1:
        raise DomainError("tau must exceed 1")
    mu, sigma = mu_sigma(alpha, p.r1, p.r2)
    if mu <= 0:
        raise DomainError(f"mu = {mu:g} <= 0: the bound needs mu > 0")
    val = psi(p, "<=")
    if val == 0.0:
        return 0.0
    return math.exp(math.log(val) + tau * (math.log(p.n) + 2.0 * math.log(mu) - math.log(sigma)))


def rwest_sweep(presets, ns, alpha: float = 0.5, tau: float = 2.0) -> list[dict]:
    rows = []
    for r1, r2 in presets:
        for n in ns:
            p = RwParams(order_index(alpha, n), n, r1, r2)
            rows.append(
                {"n": n, "r1": r1, "r2": r2, "tau": tau, "psi": psi(p, "<="), "ratio": rwest_ratio(p, alpha, tau)}
            )
    return rows


def write_rwest_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "r1", "r2", "tau", "psi", "ratio"])
        for r in rows:
            w.writerow([r["n"]] + [format(float(r[k]), ".17g") for k in ("r1", "r2", "tau", "psi", "ratio")])


def _phi_bounds(ctx: GapContext, j, n, xs, y, chunk=4096):
    lo = np.empty(xs.size)
    hi = np.empty(xs.size)
    for a in range(0, xs.size, chunk):
        q1, q2 = q1q2(ctx, xs[a : a + chunk], y)
        hi[a : a + chunk], lo[a : a + chunk] = psi_pair(j, n, q1, q2)
    return lo, hi


def sandwich_check(ctx: GapContext, n: int, replicas: int, seed: int, j=None, deciles: bool = True) -> dict:
    """Monte Carlo check of ``E phi< <= P(Y_j - X_j < y) <= E phi<=``.

    ``X, Y`` are particle positions at ``s, t`` relative to ``q(s), q(t)``;
    ``X_j, Y_j`` their ``j``-th order statistics; ``y`` is ``ctx.y``.  The
    bounds are evaluated exactly at each realized ``X_j``.  Standard errors are
    for the paired differences, so the pass rule is
    ``lower - 3 SE <= mid <= upper + 3 SE``.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    if replicas < 10_000:
        raise DomainError("sandwich check needs at least 10^4 replicas")
    curve = ctx.curve
    j = order_index(curve.alpha, n) if j is None else int(j)
    y = float(ctx.y)
    xj = np.empty(replicas)
    yj = np.empty(replicas)
    size = max(1, 2_000_000 // n)
    for a in range(0, replicas, size):
        b = min(a + size, replicas)
        pos = _positions(curve.field, n, [ctx.s, ctx.t], seed, a, b, salt=_SALT_SANDWICH)
        stats = select_rows(pos.reshape(-1, n), j, seed=a).reshape(b - a, 2)
        xj[a:b], yj[a:b] = stats[:, 0], stats[:, 1]
    qs, qt = curve.quantile(ctx.s), curve.quantile(ctx.t)
    xj -= qs
    yj -= qt
    ind = (yj - xj < y).astype(float)
    lo, hi = _phi_bounds(ctx, j, n, xj, y)
    d_lo, d_hi = ind - lo, hi - ind
    se_lo = d_lo.std(ddof=1) / math.sqrt(replicas)
    se_hi = d_hi.std(ddof=1) / math.sqrt(replicas)
    report = {
        "params": {"s": ctx.s, "t": ctx.t, "y": y, "n": n, "j": j, "replicas": replicas, "seed": seed,
                   "alpha": curve.alpha},
        "lower": float(lo.mean()),
        "mid": float(ind.mean()),
        "upper": float(hi.mean()),
        "se": float(ind.std(ddof=1) / math.sqrt(replicas)),
        "se_lower_gap": float(se_lo),
        "se_upper_gap": float(se_hi),
        "pass": bool(d_lo.mean() >= -3 * se_lo and d_hi.mean() >= -3 * se_hi),
    }
    if deciles:
        edges = np.quantile(xj, np.linspace(0, 1, 11))
        idx = np.clip(np.searchsorted(edges, xj, side="right") - 1, 0, 9)
        bins = []
        for b in range(10):
            m = idx == b
            k = int(m.sum())
            dl, dh = d_lo[m], d_hi[m]
            sl = dl.std(ddof=1) / math.sqrt(k) if k > 1 else 0.0
            sh = dh.std(ddof=1) / math.sqrt(k) if k > 1 else 0.0
            bins.append(
                {
                    "count": k,
                    "lower": float(lo[m].mean()),
                    "mid": float(ind[m].mean()),
                    "upper": float(hi[m].mean()),
                    "pass": bool(dl.mean() >= -3 * sl and dh.mean() >= -3 * sh),
                }
            )
        report["deciles"] = bins
    return report


def taylor_bound_shape(x, y, delta):
    """``(|x| + |y|)(delta^(1/2) + |y| + delta^(-1/2) y^2) + delta^(-3/2) y^4``."""
    ax, ay = np.abs(x), np.abs(y)
    return (ax + ay) * (np.sqrt(delta) + ay + ay**2 / np.sqrt(delta)) + ay**4 / delta**1.5


def big_psi(ctx: GapContext, x, y):
    """``P(B(t) > q(t) + x + y, B(s) < q(s) + x)``."""
    a, _, joint = _pieces(ctx.curve, ctx.s, ctx.t, np.asarray(x, float), np.asarray(y, float))
    return a - joint


def psi_taylor_check(ctx: GapContext, K: float = 1.0, delta0: float = 0.1, factor: float = 10.0) -> dict:
    """Second-order expansion of ``Psi`` in ``y`` about the origin.

    Reports the remainder, the bound shape and their ratio, plus the matching
    remainders for ``alpha q1`` and ``(1 - alpha) q2`` when ``|x| <= delta0``.
    """
    x, y, d = float(ctx.x), float(ctx.y), ctx.delta
    if abs(x) + abs(y) > K:
        raise DomainError(f"|x| + |y| must not exceed K={K}")
    u = float(ctx.curve.density_at(ctx.s))
    base = float(big_psi(ctx, 0.0, 0.0))
    curv = u * y * y / (2.0 * math.sqrt(2.0 * math.pi * d))
    rem = float(big_psi(ctx, x, y)) - (base - 0.5 * u * y + curv)
    shape = float(taylor_bound_shape(x, y, d))
    out = {
        "params": {"s": ctx.s, "t": ctx.t, "x": x, "y": y, "K": K, "delta0": delta0, "factor": factor},
        "remainder": rem,
        "bound_shape": shape,
        "ratio": abs(rem) / shape if shape > 0 else (0.0 if rem == 0 else math.inf),
    }
    out["pass"] = bool(abs(rem) <= factor * shape)
    if abs(x) <= delta0:
        q1, q2 = q1q2(ctx)
        a = ctx.curve.alpha
        r1 = a * q1 - (base - 0.5 * u * y + curv)
        r2 = (1 - a) * q2 - (base + 0.5 * u * y + curv)
        out["q1_remainder"] = r1
        out["q2_remainder"] = r2
        out["q_ratio"] = max(abs(r1), abs(r2)) / shape if shape > 0 else 0.0
    return out


def mu_taylor_check(ctx: GapContext) -> dict:
    """``mu(x, -y)`` against its leading term ``u(q(s), s) y``."""
    x, y, d = float(ctx.x), float(ctx.y), ctx.delta
    q1, q2 = q1q2(ctx, x, -y)
    mu, _ = mu_sigma(ctx.curve.alpha, q1, q2)
    lead = float(ctx.curve.density_at(ctx.s)) * y
    shape = float(taylor_bound_shape(x, y, d))
    return {"mu": mu, "leading": lead, "remainder": mu - lead, "ratio": abs(mu - lead) / shape if shape else 0.0}


def order_stat_cdf(j: int, n: int, u: float, nodes: int | None = None):
    """``P(X_(j) <= x)`` with ``u = F(x)``, by two routes.

    Returns ``(incomplete_beta, quadrature)``; the second integrates
    ``j C(n, j) v^(j-1) (1-v)^(n-j)`` over ``[0, u]`` with a Gauss-Legendre
    rule that is exact for that polynomial degree.
    """
    if not (1 <= j <= n):
        raise DomainError("need 1 <= j <= n")
    if not 0.0 <= u <= 1.0:
        raise DomainError("u must lie in [0, 1]")
    beta = float(betainc(j, n - j + 1, u))
    if u == 0.0:
        return beta, 0.0
    m = nodes or (n // 2 + 2)
    xg, wg = np.polynomial.legendre.leggauss(m)
    v = 0.5 * u * (xg + 1.0)
    logc = math.log(j) + gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
    logf = logc + xlogy(j - 1, v) + xlog1py(n - j, -v)
    quad = float(0.5 * u * np.sum(wg * np.exp(logf)))
    if abs(beta - quad) > 1e-8:
        raise NumericError(f"order statistic cdf routes disagree: {beta!r} vs {quad!r}")
    return beta, quad


def central_moment_poly(n: int, k: int) -> np.polynomial.Polynomial:
    """``E (X - np)^k`` for ``X ~ Bin(n, p)`` as a polynomial in ``p``.

    Uses ``m_{k+1} = p q (n k m_{k-1} + dm_k/dp)`` with ``q = 1 - p``.
    """
    P = np.polynomial.Polynomial
    pq = P([0.0, 1.0, -1.0])
    m = [P([1.0]), P([0.0])]
    for i in range(1, k):
        m.append(pq * (n * i * m[i - 1] + m[i].deriv()))
    return m[k]


def binomial_central_moment(n: int, p: float, k: int) -> float:
    """``E (Bin(n, p) - np)^k`` by summing the pmf in log space."""
    kk = np.arange(n + 1)
    logpmf = gammaln(n + 1) - gammaln(kk + 1) - gammaln(n - kk + 1) + xlogy(kk, p) + xlog1py(n - kk, -p)
    dev = kk - n * p
    with np.errstate(divide="ignore"):
        logterm = logpmf + k * np.log(np.abs(dev))
    top = np.max(logterm[np.isfinite(logterm)]) if np.any(np.isfinite(logterm)) else 0.0
    sign = np.sign(dev) ** k
    return float(np.exp(top) * np.sum(sign * np.exp(logterm - top)))


def binomial_moment_check(n: int, p: float, r: int) -> dict:
    """``E|Bin(n, p) - np|^(2r)`` against ``max((np)^r, np)``."""
    if not 1 <= r <= 4:
        raise DomainError("r must be between 1 and 4")
    if not 1 <= n <= 10_000:
        raise DomainError("n must be between 1 and 10^4")
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    moment = float(central_moment_poly(n, 2 * r)(p))
    direct = binomial_central_moment(n, p, 2 * r)
    bound = max((n * p) ** r, n * p)
    return {
        "n": n,
        "p": p,
        "r": r,
        "moment": moment,
        "enumerated": direct,
        "bound": bound,
        "ratio": moment / bound if bound > 0 else 0.0,
    }


def report_params(p: RwParams) -> dict:
    return asdict(p)
