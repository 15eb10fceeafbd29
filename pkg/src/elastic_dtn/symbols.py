"""Graded symbol levels of the elastic displacement-to-traction operator.

Everything lives on one chart in boundary normal coordinates.  The symbol
of the tangential part of the operator splits into homogeneous levels
(b_1, b_0 for the first-order block; c_2, c_1, c_0 for the rest), the
half-space factorization produces the recursion for the factor levels
q_1, q_0, q_{-1}, ..., and the boundary operator's levels p_1, p_0, ...
follow.  Levels are jets centered at the base covector, so homogeneity is
not represented structurally; each level is an independent jet.

The first- and zeroth-order multiplier matrices are transcribed here a
second time, independently of the differential-operator transcription in
:mod:`elastic_dtn.geometry`; the plane-wave consistency report ties the
two together.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

from .geometry import (
    ChristoffelField,
    LameJet,
    MetricJet,
    leading_coefficient,
    leading_coefficient_inverse,
    prepare,
)
from .jets import (
    AccuracyExhausted,
    Jet,
    JetContext,
    JetMatrix,
    reciprocal,
    sqrt,
)


@dataclass(frozen=True)
class SymbolContext:
    """Chart data plus every derived jet the level recursion consumes."""

    chart: JetContext
    metric: MetricJet
    lame: LameJet
    g: JetMatrix
    ginv: JetMatrix
    gamma: ChristoffelField
    xi_down: tuple
    xi_up: tuple
    norm_sq: Jet
    norm: Jet
    inv_norm: Jet
    s2: Jet
    lead: JetMatrix
    lead_inv: JetMatrix
    b1: JetMatrix
    b0: JetMatrix
    c2: JetMatrix
    c1: JetMatrix
    c0: JetMatrix
    f1: JetMatrix
    f2: JetMatrix


@dataclass(frozen=True)
class SymbolLevels:
    """Homogeneity-graded symbol levels, contiguous from the top degree."""

    kind: str  # "q" or "p"
    levels: dict

    def __post_init__(self):
        if self.kind not in ("q", "p"):
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        degrees = sorted(self.levels, reverse=True)
        if not degrees:
            raise ValueError("symbol levels are empty")
        if degrees[0] != 1 or degrees != list(range(1, 1 - len(degrees), -1)):
            raise ValueError(f"levels must be contiguous from degree 1, got {degrees}")

    def level(self, degree: int) -> JetMatrix:
        try:
            return self.levels[degree]
        except KeyError:
            raise KeyError(
                f"symbol level of degree {degree} not present "
                f"(have {sorted(self.levels, reverse=True)})") from None

    @property
    def min_degree(self) -> int:
        return min(self.levels)

    @property
    def depth(self) -> int:
        """Largest M with the degree -M level present (-1: principal only)."""
        return -self.min_degree

    def accuracy_map(self) -> dict:
        return {degree: matrix.accuracy for degree, matrix in self.levels.items()}


def build_context(metric: MetricJet, lame: LameJet,
                  chart: JetContext) -> SymbolContext:
    """Assemble every symbol-side jet for one admissible chart."""
    n = chart.dimension
    nn = n - 1
    geo = prepare(metric)
    g, ginv, gamma = geo.g, geo.ginv, geo.gamma
    lam, mu = lame.lam, lame.mu
    inv_mu = reciprocal(mu)
    inv_l2m = reciprocal(lam + 2 * mu)
    inv_l3m = reciprocal(lam + 3 * mu)

    xi_down = tuple(Jet.xi_component(chart, a) for a in range(nn))
    xi_up = tuple(
        sum((ginv[a, b] * xi_down[b] for b in range(1, nn)),
            ginv[a, 0] * xi_down[0])
        for a in range(nn))
    norm_sq = sum((xi_up[a] * xi_down[a] for a in range(1, nn)),
                  xi_up[0] * xi_down[0])
    norm = sqrt(norm_sq)
    inv_norm = reciprocal(norm)
    s2 = (lam + mu) * inv_l3m

    def trace_low(b: int) -> Jet:
        acc = Jet.zero(chart)
        for c in range(nn):
            acc = acc + gamma[c, c, b]
        return acc

    trace_low_n = Jet.zero(chart)
    for c in range(nn):
        trace_low_n = trace_low_n + gamma[c, c, nn]

    def nabla_up(f: Jet, a: int) -> Jet:
        acc = Jet.zero(chart)
        for b in range(nn):
            acc = acc + ginv[a, b] * f.dx(b)
        return acc

    # first-order block, degree-one part
    b1 = JetMatrix.zeros(chart, n, n)
    for a in range(nn):
        b1.entries[a][nn] = 1j * (lam + mu) * inv_mu * xi_up[a]
        b1.entries[nn][a] = 1j * (lam + mu) * inv_l2m * xi_down[a]

    # first-order block, multiplier part
    b0 = JetMatrix.zeros(chart, n, n)
    for a in range(nn):
        for b in range(nn):
            entry = 2 * gamma[a, b, nn]
            if a == b:
                entry = entry + trace_low_n + inv_mu * mu.dn()
            b0.entries[a][b] = entry
        b0.entries[a][nn] = inv_mu * nabla_up(lam, a)
        b0.entries[nn][a] = (lam + mu) * inv_l2m * trace_low(a) \
            + inv_l2m * mu.dx(a)
    b0.entries[nn][nn] = trace_low_n + inv_l2m * (lam + 2 * mu).dn()

    # tangential block, degree-two part
    c2 = JetMatrix.zeros(chart, n, n)
    for a in range(nn):
        for b in range(nn):
            entry = -(lam + mu) * inv_mu * xi_up[a] * xi_down[b]
            if a == b:
                entry = entry - norm_sq
            c2.entries[a][b] = entry
    c2.entries[nn][nn] = -mu * inv_l2m * norm_sq

    # tangential block, degree-one part
    scalar = Jet.zero(chart)
    for a in range(nn):
        scalar = scalar + xi_up[a] * trace_low(a) + xi_up[a].dx(a)
    xi_grad_mu = Jet.zero(chart)
    for a in range(nn):
        xi_grad_mu = xi_grad_mu + xi_down[a] * nabla_up(mu, a)

    c1 = JetMatrix.zeros(chart, n, n)
    for a in range(nn):
        for b in range(nn):
            entry = 1j * (lam + mu) * inv_mu * xi_up[a] * trace_low(b)
            for c in range(nn):
                entry = entry + 2j * xi_up[c] * gamma[a, c, b]
            entry = entry + 1j * inv_mu * (xi_down[b] * nabla_up(lam, a)
                                           + xi_up[a] * mu.dx(b))
            if a == b:
                entry = entry + 1j * scalar + 1j * inv_mu * xi_grad_mu
            c1.entries[a][b] = entry
        entry = 1j * (lam + mu) * inv_mu * trace_low_n * xi_up[a]
        for c in range(nn):
            entry = entry + 2j * xi_up[c] * gamma[a, c, nn]
        entry = entry + 1j * inv_mu * mu.dn() * xi_up[a]
        c1.entries[a][nn] = entry
    for b in range(nn):
        entry = Jet.zero(chart)
        for c in range(nn):
            entry = entry + 2j * mu * inv_l2m * xi_up[c] * gamma[nn, c, b]
        entry = entry + 1j * inv_l2m * lam.dn() * xi_down[b]
        c1.entries[nn][b] = entry
    c1.entries[nn][nn] = 1j * mu * inv_l2m * scalar \
        + 1j * inv_l2m * xi_grad_mu

    # tangential block, multiplier part
    def contracted(j: int, k: int) -> Jet:
        acc = Jet.zero(chart)
        for m_ in range(n):
            for l in range(n):
                acc = acc + ginv[m_, l] * gamma[j, m_, l].dx(k)
        return acc

    c0 = JetMatrix.zeros(chart, n, n)
    for a in range(nn):
        for b in range(nn):
            entry = contracted(a, b)
            for c in range(nn):
                entry = entry + (lam + mu) * inv_mu * ginv[a, c] \
                    * trace_low(b).dx(c)
                entry = entry - inv_mu * mu.dx(c) * ginv[a, c].dx(b)
            entry = entry + inv_mu * nabla_up(lam, a) * trace_low(b)
            c0.entries[a][b] = entry
        entry = contracted(a, nn)
        for c in range(nn):
            entry = entry + (lam + mu) * inv_mu * ginv[a, c] * trace_low_n.dx(c)
            entry = entry - inv_mu * mu.dx(c) * ginv[a, c].dn()
        entry = entry + inv_mu * nabla_up(lam, a) * trace_low_n
        c0.entries[a][nn] = entry
    for b in range(nn):
        c0.entries[nn][b] = (lam + mu) * inv_l2m * trace_low(b).dn() \
            + mu * inv_l2m * contracted(nn, b) \
            + inv_l2m * lam.dn() * trace_low(b)
    c0.entries[nn][nn] = (lam + mu) * inv_l2m * trace_low_n.dn() \
        + mu * inv_l2m * contracted(nn, nn) \
        + inv_l2m * lam.dn() * trace_low_n

    # the two rank-structured matrices of the factorization algebra
    f1 = JetMatrix.zeros(chart, n, n)
    f2 = JetMatrix.zeros(chart, n, n)
    for a in range(nn):
        for b in range(nn):
            f1.entries[a][b] = inv_norm * xi_up[a] * xi_down[b]
            f2.entries[a][b] = f1.entries[a][b]
        f1.entries[a][nn] = 1j * xi_up[a]
        f1.entries[nn][a] = 1j * xi_down[a]
        f2.entries[a][nn] = -1j * (lam + 2 * mu) * inv_mu * xi_up[a]
        f2.entries[nn][a] = -1j * mu * inv_l2m * xi_down[a]
    f1.entries[nn][nn] = -norm
    f2.entries[nn][nn] = -norm

    return SymbolContext(
        chart=chart, metric=metric, lame=lame, g=g, ginv=ginv, gamma=gamma,
        xi_down=xi_down, xi_up=xi_up, norm_sq=norm_sq, norm=norm,
        inv_norm=inv_norm, s2=s2,
        lead=leading_coefficient(lame, chart),
        lead_inv=leading_coefficient_inverse(lame, chart),
        b1=b1, b0=b0, c2=c2, c1=c1, c0=c0, f1=f1, f2=f2)


def q1(ctx: SymbolContext) -> JetMatrix:
    """Principal level of the half-space factor."""
    n = ctx.chart.dimension
    return JetMatrix.identity(ctx.chart, n) * ctx.norm + ctx.f1 * ctx.s2


# -- the level recursion ---------------------------------------------------


class _DerivativeCache:
    """Memoized tangential derivatives of level matrices."""

    def __init__(self, levels: dict):
        self.levels = levels
        self.memo = {}

    def get(self, degree: int, axis: str, J: tuple) -> JetMatrix:
        key = (degree, axis, J)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if not any(J):
            result = self.levels[degree]
        else:
            a = next(i for i, e in enumerate(J) if e)
            lowered = J[:a] + (J[a] - 1,) + J[a + 1:]
            parent = self.get(degree, axis, lowered)
            result = parent.dxi(a) if axis == "xi" else parent.dx(a)
        self.memo[key] = result
        return result


def _multi_indices(nvars: int, total: int):
    if total == 0:
        yield (0,) * nvars
        return
    for combo in combinations_with_replacement(range(nvars), total):
        J = [0] * nvars
        for idx in combo:
            J[idx] += 1
        yield tuple(J)


def _factorial_multi(J: tuple) -> int:
    import math

    return math.prod(math.factorial(e) for e in J)


def build_E(m: int, q: "SymbolLevels | dict", ctx: SymbolContext,
            _cache: _DerivativeCache | None = None) -> JetMatrix:
    """Right-hand side driving the level of degree -(m+1); defined for m >= -1.

    Requires the levels q_1 .. q_{-m} (with enough accuracy for every
    tangential derivative pairing of combined order m + j + k).
    """
    if m < -1:
        raise ValueError("m must be >= -1")
    levels = q.levels if isinstance(q, SymbolLevels) else q
    for degree in range(1, -m - 1, -1):
        if degree not in levels:
            raise KeyError(f"missing level of degree {degree} while building "
                           f"the degree-{-m - 1} right-hand side")
    cache = _cache if _cache is not None else _DerivativeCache(levels)
    nn = ctx.chart.dimension - 1

    def dxi(degree, J):
        return cache.get(degree, "xi", J)

    def dx(degree, J):
        return cache.get(degree, "x", J)

    def unit(a):
        return tuple(1 if i == a else 0 for i in range(nn))

    try:
        if m == -1:
            qq = levels[1]
            out = ctx.b0 @ qq + qq.partial(ctx.chart.x_index(ctx.chart.dimension - 1))
            out = out - ctx.c1
            for a in range(nn):
                out = out + 1j * ((dxi(1, unit(a)) - ctx.b1.dxi(a)) @ dx(1, unit(a)))
            return out
        if m == 0:
            q0 = levels[0]
            out = ctx.b0 @ q0 + q0.partial(ctx.chart.x_index(ctx.chart.dimension - 1))
            out = out - ctx.c0 - q0 @ q0
            for a in range(nn):
                out = out + 1j * ((dxi(1, unit(a)) - ctx.b1.dxi(a)) @ dx(0, unit(a)))
                out = out + 1j * (dxi(0, unit(a)) @ dx(1, unit(a)))
            for a in range(nn):
                for b in range(nn):
                    Ja = unit(a)
                    Jab = tuple(x + y for x, y in zip(Ja, unit(b)))
                    out = out + 0.5 * (dxi(1, Jab) @ dx(1, Jab))
            return out
        qm = levels[-m]
        out = ctx.b0 @ qm + qm.partial(ctx.chart.x_index(ctx.chart.dimension - 1))
        for a in range(nn):
            out = out - 1j * (ctx.b1.dxi(a) @ dx(-m, unit(a)))
        for j in range(-m, 2):
            for k in range(-m, 2):
                order = j + k + m
                if order < 0:
                    continue
                phase = (-1j) ** order
                for J in _multi_indices(nn, order):
                    coeff = phase / _factorial_multi(J)
                    out = out - coeff * (dxi(j, J) @ dx(k, J))
        return out
    except AccuracyExhausted as exc:
        raise AccuracyExhausted(
            f"accuracy exhausted while building the degree-{-m - 1} "
            f"right-hand side: {exc}") from exc


def solve_q(E: JetMatrix, ctx: SymbolContext) -> JetMatrix:
    """Solve q1 X + X q1 - b1 X = E for the next level down.

    Closed form: E/(2r) - s2 (F2 E + E F1)/(4 r^2) + s2^2 F2 E F1/(4 r^3)
    with r the cotangent norm.  (Expanding with the nilpotency of F1, F2
    and b1 = s2 (F1 - F2) confirms this is the exact inverse of the map.)
    """
    inv_norm = ctx.inv_norm
    s2 = ctx.s2
    half = 0.5 * inv_norm
    quarter_sq = 0.25 * s2 * inv_norm * inv_norm
    quarter_cu = 0.25 * s2 * s2 * inv_norm * inv_norm * inv_norm
    f2e = ctx.f2 @ E
    ef1 = E @ ctx.f1
    f2ef1 = f2e @ ctx.f1
    return E * half - (f2e + ef1) * quarter_sq + f2ef1 * quarter_cu


def p1_matrix(ctx: SymbolContext) -> JetMatrix:
    """Principal boundary symbol in closed form."""
    chart = ctx.chart
    n = chart.dimension
    nn = n - 1
    lam, mu = ctx.lame.lam, ctx.lame.mu
    inv_l3m = reciprocal(lam + 3 * mu)
    out = JetMatrix.zeros(chart, n, n)
    for a in range(nn):
        for b in range(nn):
            entry = mu * (lam + mu) * inv_l3m * ctx.inv_norm \
                * ctx.xi_up[a] * ctx.xi_down[b]
            if a == b:
                entry = entry + mu * ctx.norm
            out.entries[a][b] = entry
        out.entries[a][nn] = -2j * mu * mu * inv_l3m * ctx.xi_up[a]
        out.entries[nn][a] = 2j * mu * mu * inv_l3m * ctx.xi_down[a]
    out.entries[nn][nn] = 2 * mu * (lam + 2 * mu) * inv_l3m * ctx.norm
    return out


def _gamma_correction(ctx: SymbolContext) -> JetMatrix:
    """Connection-trace correction entering the degree-zero boundary level."""
    chart = ctx.chart
    n = chart.dimension
    nn = n - 1
    out = JetMatrix.zeros(chart, n, n)
    for b in range(nn):
        acc = Jet.zero(chart)
        for c in range(nn):
            acc = acc + ctx.gamma[c, c, b]
        out.entries[nn][b] = ctx.lame.lam * acc
    acc = Jet.zero(chart)
    for c in range(nn):
        acc = acc + ctx.gamma[c, c, nn]
    out.entries[nn][nn] = ctx.lame.lam * acc
    return out


def q_levels(ctx: SymbolContext, depth: int) -> SymbolLevels:
    """Factor levels q_1 down to q_{-depth}; may stop early on exhaustion."""
    levels = {1: q1(ctx)}
    cache = _DerivativeCache(levels)
    for m in range(-1, depth):
        try:
            rhs = build_E(m, levels, ctx, _cache=cache)
            levels[-m - 1] = solve_q(rhs, ctx)
        except AccuracyExhausted:
            break
    return SymbolLevels("q", levels)


def dtn_symbols(ctx: SymbolContext, M: int) -> SymbolLevels:
    """Boundary symbol levels p_1 .. p_{-M}.

    Requires truncation order K >= M + 3 so the recursion keeps enough
    trusted degrees.  If accuracy runs out mid-recursion, the levels
    computed so far are returned; callers compare ``depth`` against M.
    """
    if M < 0:
        raise ValueError("M must be >= 0")
    K = ctx.chart.truncation_order
    if K < M + 3:
        raise AccuracyExhausted(
            f"truncation order {K} supports at most depth {K - 3}; "
            f"depth {M} was requested (need K >= M + 3)")
    q = q_levels(ctx, depth=M)
    p = {1: p1_matrix(ctx)}
    if 0 in q.levels:
        p[0] = ctx.lead @ q.levels[0] - _gamma_correction(ctx)
    for m in range(1, M + 1):
        if -m not in q.levels:
            break
        p[-m] = ctx.lead @ q.levels[-m]
    return SymbolLevels("p", p)


# -- plane-wave consistency -------------------------------------------------


def _plane_wave(chart: JetContext) -> Jet:
    """exp(i <x', xi0>) as a truncated jet in the tangential x-variables."""
    import math

    coeffs = {}
    n = chart.dimension
    for mono in chart.monomials:
        if any(mono[n:]) or mono[n - 1]:
            continue
        value = 1.0 + 0.0j
        for a in range(n - 1):
            e = mono[a]
            if e:
                value *= (1j * chart.base_covector[a]) ** e / math.factorial(e)
        coeffs[mono] = value
    return Jet.from_coefficients(chart, coeffs)


def plane_wave_consistency(ctx: SymbolContext, metric: MetricJet,
                           lame: LameJet) -> dict:
    """Compare the symbol matrices against the differential operators.

    Applies the first-order and tangential operator blocks to plane waves
    v * exp(i <x', xi0>) for basis vectors v and checks the base-point
    values against (b1 + b0) v and (c2 + c1 + c0) v.  Exact for
    differential operators up to roundoff.
    """
    from .geometry import VectorFieldJet, apply_B, apply_C

    chart = ctx.chart
    n = chart.dimension
    geo = prepare(metric)
    wave = _plane_wave(chart)
    b_total = ctx.b1 + ctx.b0
    c_total = ctx.c2 + ctx.c1 + ctx.c0
    b_residual = 0.0
    c_residual = 0.0
    for j in range(n):
        comps = [wave if k == j else Jet.zero(chart) for k in range(n)]
        field = VectorFieldJet(comps)
        op_b = apply_B(field, geo, lame)
        op_c = apply_C(field, geo, lame)
        for k in range(n):
            b_residual = max(b_residual, abs(op_b.components[k].constant_term
                                             - b_total[k, j].constant_term))
            c_residual = max(c_residual, abs(op_c.components[k].constant_term
                                             - c_total[k, j].constant_term))
    return {
        "b_residual": b_residual,
        "c_residual": c_residual,
        "max_residual": max(b_residual, c_residual),
    }
