"""Layer-peeling recovery of the boundary metric from observed symbol levels.

Order zero inverts the (n,n) entry of the principal level for the
cotangent norm, whose exact Hessian in the offset variables is the inverse
tangential metric.  Each higher order m then (i) extends the data
recovered so far to a reference chart with zero normal derivatives of
order m and above, (ii) reruns the forward engine on the reference,
(iii) differences the observed and reference levels of degree 1-m, so
every remainder term depending only on lower-order data cancels exactly,
and (iv) reads the order-m normal derivative off the quadratic form left
behind.  All steps work on boundary restrictions and carry full
tangential jets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import LameJet, MetricJet
from .jets import (
    AccuracyExhausted,
    Jet,
    JetContext,
    JetMatrix,
    mat_inverse,
    reciprocal,
)
from .scenes import SceneError
from .symbols import SymbolContext, SymbolLevels, build_context, dtn_symbols

QUADRATICITY_TOL = 1e-6
IMAGINARY_TOL = 1e-9


class ConsistencyError(Exception):
    """Observed data failed an exactness gate; maps to CLI exit code 4."""


@dataclass(frozen=True)
class ObservedSymbols:
    """Input of the inverse direction: levels of kind "p" plus known data."""

    p: SymbolLevels
    lame: LameJet
    chart: JetContext

    def __post_init__(self):
        if self.p.kind != "p":
            raise SceneError(f"observed symbols must have kind 'p', got {self.p.kind!r}")
        top = self.p.level(1)
        if not top.context.compatible_with(self.chart):
            raise SceneError("observed levels and chart disagree")
        n = self.chart.dimension
        corner = top[n - 1, n - 1].constant_term
        if not (corner.real > 0 and abs(corner.imag) <= 1e-9 * max(1.0, corner.real)):
            raise SceneError(
                f"principal level's (n,n) entry must have a positive real "
                f"constant term, got {corner}")

    def require_depth(self, M: int) -> None:
        if self.p.min_degree > 1 - M:
            raise SceneError(
                f"recovering order {M} needs the level of degree {1 - M}; "
                f"observed levels stop at degree {self.p.min_degree}")


@dataclass
class RecoveredBoundaryData:
    """Inverse tangential metric and its normal derivatives, order by order."""

    context: JetContext
    g_inv: tuple
    normal_derivs: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        nn = self.context.dimension - 1
        rows = [list(r) for r in self.g_inv]
        if len(rows) != nn or any(len(r) != nn for r in rows):
            raise ValueError(f"recovered block must be {nn}x{nn}")
        for a in range(nn):
            for b in range(a + 1, nn):
                if not rows[a][b].allclose(rows[b][a], tol=1e-10):
                    raise ValueError("recovered block must be symmetric")
        const = np.array([[rows[a][b].constant_term.real for b in range(nn)]
                          for a in range(nn)])
        if np.min(np.linalg.eigvalsh(const)) <= 0:
            raise ValueError("recovered block must be positive definite "
                             "at the base point")


def _realify(jet: Jet, tol: float, where: str) -> tuple[Jet, float]:
    worst = jet.max_imag()
    if worst > tol:
        raise ConsistencyError(
            f"{where}: imaginary residual {worst:.3g} exceeds {tol:g}")
    return jet.real_part(), worst


def extract_quadratic(Q: Jet, tol: float = QUADRATICITY_TOL):
    """Read a quadratic form in the covector off a scalar jet.

    Returns the symmetric coefficient block as tangential jets (the exact
    half-Hessian in the offset variables) together with a diagnostics
    dict; the residual after rebuilding the quadratic form must stay
    below ``tol``, otherwise the input was not a quadratic form.
    """
    ctx = Q.context
    if Q.accuracy < 2:
        raise AccuracyExhausted("quadratic extraction needs accuracy >= 2")
    nn = ctx.dimension - 1
    block = [[None] * nn for _ in range(nn)]
    for a in range(nn):
        for b in range(a, nn):
            entry = (Q.dxi(a).dxi(b) * 0.5).xi_free_part()
            block[a][b] = entry
            block[b][a] = entry
    xi = [Jet.xi_component(ctx, a) for a in range(nn)]
    rebuilt = Jet.zero(ctx)
    for a in range(nn):
        for b in range(nn):
            rebuilt = rebuilt + block[a][b] * xi[a] * xi[b]
    residual = (Q - rebuilt).max_abs()
    if residual > tol:
        raise ConsistencyError(
            f"observed level inconsistent with quadratic-form model "
            f"(residual {residual:.3g} > {tol:g})")
    return block, {"quadraticity": residual}


def extract_quadratic_sampled(Q: Jet):
    """Polarization cross-check: sample the form on covector pairs.

    Evaluates the offset variables at e_a - xi0 and e_a + e_b - xi0 and
    polarizes; returns the coefficient block as x-jets.  Less precise
    than the Hessian route and used only as an optional diagnostic.
    """
    ctx = Q.context
    nn = ctx.dimension - 1
    xi0 = np.array(ctx.base_covector)

    def value_at(covector):
        return Q.substitute_xi(np.asarray(covector) - xi0)

    diag = [value_at(np.eye(nn)[a]) for a in range(nn)]
    block = [[None] * nn for _ in range(nn)]
    for a in range(nn):
        block[a][a] = diag[a]
        for b in range(a + 1, nn):
            both = value_at(np.eye(nn)[a] + np.eye(nn)[b])
            off = (both - diag[a] - diag[b]) * 0.5
            block[a][b] = off
            block[b][a] = off
    return block


def recover_order0(obs: ObservedSymbols, quadraticity_tol: float = QUADRATICITY_TOL,
                   imaginary_tol: float = IMAGINARY_TOL):
    """Boundary inverse metric (with tangential jets) from the principal level."""
    chart = obs.chart
    n = chart.dimension
    lam = obs.lame.lam.at_boundary()
    mu = obs.lame.mu.at_boundary()
    corner = obs.p.level(1)[n - 1, n - 1].at_boundary()
    norm_rec = (lam + 3 * mu) * corner * reciprocal(2 * (mu * (lam + 2 * mu)))
    if norm_rec.constant_term.real <= 0:
        raise ConsistencyError("recovered cotangent norm is not positive")
    norm_sq = norm_rec * norm_rec
    block, diag = extract_quadratic(norm_sq, tol=quadraticity_tol)
    worst_imag = 0.0
    out = [[None] * (n - 1) for _ in range(n - 1)]
    for a in range(n - 1):
        for b in range(n - 1):
            jet, imag = _realify(block[a][b], imaginary_tol,
                                 f"inverse metric entry ({a},{b})")
            out[a][b] = jet.trusted_only()
            worst_imag = max(worst_imag, imag)
    const = np.array([[out[a][b].constant_term.real for b in range(n - 1)]
                      for a in range(n - 1)])
    if np.min(np.linalg.eigvalsh(const)) <= 0:
        raise ConsistencyError("recovered inverse metric is not positive definite")
    diag["imaginary"] = worst_imag
    return tuple(tuple(r) for r in out), diag


def lin_inverse(X: JetMatrix, ctx: SymbolContext) -> JetMatrix:
    """Map a level back to the right-hand side it solves.

    This is the exact inverse of :func:`elastic_dtn.symbols.solve_q`:
    X -> 2 r X + s2 (F2 X + X F1), which by the nilpotency of F1 and F2
    inverts the closed-form solution in both orders of composition.
    """
    return X * (2 * ctx.norm) + (ctx.f2 @ X + X @ ctx.f1) * ctx.s2


def _exactified(jet: Jet) -> Jet:
    # zero extension beyond the trusted degree turns recovered data into
    # the exact polynomial that defines the reference chart
    return jet.trusted_only().with_accuracy(jet.context.truncation_order)


def _reference_metric(chart: JetContext, partial: RecoveredBoundaryData,
                      order: int) -> MetricJet:
    """Chart matching recovered data below ``order``, zero at and above it."""
    import math

    nn = chart.dimension - 1
    xn = Jet.x_var(chart, chart.normal_index)
    entries = [[_exactified(partial.g_inv[a][b]) for b in range(nn)]
               for a in range(nn)]
    for j in range(1, order):
        deriv = partial.normal_derivs[j - 1]
        weight = xn ** j * (1.0 / math.factorial(j))
        for a in range(nn):
            for b in range(nn):
                entries[a][b] = entries[a][b] + _exactified(deriv[a][b]) * weight
    ginv_ref = JetMatrix(chart, entries)
    g_ref = mat_inverse(ginv_ref)
    return MetricJet(chart, [[g_ref[a, b].real_part() for b in range(nn)]
                             for a in range(nn)])


def _boundary_symbol_context(obs: ObservedSymbols,
                             partial: RecoveredBoundaryData) -> SymbolContext:
    chart = obs.chart
    nn = chart.dimension - 1
    ginv = JetMatrix(chart, [[partial.g_inv[a][b] for b in range(nn)]
                             for a in range(nn)])
    g_low = mat_inverse(ginv)
    metric = MetricJet(chart, [[g_low[a, b].real_part() for b in range(nn)]
                               for a in range(nn)])
    lame_b = LameJet(obs.lame.lam.at_boundary(), obs.lame.mu.at_boundary())
    return build_context(metric, lame_b, chart)


def recover_normal_derivative(m: int, obs: ObservedSymbols,
                              partial: RecoveredBoundaryData,
                              quadraticity_tol: float = QUADRATICITY_TOL,
                              imaginary_tol: float = IMAGINARY_TOL):
    """Order-m normal derivative of the inverse metric by peeling.

    Needs the observed level of degree 1-m and all recovered orders below
    m inside ``partial``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(partial.normal_derivs) < m - 1:
        raise ValueError(f"recovering order {m} needs orders 1..{m - 1} first")
    obs.require_depth(m)
    chart = obs.chart
    n = chart.dimension
    nn = n - 1

    reference = _reference_metric(chart, partial, m)
    ctx_ref = build_context(reference, obs.lame, chart)
    sym_ref = dtn_symbols(ctx_ref, m - 1)
    if sym_ref.depth < m - 1:
        raise AccuracyExhausted(
            f"reference forward run reached depth {sym_ref.depth}, "
            f"order {m} needs {m - 1}")

    level_obs = obs.p.level(1 - m).at_boundary()
    level_ref = sym_ref.level(1 - m).at_boundary()
    delta = level_obs - level_ref

    lam = obs.lame.lam.at_boundary()
    mu = obs.lame.mu.at_boundary()
    ctx_b = _boundary_symbol_context(obs, partial)
    if m == 1:
        residual_entry = delta[nn, nn]
    else:
        # One application maps the level difference back to its right-hand
        # side; each further application converts the matrix into the
        # normal derivative of the right-hand side one level up, modulo
        # terms that the reference subtraction has already cancelled.
        # After m - 1 applications the (n,n) entry carries the order-m
        # quadratic form.
        inv_mu = reciprocal(mu)
        inv_l2m = reciprocal(lam + 2 * mu)
        lead_inv = JetMatrix.diagonal(chart, [inv_mu] * nn + [inv_l2m])
        delta_rhs = lead_inv @ delta
        for _ in range(m - 1):
            delta_rhs = lin_inverse(delta_rhs, ctx_b)
        residual_entry = delta_rhs[nn, nn]

    scale = (lam + 3 * mu) * (lam + 3 * mu) * reciprocal(mu * mu)
    if m >= 2:
        scale = scale * (lam + 2 * mu)
    form = -residual_entry * scale * ctx_b.norm_sq

    # Peeling is law-exact only below a tangential-degree threshold: data
    # of order j is trusted to its stored accuracy, and the recursion
    # applies up to m - j tangential derivatives to it on the way to the
    # level of degree 1 - m.  Cap the form there before extraction.
    spans = [min(partial.g_inv[a][b].accuracy for a in range(nn)
                 for b in range(nn))]
    for deriv in partial.normal_derivs[: m - 1]:
        spans.append(min(deriv[a][b].accuracy for a in range(nn)
                         for b in range(nn)))
    trust = min(spans[j] - (m - j) for j in range(len(spans)))
    if trust < 0:
        raise AccuracyExhausted(
            f"peeling trust exhausted at order {m} (tangential span {trust})")
    form = form.x_degree_cap(trust).with_accuracy(min(form.accuracy, trust + 2))

    block, diag = extract_quadratic(form, tol=quadraticity_tol)
    diag["tangential_trust"] = trust

    g_low = mat_inverse(JetMatrix(chart, [[partial.g_inv[a][b]
                                           for b in range(nn)]
                                          for a in range(nn)]))
    trace = Jet.zero(chart)
    for a in range(nn):
        for b in range(nn):
            trace = trace + block[a][b] * g_low[a, b]
    denom = nn * (2 * lam + 5 * mu) - (lam + 2 * mu)
    denom_const = denom.constant_term.real
    if denom_const <= 0:
        raise ConsistencyError(
            f"trace denominator must be positive, got {denom_const:g}")
    h = trace * reciprocal(denom)

    inv_l2m = reciprocal(lam + 2 * mu)
    worst_imag = 0.0
    out = [[None] * nn for _ in range(nn)]
    for a in range(nn):
        for b in range(nn):
            entry = ((2 * lam + 5 * mu) * h * partial.g_inv[a][b]
                     - block[a][b]) * inv_l2m
            jet, imag = _realify(entry, imaginary_tol,
                                 f"order-{m} derivative entry ({a},{b})")
            out[a][b] = jet.trusted_only()
            worst_imag = max(worst_imag, imag)
    diag.update({
        "imaginary": worst_imag,
        "residual_scale": residual_entry.max_abs(),
        "trace_denominator": denom_const,
    })
    return tuple(tuple(r) for r in out), diag


def recover_full(obs: ObservedSymbols, M: int,
                 quadraticity_tol: float = QUADRATICITY_TOL,
                 imaginary_tol: float = IMAGINARY_TOL,
                 cross_check: bool = False) -> RecoveredBoundaryData:
    """Run order zero and then peel orders 1..M sequentially."""
    if M < 0:
        raise ValueError("M must be >= 0")
    obs.require_depth(M)
    g_inv, diag0 = recover_order0(obs, quadraticity_tol, imaginary_tol)
    diagnostics = {
        "quadraticity": diag0["quadraticity"],
        "imaginary": diag0["imaginary"],
        "orders_recovered": 0,
        "peeling": {},
    }
    data = RecoveredBoundaryData(obs.chart, g_inv, [], diagnostics)
    if cross_check:
        diagnostics["cross_check"] = _cross_check_residual(obs, g_inv)
    for m in range(1, M + 1):
        try:
            block, diag = recover_normal_derivative(
                m, obs, data, quadraticity_tol, imaginary_tol)
        except (ConsistencyError, AccuracyExhausted) as exc:
            raise type(exc)(f"order {m}: {exc}") from exc
        data.normal_derivs.append(block)
        diagnostics["quadraticity"] = max(diagnostics["quadraticity"],
                                          diag["quadraticity"])
        diagnostics["imaginary"] = max(diagnostics["imaginary"],
                                       diag["imaginary"])
        diagnostics["peeling"][m] = diag
        diagnostics["orders_recovered"] = m
    return data


def _cross_check_residual(obs: ObservedSymbols, g_inv) -> float:
    """Deviation between Hessian and polarization extraction at order 0."""
    chart = obs.chart
    n = chart.dimension
    lam = obs.lame.lam.at_boundary()
    mu = obs.lame.mu.at_boundary()
    corner = obs.p.level(1)[n - 1, n - 1].at_boundary()
    norm_rec = (lam + 3 * mu) * corner * reciprocal(2 * (mu * (lam + 2 * mu)))
    sampled = extract_quadratic_sampled(norm_rec * norm_rec)
    worst = 0.0
    for a in range(n - 1):
        for b in range(n - 1):
            worst = max(worst, (sampled[a][b] - g_inv[a][b]).max_abs())
    return worst
