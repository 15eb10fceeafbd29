"""Boundary-normal-coordinate geometry over jets.

Conventions: coordinates x_1..x_n with x_n the distance to the boundary,
so the full metric has unit normal-normal entry and vanishing mixed
entries; only the tangential block g_{alpha beta}(x) varies.  Greek
indices run over 0..n-2 (tangential), Roman over 0..n-1, with n-1 the
normal direction.  All tensors are matrices/arrays of jets.

The module carries the isotropic elastic operator in two independent
forms: once assembled from covariant derivatives (``lame_apply``) and once
as a normal-direction second-order system (``apply_decomposition``).
Their agreement, after scaling rows by the leading coefficient matrix, is
the module's central oracle and is exercised heavily in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import (
    AccuracyExhausted,
    Jet,
    JetContext,
    JetMatrix,
    mat_inverse,
    reciprocal,
)

_REALITY_TOL = 1e-12
_EIGEN_TOL = 1e-10


def _require_real_spatial(jet: Jet, what: str) -> Jet:
    if jet.max_imag(trusted=False) > _REALITY_TOL:
        raise ValueError(f"{what} must be real")
    if jet.depends_on_xi():
        raise ValueError(f"{what} must not depend on the cotangent variables")
    return jet.real_part()


@dataclass(frozen=True)
class MetricJet:
    """Tangential metric block g_{alpha beta}(x) as real jets."""

    context: JetContext
    entries: tuple

    def __init__(self, context: JetContext, entries):
        n = context.dimension
        rows = [list(r) for r in entries]
        if len(rows) != n - 1 or any(len(r) != n - 1 for r in rows):
            raise ValueError(f"metric block must be {n - 1}x{n - 1}")
        for a in range(n - 1):
            for b in range(n - 1):
                rows[a][b] = _require_real_spatial(rows[a][b], "metric entry")
        for a in range(n - 1):
            for b in range(a + 1, n - 1):
                if not rows[a][b].allclose(rows[b][a], tol=_REALITY_TOL):
                    raise ValueError(f"metric block not symmetric at ({a},{b})")
                sym = (rows[a][b] + rows[b][a]) * 0.5
                rows[a][b] = sym
                rows[b][a] = sym
        const = np.array([[rows[a][b].constant_term.real for b in range(n - 1)]
                          for a in range(n - 1)])
        if np.min(np.linalg.eigvalsh(const)) <= _EIGEN_TOL:
            raise ValueError("metric block must be positive definite at the base point")
        object.__setattr__(self, "context", context)
        object.__setattr__(self, "entries", tuple(tuple(r) for r in rows))

    @classmethod
    def euclidean(cls, context: JetContext) -> "MetricJet":
        n = context.dimension
        one = Jet.constant(context, 1.0)
        zero = Jet.zero(context)
        return cls(context, [[one if a == b else zero for b in range(n - 1)]
                             for a in range(n - 1)])

    def tangential_matrix(self) -> JetMatrix:
        return JetMatrix(self.context, [list(r) for r in self.entries])


@dataclass(frozen=True)
class LameJet:
    """The two material coefficient fields as real jets in x."""

    lam: Jet
    mu: Jet

    def __init__(self, lam: Jet, mu: Jet):
        lam = _require_real_spatial(lam, "lambda coefficient")
        mu = _require_real_spatial(mu, "mu coefficient")
        mu0 = mu.constant_term.real
        lam0 = lam.constant_term.real
        if not (mu0 > 0.0 and lam0 + mu0 >= 0.0):
            raise ValueError(
                "inadmissible material coefficients: require mu > 0 and "
                f"lambda + mu >= 0 at the base point (got mu={mu0:g}, "
                f"lambda+mu={lam0 + mu0:g})"
            )
        # implied, but the symbol denominators rely on them
        assert lam0 + 2 * mu0 > 0.0 and lam0 + 3 * mu0 > 0.0
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def constant(cls, context: JetContext, lam: float, mu: float) -> "LameJet":
        return cls(Jet.constant(context, lam), Jet.constant(context, mu))


@dataclass(frozen=True)
class ChristoffelField:
    """Connection coefficients Gamma^j_{kl}, symmetric in the lower pair."""

    context: JetContext
    symbols: tuple  # [j][k][l] -> Jet

    def __getitem__(self, jkl):
        j, k, l = jkl
        return self.symbols[j][k][l]


@dataclass(frozen=True)
class VectorFieldJet:
    components: tuple

    def __init__(self, components):
        components = tuple(components)
        ctx = components[0].context
        for c in components[1:]:
            if c.context is not ctx and not c.context.compatible_with(ctx):
                raise ValueError("vector components on incompatible contexts")
        if len(components) != ctx.dimension:
            raise ValueError("vector field needs one component per dimension")
        object.__setattr__(self, "components", components)

    @property
    def context(self) -> JetContext:
        return self.components[0].context

    @property
    def accuracy(self) -> int:
        return min(c.accuracy for c in self.components)

    def __add__(self, other: "VectorFieldJet") -> "VectorFieldJet":
        return VectorFieldJet([a + b for a, b in
                               zip(self.components, other.components)])

    def __sub__(self, other: "VectorFieldJet") -> "VectorFieldJet":
        return VectorFieldJet([a - b for a, b in
                               zip(self.components, other.components)])

    def allclose(self, other: "VectorFieldJet", tol: float = 1e-12) -> bool:
        return all(a.allclose(b, tol) for a, b in
                   zip(self.components, other.components))

    def max_abs(self) -> float:
        return max(c.max_abs() for c in self.components)


def assemble_full_metric(metric: MetricJet) -> JetMatrix:
    """Embed the tangential block: unit normal entry, no mixed entries."""
    ctx = metric.context
    n = ctx.dimension
    full = JetMatrix.zeros(ctx, n, n)
    for a in range(n - 1):
        for b in range(n - 1):
            full.entries[a][b] = metric.entries[a][b]
    full.entries[n - 1][n - 1] = Jet.constant(ctx, 1.0)
    return full


def tangential_block(full: JetMatrix) -> JetMatrix:
    n = full.context.dimension
    return JetMatrix(full.context,
                     [[full[a, b] for b in range(n - 1)] for a in range(n - 1)])


def christoffel(g: JetMatrix, ginv: JetMatrix) -> ChristoffelField:
    ctx = g.context
    n = ctx.dimension
    dg = [[[g[k, m].dx(l) for l in range(n)] for m in range(n)] for k in range(n)]
    out = []
    for j in range(n):
        plane = []
        for k in range(n):
            row = []
            for l in range(k + 1):
                acc = Jet.zero(ctx)
                for m in range(n):
                    acc = acc + ginv[j, m] * (dg[k][m][l] + dg[l][m][k] - dg[k][l][m])
                row.append(acc * 0.5)
            plane.append(row)
        out.append(plane)
    # fill the symmetric upper part exactly
    full = [[[out[j][max(k, l)][min(k, l)] for l in range(n)]
             for k in range(n)] for j in range(n)]
    return ChristoffelField(ctx, tuple(tuple(tuple(r) for r in p) for p in full))


def ricci(gamma: ChristoffelField) -> JetMatrix:
    ctx = gamma.context
    n = ctx.dimension
    out = JetMatrix.zeros(ctx, n, n)
    for k in range(n):
        for l in range(n):
            acc = Jet.zero(ctx)
            for j in range(n):
                acc = acc + gamma[j, k, l].dx(j) - gamma[j, j, l].dx(k)
                for m in range(n):
                    acc = acc + gamma[j, j, m] * gamma[m, k, l] \
                              - gamma[j, k, m] * gamma[m, j, l]
            out.entries[k][l] = acc
    return out


@dataclass(frozen=True)
class _Geometry:
    g: JetMatrix
    ginv: JetMatrix
    gamma: ChristoffelField


def prepare(metric: MetricJet) -> _Geometry:
    g = assemble_full_metric(metric)
    ginv = mat_inverse(g)
    return _Geometry(g, ginv, christoffel(g, ginv))


def _check_vector(u: VectorFieldJet) -> None:
    if u.accuracy < 2:
        raise AccuracyExhausted("vector field accuracy below 2")


def lame_apply(u: VectorFieldJet, metric: MetricJet, lame: LameJet) -> VectorFieldJet:
    """Apply the isotropic elastic operator assembled covariantly.

    Components: mu * (Bochner Laplacian) + (lambda+mu) * grad div
    + mu * Ricci action + (grad lambda) * div + strain(u) applied to
    grad mu, all expressed through the connection of the full metric.
    """
    _check_vector(u)
    geo = prepare(metric)
    ctx = u.context
    n = ctx.dimension
    g, ginv, gamma = geo.g, geo.ginv, geo.gamma
    lam, mu = lame.lam, lame.mu
    comps = u.components

    # nabla_k u^j
    cov = [[comps[j].dx(k) for k in range(n)] for j in range(n)]
    for j in range(n):
        for k in range(n):
            for l in range(n):
                cov[j][k] = cov[j][k] + gamma[j, k, l] * comps[l]

    div_u = cov[0][0]
    for k in range(1, n):
        div_u = div_u + cov[k][k]

    # second covariant derivative of the (1,1) tensor, contracted to the
    # Bochner Laplacian g^{km} nabla_m nabla_k u^j
    bochner = []
    for j in range(n):
        acc = Jet.zero(ctx)
        for k in range(n):
            for m in range(n):
                term = cov[j][k].dx(m)
                for l in range(n):
                    term = term + gamma[j, m, l] * cov[l][k] \
                                - gamma[l, m, k] * cov[j][l]
                acc = acc + ginv[k, m] * term
        bochner.append(acc)

    def raise_gradient(f: Jet) -> list[Jet]:
        df = [f.dx(k) for k in range(n)]
        return [sum((ginv[j, k] * df[k] for k in range(1, n)),
                    ginv[j, 0] * df[0]) for j in range(n)]

    grad_div = raise_gradient(div_u)
    grad_lam = raise_gradient(lam)
    grad_mu = raise_gradient(mu)

    ric = ricci(gamma)
    ric_u = []
    for j in range(n):
        acc = Jet.zero(ctx)
        for k in range(n):
            for l in range(n):
                acc = acc + ginv[j, k] * ric[k, l] * comps[l]
        ric_u.append(acc)

    # strain (S u)^j_k = nabla^j u_k + nabla_k u^j, lowered field u_k
    low = [sum((g[k, l] * comps[l] for l in range(1, n)), g[k, 0] * comps[0])
           for k in range(n)]
    cov_low = [[low[k].dx(m) for m in range(n)] for k in range(n)]
    for m in range(n):
        for k in range(n):
            for l in range(n):
                cov_low[k][m] = cov_low[k][m] - gamma[l, m, k] * low[l]
    strain = [[cov[j][k] for k in range(n)] for j in range(n)]
    for j in range(n):
        for k in range(n):
            for m in range(n):
                strain[j][k] = strain[j][k] + ginv[j, m] * cov_low[k][m]

    out = []
    for j in range(n):
        term = mu * bochner[j] + (lam + mu) * grad_div[j] + mu * ric_u[j] \
            + grad_lam[j] * div_u
        for k in range(n):
            term = term + strain[j][k] * grad_mu[k]
        out.append(term)
    return VectorFieldJet(out)


# -- the normal-direction second-order system ---------------------------
#
# The first- and zeroth-order coefficient matrices below are transcribed
# directly as differential operators.  The symbol module re-transcribes
# them independently as functions of the cotangent variable; the
# plane-wave consistency check ties the two transcriptions together.


def leading_coefficient(lame: LameJet, context: JetContext) -> JetMatrix:
    """Diagonal factor scaling the elastic operator's normal second order."""
    n = context.dimension
    diag = [lame.mu] * (n - 1) + [lame.lam + 2 * lame.mu]
    return JetMatrix.diagonal(context, diag)


def leading_coefficient_inverse(lame: LameJet, context: JetContext) -> JetMatrix:
    n = context.dimension
    inv_mu = reciprocal(lame.mu)
    diag = [inv_mu] * (n - 1) + [reciprocal(lame.lam + 2 * lame.mu)]
    return JetMatrix.diagonal(context, diag)


def normal_multiplier_matrix(geo: _Geometry, lame: LameJet) -> JetMatrix:
    """Zeroth-order coefficient of the first-order block of the system."""
    ctx = geo.g.context
    n = ctx.dimension
    nn = n - 1
    ginv, gamma = geo.ginv, geo.gamma
    lam, mu = lame.lam, lame.mu
    inv_mu = reciprocal(mu)
    inv_l2m = reciprocal(lam + 2 * mu)

    trace_gn = Jet.zero(ctx)
    for c in range(nn):
        trace_gn = trace_gn + gamma[c, c, nn]

    out = JetMatrix.zeros(ctx, n, n)
    for a in range(nn):
        for b in range(nn):
            entry = 2 * gamma[a, b, nn]
            if a == b:
                entry = entry + trace_gn + inv_mu * mu.dn()
            out.entries[a][b] = entry
        nabla_lam = Jet.zero(ctx)
        for b in range(nn):
            nabla_lam = nabla_lam + ginv[a, b] * lam.dx(b)
        out.entries[a][nn] = inv_mu * nabla_lam
    for b in range(nn):
        trace_gb = Jet.zero(ctx)
        for c in range(nn):
            trace_gb = trace_gb + gamma[c, c, b]
        out.entries[nn][b] = (lam + mu) * inv_l2m * trace_gb + inv_l2m * mu.dx(b)
    out.entries[nn][nn] = trace_gn + inv_l2m * (lam + 2 * mu).dn()
    return out


def zeroth_order_matrix(geo: _Geometry, lame: LameJet) -> JetMatrix:
    """Multiplier part of the tangential block of the system."""
    ctx = geo.g.context
    n = ctx.dimension
    nn = n - 1
    ginv, gamma = geo.ginv, geo.gamma
    lam, mu = lame.lam, lame.mu
    inv_mu = reciprocal(mu)
    inv_l2m = reciprocal(lam + 2 * mu)

    def trace_low(b: int) -> Jet:
        acc = Jet.zero(ctx)
        for c in range(nn):
            acc = acc + gamma[c, c, b]
        return acc

    trace_low_n = Jet.zero(ctx)
    for c in range(nn):
        trace_low_n = trace_low_n + gamma[c, c, nn]

    def contracted(j: int, k: int) -> Jet:
        # g^{ml} d_k Gamma^j_{ml}, Roman sum
        acc = Jet.zero(ctx)
        for m in range(n):
            for l in range(n):
                acc = acc + ginv[m, l] * gamma[j, m, l].dx(k)
        return acc

    def nabla_up(f: Jet, a: int) -> Jet:
        acc = Jet.zero(ctx)
        for b in range(nn):
            acc = acc + ginv[a, b] * f.dx(b)
        return acc

    out = JetMatrix.zeros(ctx, n, n)
    for a in range(nn):
        for b in range(nn):
            entry = contracted(a, b)
            for c in range(nn):
                entry = entry + (lam + mu) * inv_mu * ginv[a, c] * trace_low(b).dx(c)
            entry = entry + inv_mu * nabla_up(lam, a) * trace_low(b)
            for c in range(nn):
                entry = entry - inv_mu * mu.dx(c) * ginv[a, c].dx(b)
            out.entries[a][b] = entry
        entry = contracted(a, nn)
        for c in range(nn):
            entry = entry + (lam + mu) * inv_mu * ginv[a, c] * trace_low_n.dx(c)
        entry = entry + inv_mu * nabla_up(lam, a) * trace_low_n
        for b in range(nn):
            entry = entry - inv_mu * mu.dx(b) * ginv[a, b].dn()
        out.entries[a][nn] = entry
    for b in range(nn):
        out.entries[nn][b] = (lam + mu) * inv_l2m * trace_low(b).dn() \
            + mu * inv_l2m * contracted(nn, b) \
            + inv_l2m * lam.dn() * trace_low(b)
    out.entries[nn][nn] = (lam + mu) * inv_l2m * trace_low_n.dn() \
        + mu * inv_l2m * contracted(nn, nn) \
        + inv_l2m * lam.dn() * trace_low_n
    return out


def apply_B(v: VectorFieldJet, geo: _Geometry, lame: LameJet) -> VectorFieldJet:
    """First-order coefficient block applied to a vector of jets."""
    ctx = v.context
    n = ctx.dimension
    nn = n - 1
    ginv = geo.ginv
    lam, mu = lame.lam, lame.mu
    inv_mu = reciprocal(mu)
    inv_l2m = reciprocal(lam + 2 * mu)
    comps = v.components

    out = []
    for a in range(nn):
        term = Jet.zero(ctx)
        for b in range(nn):
            term = term + (lam + mu) * inv_mu * ginv[a, b] * comps[nn].dx(b)
        out.append(term)
    last = Jet.zero(ctx)
    for b in range(nn):
        last = last + (lam + mu) * inv_l2m * comps[b].dx(b)
    out.append(last)

    mult = normal_multiplier_matrix(geo, lame)
    for j in range(n):
        for k in range(n):
            out[j] = out[j] + mult[j, k] * comps[k]
    return VectorFieldJet(out)


def apply_C(v: VectorFieldJet, geo: _Geometry, lame: LameJet) -> VectorFieldJet:
    """Tangential block (second, first and zeroth order) applied to a vector."""
    ctx = v.context
    n = ctx.dimension
    nn = n - 1
    ginv, gamma = geo.ginv, geo.gamma
    lam, mu = lame.lam, lame.mu
    inv_mu = reciprocal(mu)
    inv_l2m = reciprocal(lam + 2 * mu)
    s_ratio = (lam + mu) * inv_mu
    comps = v.components

    def tangential_laplace(f: Jet) -> Jet:
        acc = Jet.zero(ctx)
        for a in range(nn):
            for b in range(nn):
                acc = acc + ginv[a, b] * f.dx(a).dx(b)
        return acc

    def scalar_first_order(f: Jet) -> Jet:
        # (g^{ab} Gamma^c_{ac} + d_a g^{ab}) d_b f
        acc = Jet.zero(ctx)
        for a in range(nn):
            for b in range(nn):
                coef = ginv[a, b].dx(a)
                for c in range(nn):
                    coef = coef + ginv[a, b] * gamma[c, a, c]
                acc = acc + coef * f.dx(b)
        return acc

    def nabla_up(f: Jet, a: int) -> Jet:
        acc = Jet.zero(ctx)
        for b in range(nn):
            acc = acc + ginv[a, b] * f.dx(b)
        return acc

    trace_gn = Jet.zero(ctx)
    for c in range(nn):
        trace_gn = trace_gn + gamma[c, c, nn]
    trace_g = []
    for b in range(nn):
        acc = Jet.zero(ctx)
        for c in range(nn):
            acc = acc + gamma[c, c, b]
        trace_g.append(acc)

    out = []
    for a in range(nn):
        term = tangential_laplace(comps[a])
        for c in range(nn):
            for b in range(nn):
                term = term + s_ratio * ginv[a, c] * comps[b].dx(c).dx(b)
        term = term + scalar_first_order(comps[a])
        for c in range(nn):
            term = term + s_ratio * ginv[a, c] * trace_gn * comps[nn].dx(c)
            for b in range(nn):
                term = term + s_ratio * ginv[a, c] * trace_g[b] * comps[b].dx(c)
        for c in range(nn):
            for r in range(nn):
                term = term + 2 * ginv[c, r] * gamma[a, r, nn] * comps[nn].dx(c)
                for b in range(nn):
                    term = term + 2 * ginv[c, r] * gamma[a, r, b] * comps[b].dx(c)
        for c in range(nn):
            term = term + inv_mu * nabla_up(mu, c) * comps[a].dx(c)
        for b in range(nn):
            term = term + inv_mu * nabla_up(lam, a) * comps[b].dx(b)
            for c in range(nn):
                term = term + inv_mu * ginv[a, c] * mu.dx(b) * comps[b].dx(c)
        for b in range(nn):
            term = term + inv_mu * mu.dn() * ginv[a, b] * comps[nn].dx(b)
        out.append(term)

    last = mu * inv_l2m * tangential_laplace(comps[nn]) \
        + mu * inv_l2m * scalar_first_order(comps[nn])
    for c in range(nn):
        for r in range(nn):
            for b in range(nn):
                last = last + 2 * mu * inv_l2m * ginv[c, r] * gamma[nn, r, b] \
                    * comps[b].dx(c)
    for b in range(nn):
        last = last + inv_l2m * lam.dn() * comps[b].dx(b)
    for c in range(nn):
        last = last + inv_l2m * nabla_up(mu, c) * comps[nn].dx(c)
    out.append(last)

    mult = zeroth_order_matrix(geo, lame)
    for j in range(n):
        for k in range(n):
            out[j] = out[j] + mult[j, k] * comps[k]
    return VectorFieldJet(out)


def apply_decomposition(u: VectorFieldJet, metric: MetricJet,
                        lame: LameJet) -> VectorFieldJet:
    """Normal second derivative plus the first/zeroth-order blocks.

    Multiplying ``lame_apply`` by the inverse leading coefficient must
    reproduce this componentwise; the tests enforce it on random scenes.
    """
    _check_vector(u)
    geo = prepare(metric)
    nidx = u.context.normal_index
    du = VectorFieldJet([c.partial(nidx) for c in u.components])
    d2u = VectorFieldJet([c.partial(nidx) for c in du.components])
    first = apply_B(du, geo, lame)
    zero = apply_C(u, geo, lame)
    return VectorFieldJet([a + b + c for a, b, c in
                           zip(d2u.components, first.components, zero.components)])
