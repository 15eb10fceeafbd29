import numpy as np
import pytest

from elastic_dtn import AccuracyExhausted, Jet, JetContext, JetMatrix, mat_inverse
from elastic_dtn.geometry import LameJet, MetricJet
from elastic_dtn.scenes import random_scene
from elastic_dtn.symbols import (
    SymbolLevels,
    build_context,
    build_E,
    dtn_symbols,
    p1_matrix,
    plane_wave_consistency,
    q1,
    q_levels,
    solve_q,
)


def euclidean_context(n=2, K=6, xi0=None, lam=1.0, mu=1.0):
    ctx = JetContext(n, K, xi0 or (1.0,) * (n - 1))
    metric = MetricJet.euclidean(ctx)
    lame = LameJet.constant(ctx, lam, mu)
    return build_context(metric, lame, ctx), metric, lame


def hand_scene_context(K=6):
    """n=2, g_11 = 1 + x_n, lambda = mu = 1, base covector 1."""
    ctx = JetContext(2, K, (1.0,))
    metric = MetricJet(ctx, [[1 + Jet.x_var(ctx, 1)]])
    lame = LameJet.constant(ctx, 1.0, 1.0)
    return build_context(metric, lame, ctx), metric, lame


def random_context(seed, dimension=2, K=6):
    scene = random_scene(seed, dimension=dimension, truncation_order=K)
    return build_context(scene.metric, scene.lame, scene.context), scene


def assert_entry(matrix, i, j, value, tol=1e-12):
    assert abs(matrix[i, j].constant_term - value) < tol, (
        f"entry ({i},{j}) = {matrix[i, j].constant_term}, expected {value}")


def test_context_euclidean_closed_forms():
    ctx, _, _ = euclidean_context()
    assert_entry(ctx.b1, 0, 1, 2j)
    assert_entry(ctx.b1, 1, 0, 2j / 3)
    assert_entry(ctx.b1, 0, 0, 0)
    assert_entry(ctx.c2, 0, 0, -3.0)
    assert_entry(ctx.c2, 1, 1, -1.0 / 3.0)
    assert_entry(ctx.c2, 0, 1, 0)
    assert_entry(ctx.f1, 0, 0, 1.0)
    assert_entry(ctx.f1, 0, 1, 1j)
    assert_entry(ctx.f1, 1, 0, 1j)
    assert_entry(ctx.f1, 1, 1, -1.0)
    assert ctx.b0.is_zero() and ctx.c1.is_zero() and ctx.c0.is_zero()


def test_q1_euclidean_and_degenerate():
    ctx, _, _ = euclidean_context()
    principal = q1(ctx)
    assert_entry(principal, 0, 0, 1.5)
    assert_entry(principal, 0, 1, 0.5j)
    assert_entry(principal, 1, 0, 0.5j)
    assert_entry(principal, 1, 1, 0.5)
    # lambda + mu = 0 collapses the rank-structured part
    ctx0, _, _ = euclidean_context(lam=-1.0, mu=1.0)
    expected = JetMatrix.identity(ctx0.chart, 2) * ctx0.norm
    assert q1(ctx0).allclose(expected)


def test_riccati_identity_random_scenes():
    for n in (2, 3):
        for seed in range(3):
            ctx, _ = random_context(seed, dimension=n)
            principal = q1(ctx)
            residual = principal @ principal - ctx.b1 @ principal + ctx.c2
            assert residual.max_abs() < 1e-10


def test_f_matrices_nilpotent_and_b1_bridge():
    for seed in range(3):
        ctx, _ = random_context(seed, dimension=3)
        assert (ctx.f1 @ ctx.f1).max_abs() < 1e-12
        assert (ctx.f2 @ ctx.f2).max_abs() < 1e-12
        bridge = (ctx.f1 - ctx.f2) * ctx.s2
        assert bridge.allclose(ctx.b1, tol=1e-11)


def random_matrix(ctx, rng, degree=2):
    n = ctx.chart.dimension
    entries = []
    for _ in range(n):
        row = []
        for _ in range(n):
            coeffs = {}
            for m in ctx.chart.monomials:
                if sum(m) > degree:
                    continue
                coeffs[m] = rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)
            row.append(Jet.from_coefficients(ctx.chart, coeffs))
        entries.append(row)
    return JetMatrix(ctx.chart, entries)


def test_solve_q_zero_and_defining_equation():
    ctx, _ = random_context(4, dimension=2)
    zero = JetMatrix.zeros(ctx.chart, 2, 2)
    assert solve_q(zero, ctx).is_zero()
    rng = np.random.default_rng(0)
    principal = q1(ctx)
    for _ in range(3):
        E = random_matrix(ctx, rng)
        X = solve_q(E, ctx)
        residual = principal @ X + X @ principal - ctx.b1 @ X - E
        assert residual.max_abs() < 1e-10


def test_solve_q_expansion_oracle():
    # Expansion of the solution through the nilpotent algebra: with
    # a = s2/(2r), the solution equals (E - a(F2 E + E F1) + 2 a^2 F2 E F1)/(2r).
    ctx, _ = random_context(9, dimension=3)
    rng = np.random.default_rng(1)
    a = 0.5 * ctx.s2 * ctx.inv_norm
    half = 0.5 * ctx.inv_norm
    for _ in range(2):
        E = random_matrix(ctx, rng)
        expected = (E - (ctx.f2 @ E + E @ ctx.f1) * a
                    + (ctx.f2 @ E @ ctx.f1) * (2.0 * a * a)) * half
        assert solve_q(E, ctx).allclose(expected, tol=1e-12)


def test_build_E_euclidean_cascade():
    ctx, _, _ = euclidean_context(K=6)
    levels = q_levels(ctx, depth=3)
    assert build_E(-1, levels, ctx).max_abs() < 1e-13
    assert build_E(0, levels, ctx).max_abs() < 1e-13
    assert build_E(1, levels, ctx).max_abs() < 1e-12
    for degree in (0, -1, -2, -3):
        assert levels.levels[degree].max_abs() < 1e-12


def test_hand_scene_frozen_values():
    # Frozen by hand from the displayed boundary combinations: both
    # (F2 E1)^n_n and (E1 F1)^n_n equal -7/12 at the base point, the
    # degree-0 factor level has (n,n) entry 1/4, and so does the
    # degree-0 boundary level.
    ctx, _, _ = hand_scene_context(K=6)
    levels = q_levels(ctx, depth=1)
    E1 = build_E(-1, {1: levels.levels[1]}, ctx)
    f2e1 = (ctx.f2 @ E1)[1, 1].constant_term
    e1f1 = (E1 @ ctx.f1)[1, 1].constant_term
    assert abs(f2e1 - (-7.0 / 12.0)) < 1e-12
    assert abs(e1f1 - (-7.0 / 12.0)) < 1e-12
    assert abs(levels.levels[0][1, 1].constant_term - 0.25) < 1e-12
    symbols = dtn_symbols(ctx, 1)
    assert abs(symbols.level(0)[1, 1].constant_term - 0.25) < 1e-12


def test_build_E_missing_level():
    ctx, _, _ = euclidean_context()
    with pytest.raises(KeyError):
        build_E(0, {1: q1(ctx)}, ctx)


def test_dtn_symbols_euclidean_closed_form():
    ctx, _, _ = euclidean_context(K=6)
    symbols = dtn_symbols(ctx, 2)
    p1 = symbols.level(1)
    assert_entry(p1, 0, 0, 1.5)
    assert_entry(p1, 0, 1, -0.5j)
    assert_entry(p1, 1, 0, 0.5j)
    assert_entry(p1, 1, 1, 1.5)
    assert symbols.level(0).max_abs() < 1e-10
    assert symbols.level(-1).max_abs() < 1e-10
    assert symbols.level(-2).max_abs() < 1e-10


def test_p1_nn_entry_closed_form_random():
    for seed in range(3):
        ctx, scene = random_context(seed, dimension=3)
        from elastic_dtn.jets import reciprocal

        lam, mu = ctx.lame.lam, ctx.lame.mu
        expected = 2 * mu * (lam + 2 * mu) * reciprocal(lam + 3 * mu) * ctx.norm
        n = scene.dimension
        assert p1_matrix(ctx)[n - 1, n - 1].allclose(expected, tol=1e-10)


def test_p1_self_adjoint_with_metric_weight():
    # (g p1) is Hermitian; entrywise Hermitian holds in the Euclidean case.
    ctx, _, _ = euclidean_context(K=5)
    p1 = p1_matrix(ctx)
    assert p1.allclose(p1.conjugate_transpose(), tol=1e-10)
    for seed in range(2):
        ctx, scene = random_context(seed, dimension=3)
        weighted = ctx.g @ p1_matrix(ctx)
        assert weighted.allclose(weighted.conjugate_transpose(), tol=1e-10)


def test_dtn_symbols_requires_margin():
    ctx, _, _ = euclidean_context(K=4)
    with pytest.raises(AccuracyExhausted):
        dtn_symbols(ctx, 2)


def test_plane_wave_consistency():
    ctx, metric, lame = euclidean_context(K=5)
    report = plane_wave_consistency(ctx, metric, lame)
    assert report["max_residual"] < 1e-13
    for n in (2, 3):
        for seed in range(3):
            ctx, scene = random_context(seed, dimension=n, K=5)
            report = plane_wave_consistency(ctx, scene.metric, scene.lame)
            assert report["max_residual"] < 1e-9, (n, seed, report)


def _boundary_inverse_data(scene):
    """True boundary jets: g^{ab}, its first two normal derivatives."""
    ginv_t = mat_inverse(scene.metric.tangential_matrix())
    g0 = ginv_t.at_boundary()
    g1 = ginv_t.dx(scene.dimension - 1).at_boundary()
    g2 = ginv_t.dx(scene.dimension - 1).dx(scene.dimension - 1).at_boundary()
    return ginv_t, g0, g1, g2


def _quadratic_form(ctx_chart, k_matrix):
    nn = ctx_chart.dimension - 1
    xi = [Jet.xi_component(ctx_chart, a) for a in range(nn)]
    acc = Jet.zero(ctx_chart)
    for a in range(nn):
        for b in range(nn):
            acc = acc + k_matrix[a][b] * xi[a] * xi[b]
    return acc


def test_difference_law_first_order():
    # Perturbing only the first normal-order metric coefficients moves the
    # degree-zero boundary level's (n,n) entry by exactly the quadratic
    # form built from the first-order recovery combination.
    scene = random_scene(21, dimension=2, truncation_order=6)
    ctx_a = build_context(scene.metric, scene.lame, scene.context)
    chart = scene.context
    xn = Jet.x_var(chart, 1)
    delta = 0.3
    entries_b = [[scene.metric.entries[0][0] + delta * xn]]
    metric_b = MetricJet(chart, entries_b)
    ctx_b = build_context(metric_b, scene.lame, chart)

    sym_a = dtn_symbols(ctx_a, 0)
    sym_b = dtn_symbols(ctx_b, 0)
    diff = (sym_b.level(0)[1, 1] - sym_a.level(0)[1, 1]).at_boundary()

    lam = scene.lame.lam.at_boundary()
    mu = scene.lame.mu.at_boundary()
    from elastic_dtn.jets import reciprocal

    ginv_a = mat_inverse(scene.metric.tangential_matrix())
    ginv_b = mat_inverse(metric_b.tangential_matrix())
    g_low = scene.metric.tangential_matrix().at_boundary()

    def k1(ginv_t):
        g0 = ginv_t.at_boundary()
        g1 = ginv_t.dx(1).at_boundary()
        h1 = g_low[0, 0] * g1[0, 0]
        return [[(2 * lam + 5 * mu) * h1 * g0[0, 0]
                 - (lam + 2 * mu) * g1[0, 0]]]

    delta_k = [[k1(ginv_b)[0][0] - k1(ginv_a)[0][0]]]
    law = -(mu * mu) * _quadratic_form(chart, delta_k) \
        * reciprocal((lam + 3 * mu) * (lam + 3 * mu)) \
        * reciprocal(ctx_a.norm_sq.at_boundary())
    assert diff.allclose(law, tol=1e-9)


def test_difference_law_first_order_dimension3():
    # same law with a full 2x2 tangential block: checks every index
    # contraction in the first-order recovery combination
    scene = random_scene(23, dimension=3, truncation_order=6)
    chart = scene.context
    ctx_a = build_context(scene.metric, scene.lame, chart)
    xn = Jet.x_var(chart, 2)
    bump = [[0.25, -0.15], [-0.15, 0.1]]
    entries_b = [[scene.metric.entries[a][b] + bump[a][b] * xn
                  for b in range(2)] for a in range(2)]
    metric_b = MetricJet(chart, entries_b)
    ctx_b = build_context(metric_b, scene.lame, chart)

    diff = (dtn_symbols(ctx_b, 0).level(0)[2, 2]
            - dtn_symbols(ctx_a, 0).level(0)[2, 2]).at_boundary()

    lam = scene.lame.lam.at_boundary()
    mu = scene.lame.mu.at_boundary()
    from elastic_dtn.jets import reciprocal

    g_low = scene.metric.tangential_matrix().at_boundary()

    def k1(metric):
        ginv_t = mat_inverse(metric.tangential_matrix())
        g0 = ginv_t.at_boundary()
        g1 = ginv_t.dx(2).at_boundary()
        h1 = Jet.zero(chart)
        for a in range(2):
            for b in range(2):
                h1 = h1 + g_low[a, b] * g1[a, b]
        return [[(2 * lam + 5 * mu) * h1 * g0[a, b]
                 - (lam + 2 * mu) * g1[a, b] for b in range(2)]
                for a in range(2)]

    ka, kb = k1(scene.metric), k1(metric_b)
    delta_k = [[kb[a][b] - ka[a][b] for b in range(2)] for a in range(2)]
    law = -(mu * mu) * _quadratic_form(chart, delta_k) \
        * reciprocal((lam + 3 * mu) * (lam + 3 * mu)) \
        * reciprocal(ctx_a.norm_sq.at_boundary())
    assert diff.allclose(law, tol=1e-9)


def test_difference_law_second_order():
    # Same statement one level down: a pure second-normal-order metric
    # perturbation moves the degree-zero right-hand side's (n,n) entry by
    # the second-order recovery combination.
    scene = random_scene(22, dimension=2, truncation_order=6)
    chart = scene.context
    ctx_a = build_context(scene.metric, scene.lame, chart)
    xn = Jet.x_var(chart, 1)
    delta = 0.4
    metric_b = MetricJet(chart,
                         [[scene.metric.entries[0][0] + delta * 0.5 * xn * xn]])
    ctx_b = build_context(metric_b, scene.lame, chart)

    levels_a = q_levels(ctx_a, depth=1)
    levels_b = q_levels(ctx_b, depth=1)
    e0_a = build_E(0, levels_a, ctx_a)
    e0_b = build_E(0, levels_b, ctx_b)
    diff = (e0_b[1, 1] - e0_a[1, 1]).at_boundary()

    lam = scene.lame.lam.at_boundary()
    mu = scene.lame.mu.at_boundary()
    from elastic_dtn.jets import reciprocal

    g_low = scene.metric.tangential_matrix().at_boundary()

    def k2(metric):
        ginv_t = mat_inverse(metric.tangential_matrix())
        g0 = ginv_t.at_boundary()
        g2 = ginv_t.dx(1).dx(1).at_boundary()
        h2 = g_low[0, 0] * g2[0, 0]
        return [[(2 * lam + 5 * mu) * h2 * g0[0, 0]
                 - (lam + 2 * mu) * g2[0, 0]]]

    delta_k = [[k2(metric_b)[0][0] - k2(scene.metric)[0][0]]]
    law = -(mu * mu) * _quadratic_form(chart, delta_k) \
        * reciprocal((lam + 3 * mu) * (lam + 3 * mu)) \
        * reciprocal(lam + 2 * mu) \
        * reciprocal(ctx_a.norm_sq.at_boundary())
    assert diff.allclose(law, tol=1e-9)


def test_symbol_levels_structure():
    ctx, _, _ = euclidean_context()
    with pytest.raises(ValueError):
        SymbolLevels("p", {1: p1_matrix(ctx), -1: p1_matrix(ctx)})  # gap
    with pytest.raises(ValueError):
        SymbolLevels("x", {1: p1_matrix(ctx)})
    levels = dtn_symbols(ctx, 1)
    assert levels.depth == 1
    assert levels.min_degree == -1
    with pytest.raises(KeyError):
        levels.level(-3)
