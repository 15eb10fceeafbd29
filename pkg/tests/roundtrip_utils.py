"""Shared helpers for forward/recover round-trip testing."""

from elastic_dtn import Jet, mat_inverse
from elastic_dtn.recovery import ObservedSymbols
from elastic_dtn.symbols import build_context, dtn_symbols


def forward_observed(scene, M):
    ctx = build_context(scene.metric, scene.lame, scene.context)
    symbols = dtn_symbols(ctx, M)
    return ObservedSymbols(symbols, scene.lame, scene.context), ctx


def true_inverse_derivatives(scene, M):
    """Boundary jets of the true inverse tangential metric and derivatives."""
    ginv = mat_inverse(scene.metric.tangential_matrix())
    nidx = scene.dimension - 1
    out = [ginv.at_boundary()]
    current = ginv
    for _ in range(M):
        current = current.dx(nidx)
        out.append(current.at_boundary())
    return out


def rel_err(a: Jet, b: Jet) -> float:
    return (a - b).max_abs() / max(b.max_abs(), 1.0)
