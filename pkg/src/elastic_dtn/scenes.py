"""Scene configuration, random scene sampling, and the JSON jet codecs.

A *scene* is one admissible boundary chart: dimension, truncation order,
base covector, tangential metric jets, the two material coefficient jets,
plus the requested recursion depth and optional tolerance overrides.

File conventions (schema 1): complex numbers are ``[re, im]`` pairs, jet
coefficient maps key space-separated exponent strings ``"e1 e2 ... "``
over the ``2n-1`` variables (the n x-variables first, then the n-1
cotangent offsets), and metric blocks key ``"a,b"`` with 1-based indices
``a <= b``; symmetry is filled in.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .geometry import LameJet, MetricJet
from .jets import Jet, JetContext

SCHEMA_VERSION = 1

_METRIC_KEY = re.compile(r"^(\d+),(\d+)$")

DEFAULT_TOLERANCES = {
    "roundtrip": 1e-6,
    "quadraticity": 1e-6,
    "imaginary": 1e-9,
    "identity": 1e-9,
    "algebra": 1e-10,
}


class SceneError(Exception):
    """A scene document failed validation; maps to CLI exit code 2."""


@dataclass
class SceneConfig:
    dimension: int
    truncation_order: int
    base_covector: tuple
    metric: MetricJet
    lame: LameJet
    context: JetContext
    order: int = 3
    seed: int | None = None
    tolerances: dict = field(default_factory=dict)

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))


# -- JSON primitives -----------------------------------------------------


def complex_to_json(value: complex) -> list:
    value = complex(value)
    return [value.real, value.imag]


def complex_from_json(value, where: str = "value") -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(p, (int, float)) for p in value)):
        return complex(value[0], value[1])
    raise SceneError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def jet_to_map(jet: Jet) -> dict:
    out = {}
    for exps, value in jet.coefficients().items():
        if value == 0:
            continue
        out[" ".join(str(e) for e in exps)] = complex_to_json(value)
    return out


def jet_from_map(context: JetContext, data: dict, where: str = "jet",
                 accuracy: int | None = None) -> Jet:
    if not isinstance(data, dict):
        raise SceneError(f"{where}: expected a coefficient map, got {type(data).__name__}")
    coeffs = {}
    for key, value in data.items():
        parts = key.split()
        if len(parts) != context.nvars or not all(p.isdigit() for p in parts):
            raise SceneError(
                f"{where}: bad exponent key {key!r} "
                f"(need {context.nvars} space-separated non-negative integers)")
        exps = tuple(int(p) for p in parts)
        if sum(exps) > context.truncation_order:
            raise SceneError(
                f"{where}: exponent key {key!r} exceeds truncation order "
                f"{context.truncation_order}")
        coeffs[exps] = complex_from_json(value, f"{where}[{key!r}]")
    jet = Jet.from_coefficients(context, coeffs)
    if accuracy is not None:
        jet = jet.with_accuracy(accuracy)
    return jet


def context_to_json(context: JetContext) -> dict:
    return {
        "dimension": context.dimension,
        "truncation_order": context.truncation_order,
        "base_covector": list(context.base_covector),
    }


def context_from_json(data: dict, where: str = "chart") -> JetContext:
    try:
        return JetContext(int(data["dimension"]), int(data["truncation_order"]),
                          [float(v) for v in data["base_covector"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"{where}: invalid chart: {exc}") from exc


def metric_to_json(metric: MetricJet) -> dict:
    n = metric.context.dimension
    out = {}
    for a in range(n - 1):
        for b in range(a, n - 1):
            out[f"{a + 1},{b + 1}"] = jet_to_map(metric.entries[a][b])
    return out


def metric_from_json(context: JetContext, data: dict) -> MetricJet:
    n = context.dimension
    zero = Jet.zero(context)
    entries = [[zero for _ in range(n - 1)] for _ in range(n - 1)]
    seen = set()
    for key, jet_map in data.items():
        match = _METRIC_KEY.match(key)
        if not match:
            raise SceneError(f"metric: malformed key {key!r} (expected 'a,b')")
        a, b = int(match.group(1)), int(match.group(2))
        if not (1 <= a <= b <= n - 1):
            raise SceneError(
                f"metric: key {key!r} out of range (need 1 <= a <= b <= {n - 1})")
        jet = jet_from_map(context, jet_map, where=f"metric[{key!r}]")
        if jet.max_imag(trusted=False) > 1e-12:
            raise SceneError(f"metric[{key!r}]: coefficients must be real")
        entries[a - 1][b - 1] = jet
        entries[b - 1][a - 1] = jet
        seen.add((a, b))
    for a in range(1, n):
        if (a, a) not in seen:
            raise SceneError(f"metric: missing diagonal key '{a},{a}'")
    try:
        return MetricJet(context, entries)
    except ValueError as exc:
        raise SceneError(f"metric: {exc}") from exc


def lame_from_json(context: JetContext, lam_map: dict, mu_map: dict) -> LameJet:
    lam = jet_from_map(context, lam_map, where="lambda")
    mu = jet_from_map(context, mu_map, where="mu")
    try:
        return LameJet(lam, mu)
    except ValueError as exc:
        raise SceneError(str(exc)) from exc


# -- scene documents ------------------------------------------------------


def scene_to_json(scene: SceneConfig) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "dimension": scene.dimension,
        "truncation_order": scene.truncation_order,
        "base_covector": list(scene.base_covector),
        "metric": metric_to_json(scene.metric),
        "lambda": jet_to_map(scene.lame.lam),
        "mu": jet_to_map(scene.lame.mu),
        "order": scene.order,
    }
    if scene.seed is not None:
        doc["seed"] = scene.seed
    if scene.tolerances:
        doc["tolerances"] = scene.tolerances
    return doc


def scene_from_json(data: dict) -> SceneConfig:
    if not isinstance(data, dict):
        raise SceneError("scene: expected a JSON object")
    for key in ("dimension", "truncation_order", "base_covector", "metric",
                "lambda", "mu"):
        if key not in data:
            raise SceneError(f"scene: missing required key {key!r}")
    try:
        n = int(data["dimension"])
        order = int(data.get("order", 3))
    except (TypeError, ValueError) as exc:
        raise SceneError(f"scene: {exc}") from exc
    context = context_from_json(
        {
            "dimension": n,
            "truncation_order": data["truncation_order"],
            "base_covector": data["base_covector"],
        },
        where="scene",
    )
    if order < 0:
        raise SceneError("scene: order must be >= 0")
    if context.truncation_order < order + 3:
        raise SceneError(
            f"scene: truncation order {context.truncation_order} too small for "
            f"order {order} (need truncation_order >= order + 3)")
    metric = metric_from_json(context, data["metric"])
    lame = lame_from_json(context, data["lambda"], data["mu"])
    seed = data.get("seed")
    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise SceneError("scene: tolerances must be an object")
    unknown = set(tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise SceneError(f"scene: unknown tolerance keys {sorted(unknown)}")
    return SceneConfig(
        dimension=n,
        truncation_order=context.truncation_order,
        base_covector=context.base_covector,
        metric=metric,
        lame=lame,
        context=context,
        order=order,
        seed=None if seed is None else int(seed),
        tolerances={k: float(v) for k, v in tolerances.items()},
    )


def load_scene(path) -> SceneConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SceneError(f"cannot read scene file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"scene file is not valid JSON: {exc}") from exc
    return scene_from_json(data)


# -- random admissible scenes ---------------------------------------------


def _random_spatial_jet(context: JetContext, rng, degree: int,
                        amplitude: float) -> Jet:
    coeffs = {}
    n = context.dimension
    for m in context.monomials:
        d = sum(m)
        if d == 0 or d > degree or any(m[n:]):
            continue
        coeffs[m] = rng.uniform(-amplitude, amplitude) * 0.5 ** (d - 1)
    return Jet.from_coefficients(context, coeffs)


def random_scene(seed: int, dimension: int = 2, truncation_order: int = 6,
                 degree: int = 3, order: int = 3,
                 amplitude: float = 0.15) -> SceneConfig:
    """Draw an admissible scene: perturbed flat metric, safe coefficients."""
    rng = np.random.default_rng(seed)
    order = min(order, truncation_order - 3)
    n = dimension
    xi0 = rng.uniform(0.6, 1.4, size=n - 1) * rng.choice([-1.0, 1.0], size=n - 1)
    context = JetContext(n, truncation_order, xi0)

    base = rng.uniform(-1.0, 1.0, size=(n - 1, n - 1))
    const = np.eye(n - 1) + 0.2 * (base + base.T) / 2.0
    entries = [[None] * (n - 1) for _ in range(n - 1)]
    for a in range(n - 1):
        for b in range(a, n - 1):
            jet = _random_spatial_jet(context, rng, degree, amplitude)
            jet = jet + const[a][b]
            entries[a][b] = jet
            entries[b][a] = jet
    metric = MetricJet(context, entries)

    lam = _random_spatial_jet(context, rng, degree, amplitude * 0.6) \
        + rng.uniform(0.3, 1.2)
    mu = _random_spatial_jet(context, rng, degree, amplitude * 0.6) \
        + rng.uniform(0.6, 1.5)
    lame = LameJet(lam, mu)
    return SceneConfig(
        dimension=n,
        truncation_order=truncation_order,
        base_covector=context.base_covector,
        metric=metric,
        lame=lame,
        context=context,
        order=order,
        seed=seed,
    )


def random_vector_field(context: JetContext, rng, degree: int = 3,
                        amplitude: float = 0.5):
    from .geometry import VectorFieldJet

    comps = []
    n = context.dimension
    for _ in range(n):
        coeffs = {}
        for m in context.monomials:
            if sum(m) > degree or any(m[n:]):
                continue
            coeffs[m] = (rng.uniform(-amplitude, amplitude)
                         + 1j * rng.uniform(-amplitude, amplitude))
        comps.append(Jet.from_coefficients(context, coeffs))
    return VectorFieldJet(comps)


# -- canonical output ------------------------------------------------------


def canonical_json(document) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def atomic_write_json(path, document) -> None:
    text = canonical_json(document)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
