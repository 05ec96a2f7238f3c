import logging

import numpy as np
from scipy.stats import norm

from src.core.errors import SpaceValidationError
from src.models.schemas import SmacParams
from src.models.space import INACTIVE, Configuration, ParameterSpace, ParamKind
from src.services.configurators.smac.encoder import scale, unscale
from src.services.configurators.smac.forest import RandomForestModel
from src.services.space.operations import sample_uniform

_LOCAL_SEARCH_MAX_STEPS = 50


def expected_improvement(mean, variance, best_log_cost: float):
    """
    Expected improvement below `best_log_cost` under a normal predictive distribution.
    Zero-variance points get max(0, best - mean). Accepts scalars or arrays.
    """
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    gap = best_log_cost - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, gap / np.where(sigma > 0, sigma, 1.0), 0.0)
        ei = np.where(sigma > 0, gap * norm.cdf(z) + sigma * norm.pdf(z), np.maximum(gap, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def _score(model: RandomForestModel, configs: list[Configuration], best_log_cost: float) -> np.ndarray:
    mean, variance = model.marginal_many(configs)
    return expected_improvement(mean, variance, best_log_cost)


def local_neighbors(
    space: ParameterSpace, config: Configuration, rng: np.random.Generator, sd: float, per_numeric: int
) -> list[Configuration]:
    """
    Every other value of each active categorical, plus `per_numeric` Gaussian steps of
    scaled width `sd` for each active numeric. Forbidden results are dropped.
    """
    result = []
    for spec in space.parameters:
        value = config[spec.name]
        if value is INACTIVE:
            continue
        if spec.kind is ParamKind.CATEGORICAL:
            moves = [choice for choice in spec.choices if choice != value]
        else:
            position = scale(spec, value)
            moves = [unscale(spec, position + sd * rng.standard_normal()) for _ in range(per_numeric)]
            moves = [move for move in moves if move != value]
        for move in moves:
            try:
                candidate = config.replace(**{spec.name: move})
            except SpaceValidationError:
                continue
            if not space.is_forbidden(candidate):
                result.append(candidate)
    return result


def local_search(
    model: RandomForestModel,
    start: Configuration,
    best_log_cost: float,
    rng: np.random.Generator,
    params: SmacParams,
) -> tuple[Configuration, float]:
    """Best-improvement hill climbing on expected improvement."""
    current = start
    current_ei = float(_score(model, [start], best_log_cost)[0])
    for _ in range(_LOCAL_SEARCH_MAX_STEPS):
        options = local_neighbors(
            start.space, current, rng, params.local_search_sd, params.local_search_neighbors
        )
        if not options:
            break
        scores = _score(model, options, best_log_cost)
        best = int(np.argmax(scores))
        if scores[best] <= current_ei:
            break
        current, current_ei = options[best], float(scores[best])
    return current, current_ei


def select_challengers(
    model: RandomForestModel | None,
    space: ParameterSpace,
    incumbent: Configuration,
    rng: np.random.Generator,
    n: int,
    best_log_cost: float = 0.0,
    params: SmacParams | None = None,
) -> list[Configuration]:
    """
    Alternates model-guided and uniformly random challengers, starting model-guided.
    Without a model every challenger is random.
    """
    params = params or SmacParams()
    if model is None:
        return [sample_uniform(space, rng) for _ in range(n)]

    samples = [sample_uniform(space, rng) for _ in range(params.random_samples)]
    sample_ei = _score(model, samples, best_log_cost)
    ranked = [samples[int(i)] for i in np.argsort(-sample_ei, kind="stable")]

    starts = [incumbent] + ranked[: params.local_search_starts]
    optimized = [local_search(model, start, best_log_cost, rng, params) for start in starts]
    optimized.sort(key=lambda item: -item[1])

    guided: list[Configuration] = []
    for config in [c for c, _ in optimized] + ranked:
        if config != incumbent and config not in guided:
            guided.append(config)
        if len(guided) >= (n + 1) // 2:
            break

    challengers = []
    for i in range(n):
        if i % 2 == 0 and guided:
            challengers.append(guided.pop(0))
        else:
            challengers.append(sample_uniform(space, rng))
    logging.debug(f"Selected {n} challengers ({(n + 1) // 2} model-guided).")
    return challengers
