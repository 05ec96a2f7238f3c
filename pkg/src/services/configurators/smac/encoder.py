import math
from typing import Sequence

import numpy as np

from src.models.scenario import InstanceFeatures
from src.models.space import INACTIVE, Configuration, ParameterSpace, ParameterSpec, ParamKind


def scale(spec: ParameterSpec, value) -> float:
    if spec.kind is ParamKind.CATEGORICAL:
        return float(spec.choices.index(value))
    if spec.log_scale:
        low, high = math.log(spec.lower), math.log(spec.upper)
        return (math.log(value) - low) / (high - low)
    return (float(value) - spec.lower) / (spec.upper - spec.lower)


def unscale(spec: ParameterSpec, position: float):
    """Inverse of the numeric scaling; integers are rounded back into their domain."""
    position = min(max(position, 0.0), 1.0)
    if spec.log_scale:
        low, high = math.log(spec.lower), math.log(spec.upper)
        value = math.exp(low + position * (high - low))
    else:
        value = spec.lower + position * (spec.upper - spec.lower)
    if spec.kind is ParamKind.INTEGER:
        return int(min(max(round(value), spec.lower), spec.upper))
    return min(max(value, spec.lower), spec.upper)


class ConfigurationEncoder:
    """
    Maps configurations (and optionally instances) to fixed-width model inputs.

    Categoricals become category indices, numerics are min-max scaled (in log space when
    log-scaled). An inactive parameter takes its default's encoding, and every conditional
    parameter gets an extra activity column. Instance features, when given, are appended raw.
    """

    def __init__(self, space: ParameterSpace, features: InstanceFeatures | None = None):
        self.space = space
        self.features = features
        self.conditional = [spec.name for spec in space.parameters if space.is_conditional(spec.name)]
        self.columns = [spec.name for spec in space.parameters] + [f"{name}:active" for name in self.conditional]
        if features is not None:
            self.columns += [f"feature:{name}" for name in features.feature_names]

    @property
    def uses_features(self) -> bool:
        return self.features is not None

    @property
    def dimension(self) -> int:
        return len(self.columns)

    def encode_config(self, config: Configuration) -> np.ndarray:
        values = []
        for spec in self.space.parameters:
            value = config[spec.name]
            values.append(scale(spec, spec.default if value is INACTIVE else value))
        values += [0.0 if config[name] is INACTIVE else 1.0 for name in self.conditional]
        return np.asarray(values, dtype=float)

    def encode(self, config: Configuration, instance_id: str | None = None) -> np.ndarray:
        vector = self.encode_config(config)
        if self.features is None:
            return vector
        row = self.features.vector(instance_id) if instance_id is not None else None
        if row is None:
            row = np.zeros(len(self.features.feature_names))
        return np.concatenate([vector, row])

    def encode_many(self, configs: Sequence[Configuration], instance_ids: Sequence[str | None]) -> np.ndarray:
        if not configs:
            return np.empty((0, self.dimension))
        return np.vstack([self.encode(c, i) for c, i in zip(configs, instance_ids)])

    def feature_matrix(self, instance_ids: Sequence[str]) -> np.ndarray:
        return np.vstack([self.features.vector(i) for i in instance_ids])
