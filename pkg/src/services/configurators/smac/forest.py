"""
Random-forest empirical performance model.

Predicts log10 PAR-k cost of a configuration (on an instance, when features are known)
with a mean and a variance: the spread of the per-tree means plus the average leaf
variance of the leaves the query falls into.
"""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from src.core.config import CAP_EPSILON
from src.core.errors import InsufficientDataError
from src.models.schemas import SmacParams
from src.models.space import Configuration
from src.services.configurators.smac.encoder import ConfigurationEncoder
from src.services.runhistory import RunHistory
from src.services.scoring import run_cost


def log_cost(cost: float) -> float:
    return math.log10(max(cost, CAP_EPSILON))


@dataclass
class RandomForestModel:
    forest: RandomForestRegressor
    encoder: ConfigurationEncoder
    train_instances: tuple[str, ...]
    n_observations: int

    @property
    def trees(self):
        return self.forest.estimators_

    def predict_matrix(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and variance of log-cost for every row of an encoded matrix."""
        X = np.asarray(X, dtype=np.float32)
        tree_means = np.empty((len(self.trees), X.shape[0]))
        leaf_variances = np.zeros(X.shape[0])
        for t, tree in enumerate(self.trees):
            leaves = tree.apply(X)
            tree_means[t] = tree.tree_.value[leaves, 0, 0]
            leaf_variances += tree.tree_.impurity[leaves]
        mean = tree_means.mean(axis=0)
        variance = tree_means.var(axis=0) + leaf_variances / len(self.trees)
        return mean, np.maximum(variance, 0.0)

    def predict(self, config: Configuration, instance_id: str | None = None) -> tuple[float, float]:
        mean, variance = self.predict_matrix(self.encoder.encode(config, instance_id)[None, :])
        return float(mean[0]), float(variance[0])

    def marginal_many(self, configs: Sequence[Configuration]) -> tuple[np.ndarray, np.ndarray]:
        """
        Predictions averaged over the training instances' features: the mean is the
        arithmetic mean of per-instance means, the variance the mean per-instance variance.
        """
        if not configs:
            return np.empty(0), np.empty(0)
        encoded = np.vstack([self.encoder.encode_config(c) for c in configs])
        if not self.encoder.uses_features:
            return self.predict_matrix(encoded)
        features = self.encoder.feature_matrix(self.train_instances)
        n_configs, n_instances = len(configs), len(features)
        X = np.hstack([np.repeat(encoded, n_instances, axis=0), np.tile(features, (n_configs, 1))])
        mean, variance = self.predict_matrix(X)
        return mean.reshape(n_configs, n_instances).mean(axis=1), variance.reshape(n_configs, n_instances).mean(axis=1)


def marginal_predict(model: RandomForestModel, config: Configuration) -> float:
    """Mean predicted log-cost of `config` across all training instances."""
    mean, _ = model.marginal_many([config])
    return float(mean[0])


def training_data(history: RunHistory, encoder: ConfigurationEncoder) -> tuple[np.ndarray, np.ndarray, int]:
    """
    One row per current ledger record. Capped runs enter at their lower bound (the time
    they were allowed); timeouts at the full cutoff enter at the k * kappa penalty.
    """
    rows, targets = [], []
    configs = history.configurations()
    for config in configs:
        for record in history.current(config):
            rows.append(encoder.encode(config, record.instance_id))
            targets.append(log_cost(run_cost(record.outcome, history.metric)))
    if not rows:
        return np.empty((0, encoder.dimension)), np.empty(0), 0
    return np.vstack(rows), np.asarray(targets), len(configs)


def fit_forest(
    history: RunHistory, encoder: ConfigurationEncoder, params: SmacParams | None = None, seed: int = 0
) -> RandomForestModel:
    params = params or SmacParams()
    X, y, distinct = training_data(history, encoder)
    if distinct < 2:
        raise InsufficientDataError(f"The model needs runs of at least 2 configurations, got {distinct}.")
    forest = RandomForestRegressor(
        n_estimators=params.num_trees,
        max_features=params.max_features,
        min_samples_leaf=params.min_samples_leaf,
        bootstrap=params.bootstrap,
        random_state=seed,
    )
    forest.fit(X, y)
    logging.debug(f"Fitted {params.num_trees} trees on {len(y)} runs of {distinct} configurations.")
    return RandomForestModel(
        forest=forest, encoder=encoder, train_instances=history.instance_order, n_observations=len(y)
    )


def dump_trees(model: RandomForestModel, path: Path):
    """Writes every tree's node arrays as JSON, for inspecting what the model learned."""
    trees = []
    for tree in model.trees:
        structure = tree.tree_
        trees.append(
            {
                "feature": [model.encoder.columns[f] if f >= 0 else None for f in structure.feature.tolist()],
                "threshold": structure.threshold.tolist(),
                "left": structure.children_left.tolist(),
                "right": structure.children_right.tolist(),
                "mean": structure.value[:, 0, 0].tolist(),
                "variance": structure.impurity.tolist(),
                "samples": structure.n_node_samples.tolist(),
            }
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"columns": model.encoder.columns, "observations": model.n_observations, "trees": trees}
    path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
