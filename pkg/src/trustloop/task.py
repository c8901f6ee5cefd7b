"""Synthetic classification task with non-identical client data.

Gaussian class blobs in feature space; each client draws its labels from a
client-specific class mixture (symmetric Dirichlet), which realizes the
non-IID setting. A server-held holdout drawn from the uniform class mixture
is used for global evaluation.
"""

from dataclasses import dataclass, field

import numpy as np

from trustloop.errors import ConfigError
from trustloop.seeding import STREAM_CENTERS, STREAM_CLIENT_DATA, STREAM_HOLDOUT, substream

# Pairwise center distance is at least MIN_SEPARATION * center_scale.
MIN_SEPARATION = 1.0
_MAX_CENTER_TRIES = 200


@dataclass
class TaskConfig:
    feature_dim: int = 6
    num_classes: int = 3
    samples_per_client: int = 60
    noise_std: float = 1.0
    center_scale: float = 4.0
    dirichlet_concentration: float = 0.5
    holdout_samples: int = 600

    def validate(self) -> None:
        if self.feature_dim < 1:
            raise ConfigError("task.feature_dim", "must be >= 1")
        if self.num_classes < 2:
            raise ConfigError("task.num_classes", "must be >= 2")
        if self.samples_per_client < 10:
            raise ConfigError("task.samples_per_client", "must be >= 10")
        if self.noise_std < 0:
            raise ConfigError("task.noise_std", "must be >= 0")
        if self.center_scale <= 0:
            raise ConfigError("task.center_scale", "must be > 0")
        if self.dirichlet_concentration <= 0:
            raise ConfigError("task.dirichlet_concentration", "must be > 0")
        if self.holdout_samples < 1:
            raise ConfigError("task.holdout_samples", "must be >= 1")


@dataclass
class Dataset:
    """A labelled sample set. Features are float64, labels int64."""

    features: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def label_histogram(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=num_classes)


@dataclass
class SyntheticTask:
    feature_dim: int
    num_classes: int
    class_centers: np.ndarray  # (num_classes, feature_dim)
    noise_std: float
    samples_per_client: int
    client_datasets: list[Dataset] = field(default_factory=list)
    holdout: Dataset | None = None
    client_mixtures: np.ndarray | None = None  # (num_clients, num_classes)

    @property
    def param_count(self) -> int:
        # Multinomial logistic regression: weight matrix plus per-class bias.
        return self.num_classes * (self.feature_dim + 1)


def _draw_centers(config: TaskConfig, rng: np.random.Generator) -> np.ndarray:
    """Sample class centers on the sphere of radius center_scale.

    Rejection keeps every pairwise distance >= MIN_SEPARATION * center_scale,
    so task difficulty is governed by noise_std / center_scale alone.
    """
    scale = config.center_scale
    centers: list[np.ndarray] = []
    for _ in range(config.num_classes):
        for _ in range(_MAX_CENTER_TRIES):
            v = rng.normal(size=config.feature_dim)
            norm = np.linalg.norm(v)
            if norm < 1e-12:
                continue
            candidate = scale * v / norm
            if all(np.linalg.norm(candidate - c) >= MIN_SEPARATION * scale for c in centers):
                centers.append(candidate)
                break
        else:
            raise ConfigError(
                "task.num_classes",
                f"could not place {config.num_classes} separated centers in "
                f"{config.feature_dim} dimensions",
            )
    return np.stack(centers)


def _sample_dataset(
    centers: np.ndarray,
    mixture: np.ndarray,
    n: int,
    noise_std: float,
    rng: np.random.Generator,
) -> Dataset:
    labels = rng.choice(len(mixture), size=n, p=mixture)
    features = centers[labels] + noise_std * rng.normal(size=(n, centers.shape[1]))
    return Dataset(features=features, labels=labels.astype(np.int64))


def generate_task(config: TaskConfig, num_clients: int, seed: int) -> SyntheticTask:
    """Build the task, per-client datasets, and the server holdout.

    Deterministic in (config, num_clients, seed). Each client's mixture is a
    symmetric Dirichlet draw; the holdout uses the uniform mixture.
    """
    config.validate()
    if num_clients < 1:
        raise ConfigError("clients.count", "must be >= 1")

    centers = _draw_centers(config, substream(seed, STREAM_CENTERS))
    k = config.num_classes

    mixtures = np.empty((num_clients, k))
    datasets: list[Dataset] = []
    for cid in range(num_clients):
        rng = substream(seed, STREAM_CLIENT_DATA, cid)
        mixtures[cid] = rng.dirichlet(np.full(k, config.dirichlet_concentration))
        datasets.append(
            _sample_dataset(centers, mixtures[cid], config.samples_per_client, config.noise_std, rng)
        )

    holdout = _sample_dataset(
        centers,
        np.full(k, 1.0 / k),
        config.holdout_samples,
        config.noise_std,
        substream(seed, STREAM_HOLDOUT),
    )

    return SyntheticTask(
        feature_dim=config.feature_dim,
        num_classes=k,
        class_centers=centers,
        noise_std=config.noise_std,
        samples_per_client=config.samples_per_client,
        client_datasets=datasets,
        holdout=holdout,
        client_mixtures=mixtures,
    )
