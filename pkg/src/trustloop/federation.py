"""Synchronous FL environment: local training, behavior profiles, rounds.

The model family is multinomial logistic regression on the synthetic task.
Clients run seeded mini-batch gradient descent and return a parameter delta;
adversarial and degraded behaviors are applied as transforms around the
honest training path so that paired seeded runs stay comparable.
"""

from dataclasses import dataclass, field

import numpy as np

from trustloop.errors import ConfigError, SimulationFault
from trustloop.seeding import STREAM_PARTICIPATION, STREAM_TRAIN, derive_seed, substream
from trustloop.task import Dataset, SyntheticTask

BEHAVIOR_KINDS = ("benign", "label_flip", "sign_flip", "noisy", "intermittent")
ADVERSARIAL_KINDS = ("label_flip", "sign_flip")

BYTES_PER_PARAM = 8  # float64 on the wire


@dataclass(frozen=True)
class Behavior:
    """A client behavior: kind plus its single parameter (None for benign).

    label_flip(fraction)   - fraction of local labels shifted to the next class
    sign_flip(scale)       - returns -scale * honest delta
    noisy(sigma)           - honest delta plus N(0, sigma^2) noise
    intermittent(prob)     - participates each round with probability prob
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in BEHAVIOR_KINDS:
            raise ConfigError("clients.roster", f"unknown behavior {self.kind!r}")
        if self.kind == "benign":
            if self.param is not None:
                raise ConfigError("clients.roster", "benign takes no parameter")
        elif self.param is None:
            raise ConfigError("clients.roster", f"{self.kind} requires a parameter")
        elif self.kind == "label_flip" and not 0.0 <= self.param <= 1.0:
            raise ConfigError("clients.roster", "label_flip fraction must be in [0, 1]")
        elif self.kind == "sign_flip" and self.param <= 0.0:
            raise ConfigError("clients.roster", "sign_flip scale must be > 0")
        elif self.kind == "noisy" and self.param < 0.0:
            raise ConfigError("clients.roster", "noisy sigma must be >= 0")
        elif self.kind == "intermittent" and not 0.0 < self.param <= 1.0:
            raise ConfigError("clients.roster", "intermittent prob must be in (0, 1]")

    @property
    def is_adversarial(self) -> bool:
        return self.kind in ADVERSARIAL_KINDS

    def __str__(self) -> str:
        return self.kind if self.param is None else f"{self.kind}({self.param:g})"


@dataclass(frozen=True)
class ClientProfile:
    client_id: int
    behavior: Behavior

    @property
    def is_adversarial(self) -> bool:
        return self.behavior.is_adversarial


@dataclass
class ClientUpdate:
    client_id: int
    round: int
    delta: np.ndarray
    num_samples: int
    local_loss: float


@dataclass
class GlobalModel:
    parameters: np.ndarray
    round: int = 0

    def copy(self) -> "GlobalModel":
        return GlobalModel(parameters=self.parameters.copy(), round=self.round)


@dataclass
class TrainConfig:
    epochs: int = 1
    lr: float = 0.05
    batch_size: int = 20

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("train.epochs", "must be >= 1")
        if self.lr < 0:
            raise ConfigError("train.lr", "must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size", "must be >= 1")


def init_model(task: SyntheticTask) -> GlobalModel:
    return GlobalModel(parameters=np.zeros(task.param_count), round=0)


def _unpack(params: np.ndarray, num_classes: int, feature_dim: int):
    mat = params.reshape(num_classes, feature_dim + 1)
    return mat[:, :feature_dim], mat[:, feature_dim]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def multinomial_loss(params: np.ndarray, dataset: Dataset, num_classes: int) -> float:
    """Mean cross-entropy of the softmax model on the dataset."""
    d = dataset.features.shape[1]
    weights, bias = _unpack(params, num_classes, d)
    probs = _softmax(dataset.features @ weights.T + bias)
    picked = probs[np.arange(len(dataset)), dataset.labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def _train_honest(
    params: np.ndarray,
    dataset: Dataset,
    num_classes: int,
    train: TrainConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Mini-batch gradient descent on softmax cross-entropy. Returns new params."""
    d = dataset.features.shape[1]
    weights, bias = _unpack(params.copy(), num_classes, d)
    n = len(dataset)
    onehot = np.eye(num_classes)[dataset.labels]

    for _ in range(train.epochs):
        order = rng.permutation(n)
        for start in range(0, n, train.batch_size):
            idx = order[start : start + train.batch_size]
            x, y1h = dataset.features[idx], onehot[idx]
            probs = _softmax(x @ weights.T + bias)
            err = probs - y1h
            weights -= train.lr * (err.T @ x) / len(idx)
            bias -= train.lr * err.mean(axis=0)

    out = np.concatenate([weights, bias[:, None]], axis=1).ravel()
    if not np.all(np.isfinite(out)):
        raise SimulationFault("non-finite parameters during local training")
    return out


def _flip_labels(dataset: Dataset, fraction: float, num_classes: int, rng: np.random.Generator) -> Dataset:
    n = len(dataset)
    n_flip = int(np.floor(fraction * n + 0.5))
    labels = dataset.labels.copy()
    if n_flip > 0:
        idx = rng.choice(n, size=n_flip, replace=False)
        labels[idx] = (labels[idx] + 1) % num_classes
    return Dataset(features=dataset.features, labels=labels)


def local_train(
    model: GlobalModel,
    dataset: Dataset,
    profile: ClientProfile,
    num_classes: int,
    train: TrainConfig,
    seed: int,
) -> ClientUpdate:
    """One client's round: seeded local GD plus the profile's transform.

    The honest training path consumes the same RNG stream for every behavior,
    so sign_flip(scale=1) is the exact negation of the benign update under an
    identical seed and dataset.
    """
    rng_train = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    rng_extra = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))

    behavior = profile.behavior
    local_data = dataset
    if behavior.kind == "label_flip":
        local_data = _flip_labels(dataset, behavior.param, num_classes, rng_extra)

    trained = _train_honest(model.parameters, local_data, num_classes, train, rng_train)
    delta = trained - model.parameters

    if behavior.kind == "sign_flip":
        delta = -behavior.param * delta
    elif behavior.kind == "noisy":
        delta = delta + behavior.param * rng_extra.normal(size=delta.shape)

    local_loss = multinomial_loss(trained, local_data, num_classes)
    if not np.isfinite(local_loss) or not np.all(np.isfinite(delta)):
        raise SimulationFault(f"non-finite local result for client {profile.client_id}")

    return ClientUpdate(
        client_id=profile.client_id,
        round=model.round,
        delta=delta,
        num_samples=len(dataset),
        local_loss=local_loss,
    )


def evaluate_global(model: GlobalModel, holdout: Dataset, num_classes: int) -> tuple[float, float]:
    """Mean log-loss and top-1 accuracy on the server holdout."""
    if len(holdout) == 0:
        raise SimulationFault("empty holdout")
    d = holdout.features.shape[1]
    weights, bias = _unpack(model.parameters, num_classes, d)
    logits = holdout.features @ weights.T + bias
    probs = _softmax(logits)
    picked = probs[np.arange(len(holdout)), holdout.labels]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
    accuracy = float(np.mean(logits.argmax(axis=1) == holdout.labels))
    return loss, accuracy


@dataclass
class FederationState:
    """Round-sequential owner of the simulated federation."""

    task: SyntheticTask
    profiles: list[ClientProfile]
    train: TrainConfig
    master_seed: int
    model: GlobalModel = field(init=False)
    messages_total: int = 0
    payload_bytes_total: int = 0

    def __post_init__(self):
        self.model = init_model(self.task)

    @property
    def num_clients(self) -> int:
        return len(self.profiles)

    @property
    def adversary_ids(self) -> list[int]:
        return [p.client_id for p in self.profiles if p.is_adversarial]

    def participates(self, profile: ClientProfile, round_index: int) -> bool:
        if profile.behavior.kind != "intermittent":
            return True
        draw = substream(self.master_seed, STREAM_PARTICIPATION, round_index, profile.client_id).random()
        return bool(draw < profile.behavior.param)

    def run_round(
        self, round_index: int, skip_ids: frozenset[int] = frozenset()
    ) -> tuple[list[ClientUpdate], np.ndarray, int, int]:
        """Collect this round's updates in ascending client_id order.

        Returns (updates, participation mask, messages, payload_bytes).
        `skip_ids` models server-initiated skipping of excluded clients; by
        default excluded clients still train and upload, so communication
        counters are identical for every controller.
        """
        mask = np.zeros(self.num_clients, dtype=bool)
        updates: list[ClientUpdate] = []
        for profile in self.profiles:  # profiles are stored in ascending id order
            cid = profile.client_id
            if cid in skip_ids or not self.participates(profile, round_index):
                continue
            mask[cid] = True
            seed = derive_seed(self.master_seed, STREAM_TRAIN, round_index, cid)
            updates.append(
                local_train(
                    self.model,
                    self.task.client_datasets[cid],
                    profile,
                    self.task.num_classes,
                    self.train,
                    seed,
                )
            )
        participants = int(mask.sum())
        messages = 2 * participants  # one broadcast down, one update up
        payload_bytes = messages * self.task.param_count * BYTES_PER_PARAM
        self.messages_total += messages
        self.payload_bytes_total += payload_bytes
        return updates, mask, messages, payload_bytes
