"""Adversarially regularized graph-convolutional embedding of one network.

Each network gets its own encoder/discriminator pair, trained from scratch:

    encoder:        Z = A_hat . (ReLU(A_hat . F . W1) + noise) . W2
    decoder:        X_hat(a, b) = sigmoid(Z_a . Z_b)
    discriminator:  h -> 64 -> 16 -> 1 MLP telling prior samples from rows of Z
    encoder loss:   summed edge cross-entropy + adversarial_weight * generator loss

The embedding returned is the noise-free Z of the trained encoder, flattened
row-major into a vector of length n_rois * h.
"""
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union
import logging

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigError, TrainingDivergenceError
from .networks import ConnectivityMatrix, normalize_minmax
from .seeding import SeedPart, derive_seed

logger = logging.getLogger(__name__)

DTYPE = torch.float64
EPSILON = 1e-7

# rows of the encoder output, one per ROI: (n_rois, h)
NodeEmbedding = torch.Tensor


class Prior(str, Enum):
    GAUSSIAN = "gaussian"
    DATA_ROWS = "data-rows"


class Features(str, Enum):
    IDENTITY = "identity"
    ONES = "ones"


@dataclass
class TrainConfig:
    """Configuration for per-network embedding training"""
    learning_rate_encoder: float = 0.005
    learning_rate_discriminator: float = 0.005
    iterations: int = 30
    noise_sigma: float = 0.1
    h: int = 16
    adversarial_weight: float = 1.0
    prior: Prior = Prior.GAUSSIAN
    features: Features = Features.IDENTITY
    discriminator_hidden: Tuple[int, ...] = (64, 16)
    seed: int = 42

    # Initial weights depend on the seed only, so every network embedded
    # in one experiment starts from the same encoder
    shared_init: bool = True

    # The encoder objective sums the cross-entropy over all decoded entries
    # instead of averaging it; the reported losses stay per-entry means
    sum_reconstruction: bool = True

    def __post_init__(self):
        try:
            self.prior = Prior(self.prior)
            self.features = Features(self.features)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        self.discriminator_hidden = tuple(int(w) for w in self.discriminator_hidden)

    def validate(self):
        """Validate configuration parameters"""
        if self.learning_rate_encoder <= 0 or self.learning_rate_discriminator <= 0:
            raise ConfigError("learning rates must be positive")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be at least 1, got {self.iterations}")
        if self.h < 1:
            raise ConfigError(f"embedding width h must be at least 1, got {self.h}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.adversarial_weight < 0:
            raise ConfigError("adversarial_weight must be non-negative")
        if any(w < 1 for w in self.discriminator_hidden):
            raise ConfigError("discriminator hidden widths must be positive")

    def to_dict(self) -> dict:
        params = asdict(self)
        params["prior"] = self.prior.value
        params["features"] = self.features.value
        params["discriminator_hidden"] = list(self.discriminator_hidden)
        return params


@dataclass(frozen=True)
class TrainingTrace:
    """Loss history of one training run; the endpoints are noise-free"""
    initial_reconstruction: float
    final_reconstruction: float
    reconstruction: Tuple[float, ...] = ()
    generator: Tuple[float, ...] = ()
    discriminator: Tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class Embedding:
    values: np.ndarray
    subject_id: str = ""
    trace: Optional[TrainingTrace] = field(default=None, repr=False)

    def __post_init__(self):
        values = np.array(np.ravel(self.values), dtype=np.float64, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


def glorot_init(input_dim: int, output_dim: int, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    init_range = np.sqrt(6.0 / (input_dim + output_dim))
    initial = torch.rand(input_dim, output_dim, generator=generator, dtype=DTYPE)
    return initial * 2 * init_range - init_range


class GraphConvEncoder(nn.Module):
    """Two graph convolutions with a Gaussian noise layer between them"""

    def __init__(self, n_rois: int, h: int, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.W1 = nn.Parameter(glorot_init(n_rois, h, generator))
        self.W2 = nn.Parameter(glorot_init(h, h, generator))
        self.activation = nn.ReLU()

    @classmethod
    def from_weights(cls, W1, W2) -> "GraphConvEncoder":
        W1 = torch.as_tensor(W1, dtype=DTYPE)
        W2 = torch.as_tensor(W2, dtype=DTYPE)
        encoder = cls(W1.shape[0], W1.shape[1])
        with torch.no_grad():
            encoder.W1.copy_(W1)
            encoder.W2.copy_(W2)
        return encoder

    @property
    def h(self) -> int:
        return self.W1.shape[1]

    def forward(self, adjacency: torch.Tensor, features: torch.Tensor,
                noise: Optional[torch.Tensor] = None) -> torch.Tensor:
        hidden = self.activation(adjacency @ features @ self.W1)
        if noise is not None:
            hidden = hidden + noise
        return adjacency @ hidden @ self.W2


class Discriminator(nn.Module):
    """MLP with ReLU hidden layers and a sigmoid output"""

    def __init__(self, h: int, hidden: Sequence[int] = (64, 16), generator: Optional[torch.Generator] = None):
        super().__init__()
        widths = [h, *hidden, 1]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            linear = nn.Linear(fan_in, fan_out, dtype=DTYPE)
            with torch.no_grad():
                linear.weight.copy_(glorot_init(fan_out, fan_in, generator))
                linear.bias.zero_()
            layers.append(linear)
            if i < len(widths) - 2:
                layers.append(nn.ReLU())
        self.net = nn.Sequential(*layers)

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.net(rows)).squeeze(-1)


def _as_tensor(value: Union[ConnectivityMatrix, np.ndarray, torch.Tensor]) -> torch.Tensor:
    if isinstance(value, ConnectivityMatrix):
        value = value.weights
    if torch.is_tensor(value):
        return value.to(DTYPE)
    # copy: connectivity weights are read-only arrays
    return torch.tensor(np.array(value, dtype=np.float64), dtype=DTYPE)


def normalize_adjacency(matrix: ConnectivityMatrix) -> np.ndarray:
    """D^-1/2 (X + I) D^-1/2 with D the degree matrix of X + I"""
    tilde = matrix.weights + np.eye(matrix.n_rois)
    inv_sqrt = 1.0 / np.sqrt(tilde.sum(axis=1))
    normalized = inv_sqrt[:, None] * tilde * inv_sqrt[None, :]
    return (normalized + normalized.T) / 2.0


def feature_matrix(n_rois: int, features: Features = Features.IDENTITY) -> torch.Tensor:
    if Features(features) is Features.ONES:
        return torch.ones((n_rois, n_rois), dtype=DTYPE)
    return torch.eye(n_rois, dtype=DTYPE)


def encode(encoder: GraphConvEncoder, adjacency, noise_sigma: float = 0.0,
           generator: Optional[torch.Generator] = None,
           features: Features = Features.IDENTITY) -> NodeEmbedding:
    """Node embeddings of one network.

    Gaussian noise is added to the hidden layer only when a generator is
    given; without one the map is deterministic (inference mode).
    """
    adjacency = _as_tensor(adjacency)
    n_rois = adjacency.shape[0]
    noise = None
    if generator is not None and noise_sigma > 0:
        noise = noise_sigma * torch.randn((n_rois, encoder.h), generator=generator, dtype=DTYPE)
    z = encoder(adjacency, feature_matrix(n_rois, features), noise)
    if not torch.all(torch.isfinite(z)):
        raise TrainingDivergenceError("encoder produced non-finite node embeddings")
    return z


def decode(z: NodeEmbedding) -> torch.Tensor:
    z = _as_tensor(z)
    return torch.sigmoid(z @ z.T)


def _off_diagonal_mask(n: int) -> torch.Tensor:
    return ~torch.eye(n, dtype=torch.bool)


def reconstruction_loss(target, decoded) -> torch.Tensor:
    """Mean binary cross-entropy over off-diagonal entries"""
    target = _as_tensor(target)
    decoded = _as_tensor(decoded).clamp(EPSILON, 1 - EPSILON)
    mask = _off_diagonal_mask(target.shape[0])
    t, x = target[mask], decoded[mask]
    return -(t * torch.log(x) + (1 - t) * torch.log(1 - x)).mean()


def discriminator_forward(discriminator: Discriminator, rows) -> torch.Tensor:
    return discriminator(_as_tensor(rows))


def discriminator_loss(discriminator: Discriminator, real_rows, fake_rows) -> torch.Tensor:
    p_real = discriminator_forward(discriminator, real_rows).clamp(EPSILON, 1 - EPSILON)
    p_fake = discriminator_forward(discriminator, fake_rows).clamp(EPSILON, 1 - EPSILON)
    return -torch.log(p_real).mean() - torch.log(1 - p_fake).mean()


def generator_loss(discriminator: Discriminator, fake_rows) -> torch.Tensor:
    """Non-saturating generator loss: -mean log D(fake)"""
    p_fake = discriminator_forward(discriminator, fake_rows).clamp(EPSILON, 1 - EPSILON)
    return -torch.log(p_fake).mean()


def adversarial_losses(discriminator: Discriminator, real_rows, fake_rows) -> Tuple[torch.Tensor, torch.Tensor]:
    return (discriminator_loss(discriminator, real_rows, fake_rows),
            generator_loss(discriminator, fake_rows))


def _prior_rows(config: TrainConfig, adjacency: torch.Tensor, generator: torch.Generator,
                columns: Optional[torch.Tensor]) -> torch.Tensor:
    if config.prior is Prior.DATA_ROWS:
        return adjacency[:, columns]
    return torch.randn((adjacency.shape[0], config.h), generator=generator, dtype=DTYPE)


def _data_row_columns(n_rois: int, h: int, generator: torch.Generator) -> torch.Tensor:
    if h <= n_rois:
        return torch.randperm(n_rois, generator=generator)[:h]
    return torch.randint(n_rois, (h,), generator=generator)


def _check_finite(value: torch.Tensor, what: str, iteration: int) -> None:
    if not torch.isfinite(value):
        raise TrainingDivergenceError(f"non-finite {what} at iteration {iteration}", iteration=iteration)


def train_embedding(matrix: ConnectivityMatrix, config: Optional[TrainConfig] = None,
                    subject_id: str = "", key: Sequence[SeedPart] = ()) -> Embedding:
    """Train an embedding for one network and return its noise-free flattening.

    The result is fully determined by the network and the config: every
    network trained under one seed sees the same noise and prior samples.
    A non-empty `key` gives the run its own stream instead. `subject_id` only
    labels the result, unless `shared_init` is off.
    """
    config = config or TrainConfig()
    config.validate()

    normalized = normalize_minmax(matrix)
    target = _as_tensor(normalized)
    adjacency = _as_tensor(normalize_adjacency(normalized))
    n_rois = matrix.n_rois
    recon_weight = float(n_rois * (n_rois - 1)) if config.sum_reconstruction else 1.0

    init_seed = derive_seed(config.seed, "init") if config.shared_init \
        else derive_seed(config.seed, "init", *key, subject_id)
    init_generator = torch.Generator().manual_seed(init_seed)
    stream = torch.Generator().manual_seed(derive_seed(config.seed, "stream", *key))

    encoder = GraphConvEncoder(n_rois, config.h, init_generator)
    discriminator = Discriminator(config.h, config.discriminator_hidden, init_generator)
    columns = _data_row_columns(n_rois, config.h, stream) if config.prior is Prior.DATA_ROWS else None

    encoder_optimizer = torch.optim.SGD(encoder.parameters(), lr=config.learning_rate_encoder)
    discriminator_optimizer = torch.optim.SGD(discriminator.parameters(), lr=config.learning_rate_discriminator)

    with torch.no_grad():
        initial = reconstruction_loss(target, decode(encode(encoder, adjacency, features=config.features))).item()

    recon_history, gen_history, disc_history = [], [], []
    for iteration in range(config.iterations):
        try:
            z = encode(encoder, adjacency, config.noise_sigma, stream, config.features)
        except TrainingDivergenceError as e:
            raise TrainingDivergenceError(f"{e} at iteration {iteration}", iteration=iteration) from e
        real = _prior_rows(config, adjacency, stream, columns)

        discriminator_optimizer.zero_grad()
        disc = discriminator_loss(discriminator, real, z.detach())
        _check_finite(disc, "discriminator loss", iteration)
        disc.backward()
        discriminator_optimizer.step()

        encoder_optimizer.zero_grad()
        recon = reconstruction_loss(target, decode(z))
        gen = generator_loss(discriminator, z)
        total = recon_weight * recon + config.adversarial_weight * gen
        _check_finite(total, "encoder loss", iteration)
        total.backward()
        encoder_optimizer.step()

        recon_history.append(recon.item())
        gen_history.append(gen.item())
        disc_history.append(disc.item())
        logger.debug(
            f"[{subject_id or 'network'}] iteration {iteration}: "
            f"recon={recon.item():.6f} gen={gen.item():.6f} disc={disc.item():.6f}"
        )

    with torch.no_grad():
        try:
            z = encode(encoder, adjacency, features=config.features)
        except TrainingDivergenceError as e:
            raise TrainingDivergenceError(f"{e} after iteration {config.iterations - 1}",
                                          iteration=config.iterations - 1) from e
        final = reconstruction_loss(target, decode(z)).item()

    trace = TrainingTrace(initial, final, tuple(recon_history), tuple(gen_history), tuple(disc_history))
    return Embedding(z.numpy().reshape(-1), subject_id, trace)
