"""
Context + tabular fusion classifier.

The code context is tokenized into hashed buckets whose embeddings are mean pooled
by an ``nn.EmbeddingBag``; the encoded tabular vector passes through a two-layer MLP.
The two representations are concatenated and fed to a one-hidden-layer head:

    e = mean(E[tokens])                      (zero vector for an empty context)
    t = Linear(tanh(Linear(x)))
    p = sigmoid(Linear(tanh(Linear([e, t]))))

The network computes in float64; trained weights are rounded to float32 so that the
saved artifact reproduces the in-memory model exactly.
"""

import base64
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, Field, ValidationError, field_validator

from ..events.types import FeatureBag
from ..exceptions import ArtifactError, ArtifactVersionError, DimensionError, SchemaMismatchError
from ..features.encoder import EncoderState, transform, transform_many
from ..features.schema import View
from ..gbdt.model import PROBABILITY_EPS
from ..logging import logger
from .tokenize import DEFAULT_VOCAB_BUCKETS, tokenize_context

FORMAT_VERSION = "cgate-hybrid/1"


class HybridConfig(BaseModel):
    vocab_buckets: int = Field(default=DEFAULT_VOCAB_BUCKETS, gt=0)
    embed_dim: int = Field(default=32, gt=0)
    tabular_hidden: int = Field(default=32, gt=0)
    head_hidden: int = Field(default=32, gt=0)
    epochs: int = Field(default=8, ge=0)
    batch_size: int = Field(default=256, gt=0)
    step_size: float = Field(default=0.005, gt=0.0)
    validation_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    seed: int = 0

    @field_validator("vocab_buckets")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"vocab_buckets must be a power of two, got {value}")
        return value


class EpochStats(BaseModel):
    epoch: int
    train_loss: float
    validation_auc: float | None = None


@dataclass(frozen=True)
class Batch:
    """Ragged token lists flattened with ``EmbeddingBag`` offsets, plus the tabular block."""

    token_ids: torch.Tensor
    offsets: torch.Tensor
    tabular: torch.Tensor

    @property
    def size(self) -> int:
        return self.tabular.shape[0]

    @classmethod
    def build(cls, token_lists: Sequence[Sequence[int]], tabular: np.ndarray) -> "Batch":
        counts = np.array([len(ids) for ids in token_lists], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]) if counts.size else counts
        flat = np.fromiter((i for ids in token_lists for i in ids), dtype=np.int64, count=int(counts.sum()))
        matrix = np.asarray(tabular, dtype=np.float64)
        if matrix.ndim != 2:
            matrix = matrix.reshape(len(token_lists), -1)
        return cls(
            token_ids=torch.from_numpy(flat),
            offsets=torch.from_numpy(offsets.astype(np.int64)),
            tabular=torch.from_numpy(np.ascontiguousarray(matrix)),
        )


class HybridNet(nn.Module):
    def __init__(self, config: HybridConfig, n_inputs: int, prior: float = 0.5):
        super().__init__()
        d, t, h = config.embed_dim, config.tabular_hidden, config.head_hidden
        self.embedding = nn.EmbeddingBag(config.vocab_buckets, d, mode="mean")
        self.tabular = nn.Sequential(nn.Linear(n_inputs, t), nn.Tanh(), nn.Linear(t, t))
        self.head = nn.Sequential(nn.Linear(d + t, h), nn.Tanh(), nn.Linear(h, 1))

        prior = min(max(prior, 1e-6), 1.0 - 1e-6)
        with torch.no_grad():
            nn.init.normal_(self.embedding.weight, 0.0, 0.1)
            nn.init.zeros_(self.head[-1].weight)
            self.head[-1].bias.fill_(math.log(prior / (1.0 - prior)))
        self.double()

    @property
    def n_inputs(self) -> int:
        return self.tabular[0].in_features

    def pooled(self, batch: Batch) -> torch.Tensor:
        if batch.token_ids.numel() == 0:
            return torch.zeros(batch.size, self.embedding.embedding_dim, dtype=self.embedding.weight.dtype)
        return self.embedding(batch.token_ids, batch.offsets)

    def head_input(self, batch: Batch) -> torch.Tensor:
        """The concatenation ``[pooled context, encoded tabular]`` the head reads."""
        return torch.cat([self.pooled(batch), self.tabular(batch.tabular)], dim=1)

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.head(self.head_input(batch)).squeeze(1)


def build_net(config: HybridConfig, n_inputs: int, prior: float = 0.5) -> HybridNet:
    """A freshly initialized network seeded from ``config.seed``; global RNG state is untouched."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        return HybridNet(config, n_inputs, prior)


def batch_loss(net: HybridNet, batch: Batch, labels: Sequence[int] | np.ndarray | torch.Tensor) -> torch.Tensor:
    """Mean logistic loss of ``net`` over ``batch``."""
    y = torch.as_tensor(np.asarray(labels, dtype=np.float64))
    return F.binary_cross_entropy_with_logits(net(batch), y)


def round_to_float32(net: HybridNet) -> None:
    with torch.no_grad():
        for param in net.parameters():
            param.copy_(param.float().double())


@dataclass
class HybridModel:
    config: HybridConfig
    net: HybridNet
    encoder: EncoderState | None = None
    view: View = "trigger"
    feature_names: list[str] = field(default_factory=list)
    history: list[EpochStats] = field(default_factory=list)
    format_version: str = FORMAT_VERSION

    @property
    def n_inputs(self) -> int:
        return self.net.n_inputs

    @property
    def head_input_dim(self) -> int:
        return self.net.head[0].in_features

    @property
    def schema_hash(self) -> str:
        return self.encoder.schema_hash if self.encoder is not None else ""

    def score_bag(self, bag: FeatureBag, context: str | None = None) -> float:
        if self.encoder is None:
            raise ArtifactError("hybrid model has no encoder; score vectors with predict_hybrid instead")
        return predict_hybrid(self, context, transform(bag, self.encoder, self.view, impute=True))

    def score_bags(self, bags: Sequence[FeatureBag], contexts: Sequence[str | None] | None = None) -> np.ndarray:
        if self.encoder is None:
            raise ArtifactError("hybrid model has no encoder; score vectors with predict_hybrid_many instead")
        contexts = contexts if contexts is not None else [None] * len(bags)
        return predict_hybrid_many(self, contexts, transform_many(bags, self.encoder, self.view, impute=True))


def batch_for(model: HybridModel, contexts: Sequence[str | None], matrix: np.ndarray) -> Batch:
    if matrix.ndim != 2 or matrix.shape[1] != model.n_inputs:
        raise DimensionError(f"tabular input of shape {matrix.shape}, model expects {model.n_inputs} columns")
    if len(contexts) != matrix.shape[0]:
        raise DimensionError(f"{len(contexts)} contexts for {matrix.shape[0]} vectors")
    token_lists = [tokenize_context(c or "", model.config.vocab_buckets) for c in contexts]
    return Batch.build(token_lists, matrix)


def predict_hybrid(model: HybridModel, context: str | None, vector: Sequence[float] | np.ndarray) -> float:
    """Probability for one record; a missing or empty context pools to the zero embedding."""
    matrix = np.asarray(vector, dtype=np.float64).reshape(1, -1)
    return float(predict_hybrid_many(model, [context], matrix)[0])


def predict_hybrid_many(model: HybridModel, contexts: Sequence[str | None], matrix: np.ndarray) -> np.ndarray:
    batch = batch_for(model, contexts, np.asarray(matrix, dtype=np.float64))
    model.net.eval()
    with torch.no_grad():
        probabilities = torch.sigmoid(model.net(batch)).clamp(PROBABILITY_EPS, 1.0 - PROBABILITY_EPS)
    return probabilities.numpy().astype(np.float64)


class WeightBlob(BaseModel):
    shape: list[int]
    data: str = Field(description="base64 of little-endian float32 values")

    @classmethod
    def pack(cls, tensor: torch.Tensor) -> "WeightBlob":
        array = tensor.detach().cpu().numpy()
        raw = np.ascontiguousarray(array, dtype="<f4").tobytes()
        return cls(shape=list(array.shape), data=base64.b64encode(raw).decode("ascii"))

    def unpack(self) -> np.ndarray:
        values = np.frombuffer(base64.b64decode(self.data), dtype="<f4")
        expected = int(np.prod(self.shape)) if self.shape else 1
        if values.size != expected:
            raise ArtifactError(f"weight blob holds {values.size} values, shape {self.shape} needs {expected}")
        return values.reshape(self.shape).astype(np.float32)


class HybridArtifact(BaseModel):
    format_version: str
    config: HybridConfig
    schema_hash: str = ""
    view: View = "trigger"
    feature_names: list[str] = Field(default_factory=list)
    encoder: EncoderState | None = None
    history: list[EpochStats] = Field(default_factory=list)
    params: dict[str, WeightBlob]


def check_shapes(config: HybridConfig, params: dict[str, np.ndarray]) -> HybridNet:
    """A network for ``config`` holding ``params``; ArtifactError on any missing or misshapen tensor."""
    if "tabular.0.weight" not in params:
        raise ArtifactError("hybrid model lacks parameter tabular.0.weight")
    net = build_net(config, params["tabular.0.weight"].shape[1])
    expected = {name: tuple(value.shape) for name, value in net.state_dict().items()}
    missing = sorted(set(expected) - set(params))
    if missing:
        raise ArtifactError(f"hybrid model lacks parameters {missing}")
    unknown = sorted(set(params) - set(expected))
    if unknown:
        raise ArtifactError(f"hybrid model has unknown parameters {unknown}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ArtifactError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
    net.load_state_dict({name: torch.from_numpy(value.astype(np.float64)) for name, value in params.items()})
    return net


def save_hybrid(model: HybridModel, path: str | Path) -> Path:
    path = Path(path)
    artifact = HybridArtifact(
        format_version=model.format_version,
        config=model.config,
        schema_hash=model.schema_hash,
        view=model.view,
        feature_names=model.feature_names,
        encoder=model.encoder,
        history=model.history,
        params={name: WeightBlob.pack(value) for name, value in model.net.state_dict().items()},
    )
    try:
        path.write_text(artifact.model_dump_json(), encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot write model {path}: {e}") from e
    logger.info(f"Saved hybrid {model.view} model to {path}")
    return path


def parse_hybrid(document: dict, source: str = "<artifact>", schema_hash: str | None = None) -> HybridModel:
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactVersionError(f"{source}: unsupported model format {version!r}, expected {FORMAT_VERSION}")
    try:
        artifact = HybridArtifact.model_validate(document)
    except ValidationError as e:
        raise ArtifactError(f"{source}: malformed hybrid artifact: {e}") from e
    net = check_shapes(artifact.config, {name: blob.unpack() for name, blob in artifact.params.items()})
    if artifact.encoder is not None and artifact.encoder.schema_hash != artifact.schema_hash:
        raise SchemaMismatchError(f"{source}: encoder schema {artifact.encoder.schema_hash} != {artifact.schema_hash}")
    if schema_hash is not None and artifact.schema_hash != schema_hash:
        raise SchemaMismatchError(f"{source}: model schema {artifact.schema_hash} != expected {schema_hash}")
    return HybridModel(
        config=artifact.config,
        net=net,
        encoder=artifact.encoder,
        view=artifact.view,
        feature_names=artifact.feature_names,
        history=artifact.history,
    )


def load_hybrid(path: str | Path, schema_hash: str | None = None) -> HybridModel:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ArtifactError(f"cannot read model {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path}: not JSON: {e}") from e
    if not isinstance(document, dict):
        raise ArtifactError(f"{path}: artifact must be a JSON object")
    return parse_hybrid(document, str(path), schema_hash)
