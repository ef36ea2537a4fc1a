from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any, Mapping

import numpy as np

from mean_field_dml.errors import ConfigError
from mean_field_dml.models import Dataset


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian clusters around centers drawn uniformly on a sphere of radius center_scale."""

    num_classes: int = 16
    per_class: int = 50
    feature_dim: int = 64
    center_scale: float = 1.0
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("num_classes", "per_class", "feature_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"synthetic.{name} must be >= 1, got {getattr(self, name)}")
        if self.noise_sigma < 0:
            raise ConfigError(f"synthetic.noise_sigma must be >= 0, got {self.noise_sigma}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any], prefix: str = "synthetic") -> SyntheticSpec:
        types = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(mapping) - set(types))
        if unknown:
            raise ConfigError(f"{prefix}.{unknown[0]}: unknown key")
        values: dict[str, Any] = {}
        for key, value in mapping.items():
            caster = int if types[key] == "int" else float
            try:
                values[key] = caster(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{prefix}.{key}: expected a number, got {value!r}") from None
        return cls(**values)

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class SyntheticDatasetGenerator:
    """Generate well-separated class clusters for tests, benchmarks and acceptance runs."""

    def __init__(self, spec: SyntheticSpec) -> None:
        self._spec = spec

    def generate(self, name: str = "synthetic") -> Dataset:
        spec = self._spec
        rng = np.random.default_rng(spec.seed)
        centers = self._draw_centers(rng)

        labels = np.repeat(np.arange(spec.num_classes, dtype=np.int64), spec.per_class)
        noise = rng.standard_normal((labels.size, spec.feature_dim))
        features = centers[labels] + spec.noise_sigma * noise

        order = rng.permutation(labels.size)
        return Dataset(features=features[order], labels=labels[order], name=name)

    def centers(self) -> np.ndarray:
        """The class centers `generate` places its clusters around."""
        return self._draw_centers(np.random.default_rng(self._spec.seed))

    def _draw_centers(self, rng: np.random.Generator) -> np.ndarray:
        centers = rng.standard_normal((self._spec.num_classes, self._spec.feature_dim))
        return centers * (self._spec.center_scale / np.linalg.norm(centers, axis=1, keepdims=True))


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    return SyntheticDatasetGenerator(spec).generate()
