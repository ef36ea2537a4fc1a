from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mean_field_dml.errors import ConfigError
from mean_field_dml.models import Dataset


@dataclass(frozen=True)
class SamplerSpec:
    """P classes per batch, K samples per class."""

    classes_per_batch: int = 8
    samples_per_class: int = 4

    def __post_init__(self) -> None:
        if self.classes_per_batch < 1 or self.samples_per_class < 1:
            raise ConfigError(
                f"sampler needs P, K >= 1, got P={self.classes_per_batch}, K={self.samples_per_class}"
            )

    @property
    def batch_size(self) -> int:
        return self.classes_per_batch * self.samples_per_class


class ClassBalancedSampler:
    """Draws P distinct classes and K indices from each.

    Classes with at least K members are sampled without replacement, smaller
    classes with replacement. All randomness comes from the generator passed to
    `sample`, so samplers hold no hidden state.
    """

    def __init__(self, labels: np.ndarray, spec: SamplerSpec) -> None:
        labels = np.asarray(labels)
        self._spec = spec
        self._class_ids = np.unique(labels)
        if spec.classes_per_batch > self._class_ids.size:
            raise ConfigError(
                f"sampler.classes_per_batch: cannot draw {spec.classes_per_batch} classes per batch "
                f"from {self._class_ids.size} training classes"
            )
        self._members = {int(c): np.flatnonzero(labels == c) for c in self._class_ids}

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        spec = self._spec
        chosen = rng.choice(self._class_ids, size=spec.classes_per_batch, replace=False)
        indices: list[np.ndarray] = []
        for class_id in chosen:
            members = self._members[int(class_id)]
            replace = members.size < spec.samples_per_class
            indices.append(rng.choice(members, size=spec.samples_per_class, replace=replace))
        return np.concatenate(indices).astype(np.int64)


def sample_batch(ds: Dataset, spec: SamplerSpec, rng: np.random.Generator) -> np.ndarray:
    return ClassBalancedSampler(ds.labels, spec).sample(rng)
