from __future__ import annotations

from mean_field_dml.datasets.sampler import SamplerSpec
from mean_field_dml.datasets.synthetic import SyntheticSpec

# 8 training + 8 test classes once split by class_disjoint_split.
SYNTHETIC_SUITE = SyntheticSpec(
    num_classes=16,
    per_class=50,
    feature_dim=64,
    center_scale=1.0,
    noise_sigma=0.05,
    seed=0,
)

# Batch compositions for classification-style (mean-field) and pair-based losses.
CLASSIFICATION_BATCH = SamplerSpec(classes_per_batch=32, samples_per_class=1)
PAIR_BATCH = SamplerSpec(classes_per_batch=8, samples_per_class=4)
