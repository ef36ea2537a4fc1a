from mean_field_dml.datasets.io import DatasetFormat, load_dataset, save_dataset
from mean_field_dml.datasets.profiles import CLASSIFICATION_BATCH, PAIR_BATCH, SYNTHETIC_SUITE
from mean_field_dml.datasets.sampler import ClassBalancedSampler, SamplerSpec, sample_batch
from mean_field_dml.datasets.splits import SplitRule, class_disjoint_split
from mean_field_dml.datasets.synthetic import SyntheticDatasetGenerator, SyntheticSpec, generate_synthetic

__all__ = [
    "DatasetFormat",
    "load_dataset",
    "save_dataset",
    "CLASSIFICATION_BATCH",
    "PAIR_BATCH",
    "SYNTHETIC_SUITE",
    "ClassBalancedSampler",
    "SamplerSpec",
    "sample_batch",
    "SplitRule",
    "class_disjoint_split",
    "SyntheticDatasetGenerator",
    "SyntheticSpec",
    "generate_synthetic",
]
