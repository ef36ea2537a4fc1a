from __future__ import annotations

from enum import StrEnum

import numpy as np

from mean_field_dml.errors import DataError
from mean_field_dml.models import Dataset


class SplitRule(StrEnum):
    FIRST_HALF_CLASSES = "first_half_classes"


def class_disjoint_split(
    ds: Dataset,
    rule: SplitRule = SplitRule.FIRST_HALF_CLASSES,
) -> tuple[Dataset, Dataset]:
    """Train on the first ceil(|C|/2) classes in ascending id order, test on the rest."""
    class_ids = ds.class_ids
    if class_ids.size < 2:
        raise DataError(f"dataset {ds.name!r} has {class_ids.size} class(es); a class-disjoint split needs at least 2")
    cutoff = -(-class_ids.size // 2)
    train_mask = np.isin(ds.labels, class_ids[:cutoff])
    return ds.subset(train_mask, f"{ds.name}-train"), ds.subset(~train_mask, f"{ds.name}-test")
