"""Container for a response/predictor dataset."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    """Response vector plus predictor matrix with column names.

    `standardized` records whether the predictor columns are already on the
    mean-0 / variance-1 scale; loaders and generators produce raw data.
    """

    y: np.ndarray
    x: np.ndarray
    names: list[str] = field(default_factory=list)
    response_name: str = "y"
    standardized: bool = False

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("predictor matrix must be 2-dimensional")
        if self.y.shape[0] != self.x.shape[0]:
            raise ValueError("response and predictors disagree on row count")
        if not self.names:
            self.names = [f"x{j + 1}" for j in range(self.x.shape[1])]
        if len(self.names) != self.x.shape[1]:
            raise ValueError("one name per predictor column required")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]
