# biaslab/dataset.py
# Column-oriented numeric dataset shared by the Monte Carlo engine and the
# diagnostics, with a lossless CSV round trip through pandas.

import io
import logging
import math
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from biaslab.errors import DataFormatError, UnknownColumnError

logger = logging.getLogger(__name__)


class Dataset:
    """
    Ordered mapping of variable name to a read-only float vector.
    All columns have the same length and hold only finite values.
    """

    def __init__(self, columns: Mapping[str, np.ndarray]):
        frozen = {}
        length = None
        for name, values in columns.items():
            array = np.array(values, dtype=float).reshape(-1)
            if length is None:
                length = array.shape[0]
            elif array.shape[0] != length:
                raise DataFormatError(f"column '{name}' has {array.shape[0]} rows, expected {length}")
            if not np.all(np.isfinite(array)):
                raise DataFormatError(f"column '{name}' contains non-finite values")
            array.setflags(write=False)
            frozen[name] = array
        self._columns = MappingProxyType(frozen)
        self._n = length or 0

    @property
    def names(self) -> tuple:
        return tuple(self._columns)

    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    def __contains__(self, name: str) -> bool:
        return name in self._columns

    def __iter__(self) -> Iterator[str]:
        return iter(self._columns)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise UnknownColumnError(name) from None

    def require(self, *names: str) -> None:
        for name in names:
            if name not in self._columns:
                raise UnknownColumnError(name)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        self.require(*names)
        if not names:
            return np.empty((self._n, 0))
        return np.column_stack([self._columns[n] for n in names])

    def filter(self, mask: np.ndarray) -> "Dataset":
        return Dataset({name: values[mask] for name, values in self._columns.items()})

    def take(self, indices: np.ndarray) -> "Dataset":
        return Dataset({name: values[indices] for name, values in self._columns.items()})

    def select(self, names: Sequence[str]) -> "Dataset":
        self.require(*names)
        return Dataset({name: self._columns[name] for name in names})

    def equals(self, other: "Dataset") -> bool:
        return self.names == other.names and all(np.array_equal(self[n], other[n]) for n in self.names)

    # --- pandas / CSV ---

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: values for name, values in self._columns.items()})

    @staticmethod
    def _parse_float(value) -> Optional[float]:
        # float() maps the shortest repr pandas writes back to the same double.
        try:
            number = float(value)
        except (TypeError, ValueError):
            return None
        return None if math.isnan(number) else number

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Dataset":
        columns = {}
        for name in frame.columns:
            values = [cls._parse_float(v) for v in frame[name]]
            if None in values:
                row = values.index(None) + 2  # header is line 1
                raise DataFormatError(f"column '{name}' has a missing or non-numeric value on line {row}")
            columns[str(name)] = np.array(values, dtype=float)
        return cls(columns)

    def to_csv_string(self) -> str:
        return self.to_frame().to_csv(index=False, lineterminator="\n")

    def to_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv_string(), encoding="utf-8")
        logger.info(f"Wrote {self._n} rows x {len(self._columns)} columns to {path}.")

    @classmethod
    def from_csv_string(cls, text: str) -> "Dataset":
        try:
            frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataFormatError(f"cannot parse CSV: {e}") from e
        return cls.from_frame(frame)

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "Dataset":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise DataFormatError(f"cannot read data file {path}: {e}") from e
        data = cls.from_csv_string(text)
        logger.info(f"Read {data.n} rows x {len(data.names)} columns from {path}.")
        return data

    def __repr__(self) -> str:
        return f"Dataset(n={self._n}, columns={list(self._columns)})"
