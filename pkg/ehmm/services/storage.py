"""CSV and run-config persistence for ehmm.

CSV files: header row, comma separator, '.' decimal point, LF line endings,
floats with 17 significant digits so that parsing them back is bitwise exact.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values

from ehmm.core.config import settings
from ehmm.core.errors import StorageError, UsageError
from ehmm.core.model import ObsSeq, StateSeq
from ehmm.models import RunConfig
from ehmm.services.chain import ChainRecord

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DATA_COLUMNS = ["t", "x", "y"]
SAMPLE_COLUMNS = ["iter", "t", "x"]
SUMMARY_COLUMNS = ["iter", "log_joint", "switches", "accept_rate", "inner_ops"]
ORACLE_COLUMNS = ["t", "p_positive", "mean", "sd"]


class CsvStore:
    """Service for reading and writing run artifacts."""

    def __init__(self, float_format: Optional[str] = None):
        self.float_format = float_format or settings.csv_float_format

    # Generic frame IO
    def write_frame(self, frame: pd.DataFrame, path: PathLike) -> Path:
        """Write a frame with the fixed CSV dialect."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(
                path,
                index=False,
                float_format=self.float_format,
                lineterminator="\n",
                na_rep="",
            )
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc
        logger.debug("wrote %s (%d rows)", path, len(frame))
        return path

    def read_frame(self, path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
        """Read a CSV and check it has the expected columns."""
        path = Path(path)
        if not path.is_file():
            raise StorageError(f"file not found: {path}")
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except OSError as exc:
            raise StorageError(f"cannot read {path}: {exc}") from exc
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise UsageError(f"cannot parse {path}: {exc}") from exc
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise UsageError(f"{path} is missing columns {missing}")
        return frame

    # Data
    def write_data(self, path: PathLike, x: StateSeq, y: ObsSeq) -> Path:
        frame = pd.DataFrame(
            {"t": np.arange(len(y)), "x": np.asarray(x.values, dtype=float), "y": y.values}
        )
        return self.write_frame(frame, path)

    def read_data(self, path: PathLike) -> Tuple[StateSeq, ObsSeq]:
        frame = self.read_frame(path, DATA_COLUMNS)
        if frame.empty:
            raise UsageError(f"{path} holds no data rows")
        if not np.array_equal(frame["t"].to_numpy(), np.arange(len(frame))):
            raise UsageError(f"{path}: column t must be 0..n-1 in order")
        x = frame["x"].to_numpy(dtype=float)
        y = frame["y"].to_numpy(dtype=float)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise UsageError(f"{path} contains non-finite values")
        return StateSeq(x), ObsSeq(y)

    def read_states(self, path: PathLike) -> StateSeq:
        """An initial sequence file: either t,x or the full data layout."""
        frame = self.read_frame(path, ["t", "x"])
        return StateSeq(frame["x"].to_numpy(dtype=float))

    # Chain output
    def write_samples(self, path: PathLike, rec: ChainRecord) -> Path:
        m, n = rec.samples.shape
        frame = pd.DataFrame(
            {
                "iter": np.repeat(rec.sample_iters, n),
                "t": np.tile(np.arange(n), m),
                "x": np.asarray(rec.samples, dtype=float).reshape(-1),
            }
        )
        return self.write_frame(frame, path)

    def read_samples(self, path: PathLike) -> ChainRecord:
        frame = self.read_frame(path, SAMPLE_COLUMNS)
        if frame.empty:
            return ChainRecord.from_samples(np.empty(0, dtype=np.int64), np.empty((0, 0)))
        try:
            wide = frame.pivot(index="iter", columns="t", values="x").sort_index()
        except ValueError as exc:
            raise UsageError(f"{path}: duplicate (iter, t) rows") from exc
        wide = wide.reindex(columns=sorted(wide.columns))
        if wide.isna().to_numpy().any() or not np.array_equal(
            wide.columns.to_numpy(), np.arange(wide.shape[1])
        ):
            raise UsageError(f"{path}: every stored iteration needs t = 0..n-1")
        return ChainRecord.from_samples(wide.index.to_numpy(), wide.to_numpy(dtype=float))

    def write_summary(self, path: PathLike, rec: ChainRecord) -> Path:
        frame = pd.DataFrame(
            {
                "iter": np.arange(1, rec.iterations + 1),
                "log_joint": rec.log_joint,
                "switches": rec.switches,
                "accept_rate": rec.accept_rate,
                "inner_ops": rec.inner_ops,
            }
        )
        return self.write_frame(frame[SUMMARY_COLUMNS], path)

    def write_timing(self, path: PathLike, rec: ChainRecord) -> Path:
        frame = pd.DataFrame({"iter": np.arange(1, rec.iterations + 1), "seconds": rec.seconds})
        return self.write_frame(frame, path)

    def write_pools(self, path: PathLike, iteration: int, pools, path_idx, current) -> Path:
        """Every pool entry of one update with the current and selected markers."""
        rows = []
        for t, pool in enumerate(pools):
            for flat, j in enumerate(pool.signed_indexes()):
                rows.append(
                    (iteration, t, int(j), float(pool.states[flat]),
                     int(flat == current[t]), int(flat == path_idx[t]))
                )
        frame = pd.DataFrame(rows, columns=["iter", "t", "j", "x", "is_current", "is_selected"])
        return self.write_frame(frame, path)

    # Oracle
    def write_oracle(self, path: PathLike, p_positive, mean, sd) -> Path:
        frame = pd.DataFrame(
            {"t": np.arange(len(p_positive)), "p_positive": p_positive, "mean": mean, "sd": sd}
        )
        return self.write_frame(frame, path)

    def read_oracle(self, path: PathLike) -> pd.DataFrame:
        frame = self.read_frame(path, ORACLE_COLUMNS)
        if not np.array_equal(frame["t"].to_numpy(), np.arange(len(frame))):
            raise UsageError(f"{path}: column t must be 0..n-1 in order")
        return frame

    # Diagnostics
    def write_diag(self, path: PathLike, columns: Dict[str, np.ndarray]) -> Path:
        """Wide table; shorter columns are padded with empty cells."""
        rows = max((len(v) for v in columns.values()), default=0)
        data = {"row": np.arange(rows)}
        for name, values in columns.items():
            padded = np.full(rows, np.nan)
            padded[: len(values)] = values
            data[name] = padded
        return self.write_frame(pd.DataFrame(data), path)

    def write_table(self, path: PathLike, records: Sequence[Dict[str, object]]) -> Path:
        return self.write_frame(pd.DataFrame.from_records(list(records)), path)

    # Run configs
    def read_run_config(self, path: PathLike) -> Dict[str, str]:
        """Flat ``key = value`` file; ``#`` starts a comment."""
        path = Path(path)
        if not path.is_file():
            raise StorageError(f"config file not found: {path}")
        values = dotenv_values(path)
        return {k: ("" if v is None else v) for k, v in values.items()}

    def write_resolved_config(self, path: PathLike, cfg: RunConfig, command: str) -> Path:
        path = Path(path)
        lines = [f"# resolved configuration for '{command}'"]
        lines += [f"{key} = {value}" for key, value in cfg.to_flat().items()]
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc
        return path


# Global storage service instance
csv_store = CsvStore()
