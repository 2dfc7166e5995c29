import csv
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from nssm_unc.core.exceptions import ArtifactIOError, DatasetFormatError


def write_csv_table(
    path: str | Path, header: Sequence[str], columns: Sequence[Sequence[float]]
) -> Path:
    """Writes equal-length columns under a header; floats keep their round-trip repr."""
    path = Path(path)
    lengths = {len(col) for col in columns}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in zip(*columns, strict=True):
                writer.writerow([_cell(value) for value in row])
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}") from e
    return path


def read_csv_table(path: str | Path, header: Sequence[str]) -> dict[str, np.ndarray]:
    """Reads a table written by ``write_csv_table``; every cell must parse as a float."""
    path = Path(path)
    try:
        f = open(path, newline="")
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path}: {e}") from e

    with f:
        reader = csv.reader(f)
        found = next(reader, None)
        if found is None or [h.strip() for h in found] != list(header):
            raise DatasetFormatError(
                str(path), 1, f"expected header {','.join(header)}, found {found}"
            )
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    str(path), line_no, f"expected {len(header)} columns, found {len(row)}"
                )
            parsed = []
            for name, cell in zip(header, row, strict=True):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DatasetFormatError(
                        str(path), line_no, f"not a number: {cell!r}", field=name
                    ) from None
            rows.append(parsed)

    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _cell(value: float | int | str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))
