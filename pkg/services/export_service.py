# GrateWave/services/export_service.py

import csv
import hashlib
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from PIL import Image

from core.exceptions import ExportError
from utils.logger import get_logger

logger = get_logger("services.export_service")

PGM_MAX = 65535
HASH_LENGTH = 12
MANIFEST_NAME = "manifest.json"


def artifact_hash(config_json: str, command: str, seed: int, version: str) -> str:
    """Short sha256 of everything an artifact depends on."""
    digest = hashlib.sha256()
    for part in (config_json, command, str(seed), version):
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()[:HASH_LENGTH]


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        return number if math.isfinite(number) else None
    if isinstance(value, (np.complexfloating, complex)):
        return {"re": _plain(value.real), "im": _plain(value.imag)}
    return value


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class ExportService:
    """
    Writes a command's artifacts into one output directory.

    Every file is named `<command>-<wall>-<hash>.<ext>` and recorded so that a
    failed run can remove what it already wrote.
    """

    def __init__(self, out_dir: str, run_hash: str):
        """
        Args:
            out_dir: Output directory, created when missing.
            run_hash: Hash from artifact_hash() shared by all files of the run.
        """
        self.out_dir = out_dir
        self.run_hash = run_hash
        self.written: List[str] = []
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as exc:
            raise ExportError(f"cannot create output directory {out_dir}: {exc}") from exc
        if not os.access(out_dir, os.W_OK):
            raise ExportError(f"output directory {out_dir} is not writable")

    def artifact_path(self, command: str, wall: str, ext: str) -> str:
        return os.path.join(self.out_dir, f"{command}-{wall}-{self.run_hash}.{ext}")

    def _open(self, path: str, newline: Optional[str] = None):
        self.written.append(path)
        try:
            return open(path, "w", encoding="utf-8", newline=newline)
        except OSError as exc:
            raise ExportError(f"cannot write {path}: {exc}") from exc

    def write_csv(self, path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        with self._open(path, newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
        logger.info(f"💾 Wrote {os.path.basename(path)}")
        return path

    def write_json(self, path: str, payload: Any) -> str:
        with self._open(path) as handle:
            json.dump(_plain(payload), handle, sort_keys=True, indent=2, allow_nan=False)
            handle.write("\n")
        logger.info(f"💾 Wrote {os.path.basename(path)}")
        return path

    def write_pgm(self, path: str, values: np.ndarray, masked: Optional[np.ndarray] = None,
                  extent: Optional[Dict[str, Sequence[float]]] = None) -> str:
        """
        16-bit binary PGM heatmap with linear min/max scaling over unmasked
        samples. Row 0 of `values` (lowest y) becomes the bottom image row;
        masked samples are written as 0. The scaling goes to `<path>.json`.
        """
        data = np.asarray(values, dtype=float)
        mask = np.zeros(data.shape, dtype=bool) if masked is None else np.asarray(masked, dtype=bool)
        mask = mask | ~np.isfinite(data)
        valid = data[~mask]
        low = float(valid.min()) if valid.size else 0.0
        high = float(valid.max()) if valid.size else 0.0
        span = high - low
        scaled = np.zeros(data.shape)
        if span > 0:
            scaled[~mask] = (data[~mask] - low) / span * PGM_MAX
        pixels = np.flipud(np.rint(scaled)).astype(np.int32)

        self.written.append(path)
        try:
            Image.fromarray(pixels).save(path, format="PPM")
        except (OSError, ValueError) as exc:
            raise ExportError(f"cannot write {path}: {exc}") from exc

        sidecar = {
            "format": "P5", "bit_depth": 16, "max_value": PGM_MAX, "scaling": "linear",
            "min": low, "max": high, "masked_value": 0,
            "rows": int(data.shape[0]), "cols": int(data.shape[1]),
            "row_order": "top image row is the largest y",
        }
        if extent:
            sidecar["extent"] = extent
        self.write_json(f"{path}.json", sidecar)
        logger.info(f"💾 Wrote {os.path.basename(path)}")
        return path

    def write_manifest(self, record: Dict[str, Any]) -> str:
        """manifest.json: config echo, version, timings and the artifact list."""
        path = os.path.join(self.out_dir, MANIFEST_NAME)
        payload = dict(record)
        payload["artifacts"] = [os.path.basename(p) for p in self.written if p != path]
        return self.write_json(path, payload)

    def cleanup(self):
        """Removes every file this service started writing."""
        for path in reversed(self.written):
            try:
                if os.path.exists(path):
                    os.remove(path)
                    logger.warning(f"⚠️ Removed partial artifact {os.path.basename(path)}")
            except OSError as exc:
                logger.error(f"❌ Could not remove {path}: {exc}")
        self.written.clear()
