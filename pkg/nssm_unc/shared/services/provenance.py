"""
Provenance hashing for pipeline artifacts.

Includes:
- sha256 of files on disk
- sha256 of canonical JSON (config sections, headers)
- hash verification with a readable refusal
"""

import hashlib
import json
from pathlib import Path
from typing import Any

from nssm_unc.core.exceptions import ProvenanceError

_CHUNK = 1 << 20


class ProvenanceManager:
    """Central hashing helpers"""

    @staticmethod
    def canonical_json(data: Any) -> str:
        """Stable JSON text: sorted keys, compact separators"""
        return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)

    @staticmethod
    def hash_data(data: Any) -> str:
        """sha256 of the canonical JSON form"""
        text = ProvenanceManager.canonical_json(data)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @staticmethod
    def hash_bytes(payload: bytes) -> str:
        return hashlib.sha256(payload).hexdigest()

    @staticmethod
    def hash_file(path: str | Path) -> str:
        """sha256 of a file's bytes"""
        digest = hashlib.sha256()
        with open(path, "rb") as f:
            while chunk := f.read(_CHUNK):
                digest.update(chunk)
        return digest.hexdigest()

    @staticmethod
    def verify(expected: str | None, actual: str, what: str) -> None:
        """Refuses to continue when a recorded hash does not match"""
        if expected != actual:
            raise ProvenanceError(
                f"{what} hash mismatch: recorded {str(expected)[:12]}, "
                f"found {actual[:12]}; rerun the upstream stage"
            )
