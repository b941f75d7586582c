"""Content-addressed artifact store.

Artifacts are immutable blobs addressed by the SHA-256 of their content, so
identical outputs dedupe for free and references double as integrity hashes.
Reads re-hash the blob and fail loudly on corruption.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

from .errors import OverseecError

_REF_RE = re.compile(r"^[0-9a-f]{64}$")


class UnknownRefError(OverseecError):
    """No artifact exists under the given reference."""


class IntegrityError(OverseecError):
    """Stored bytes no longer match their reference hash."""


class ArtifactStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        (self.root / "meta").mkdir(parents=True, exist_ok=True)

    def _object_path(self, ref: str) -> Path:
        if not _REF_RE.match(ref):
            raise UnknownRefError(f"malformed artifact reference {ref!r}")
        return self.root / "objects" / ref

    def put(self, data: bytes, media_type: str) -> str:
        """Store bytes, returning their reference. Existing blobs are never rewritten."""
        ref = hashlib.sha256(data).hexdigest()
        path = self._object_path(ref)
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.rename(path)
            (self.root / "meta" / f"{ref}.json").write_text(
                json.dumps({"media_type": media_type, "size": len(data)}),
                encoding="utf-8",
            )
        return ref

    def exists(self, ref: str) -> bool:
        return _REF_RE.match(ref) is not None and self._object_path(ref).exists()

    def get(self, ref: str) -> bytes:
        path = self._object_path(ref)
        if not path.exists():
            raise UnknownRefError(f"no artifact {ref}")
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != ref:
            raise IntegrityError(f"artifact {ref} fails its hash check")
        return data

    def media_type(self, ref: str) -> str:
        path = self.root / "meta" / f"{ref}.json"
        if not self.exists(ref) or not path.exists():
            raise UnknownRefError(f"no artifact {ref}")
        return json.loads(path.read_text(encoding="utf-8"))["media_type"]

    def put_text(self, text: str, media_type: str = "text/plain") -> str:
        return self.put(text.encode("utf-8"), media_type)

    def put_json(self, doc, media_type: str = "application/json") -> str:
        return self.put(
            json.dumps(doc, sort_keys=True).encode("utf-8"), media_type
        )

    def get_text(self, ref: str) -> str:
        return self.get(ref).decode("utf-8")

    def get_json(self, ref: str):
        return json.loads(self.get(ref).decode("utf-8"))
