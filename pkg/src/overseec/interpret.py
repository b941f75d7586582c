"""Turning operator prompts into terrain classes, cost programs, and rankings.

All language-model traffic goes through a narrow backend protocol so tests
and offline runs can swap in a deterministic stub. Prompts are rendered from
versioned template assets; responses are validated and, on failure, re-asked
with the validation error quoted back, up to a retry budget.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Protocol

import jsonschema
import requests

from . import dsl
from .errors import OverseecError
from .raster import ClassSpec, Geometry

ENTITY_TEMPLATE = "entity_v1.txt"
COMPOSE_TEMPLATE = "compose_v1.txt"
RANK_TEMPLATE = "rank_v1.txt"
RETRY_TEMPLATE = "retry_v1.txt"

DEFAULT_RETRIES = 3

DEFAULT_CLASSES: tuple[ClassSpec, ...] = (
    ClassSpec("road", Geometry.LINEAR),
    ClassSpec("trail", Geometry.LINEAR),
    ClassSpec("grass", Geometry.AREAL),
    ClassSpec("tree", Geometry.AREAL),
    ClassSpec("building", Geometry.AREAL),
    ClassSpec("water", Geometry.AREAL),
)

_ENTITY_SCHEMA = {
    "type": "object",
    "required": ["classes"],
    "properties": {
        "classes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "geometry"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "geometry": {"enum": ["linear", "areal"]},
                },
            },
        }
    },
}

_RANK_SCHEMA = {
    "type": "object",
    "required": ["ranks"],
    "properties": {
        "ranks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "rank"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "rank": {"type": "integer", "minimum": 1},
                },
            },
        }
    },
}


class BackendUnreachableError(OverseecError):
    """The language-model endpoint could not be reached."""


class FixtureMissError(OverseecError):
    """The stub backend has no canned response for a prompt."""

    def __init__(self, message: str, prompt: str, digest: str):
        super().__init__(message)
        self.prompt = prompt
        self.digest = digest


class MalformedResponseError(OverseecError):
    """The model kept answering outside the requested format."""


class UnparseableProgramError(OverseecError):
    """No parseable, valid cost program after exhausting retries."""


class LLMBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class LLMBackendConfig:
    endpoint: str
    model: str
    timeout: float = 30.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class StubLLMBackend:
    """Replays canned responses keyed by the SHA-256 of the rendered prompt."""

    def __init__(self, fixture_dir: Path | str):
        self.fixture_dir = Path(fixture_dir)

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        path = self.fixture_dir / f"{digest}.txt"
        if not path.is_file():
            raise FixtureMissError(
                f"no fixture {digest}.txt for prompt starting {prompt[:60]!r}",
                prompt=prompt,
                digest=digest,
            )
        return path.read_text(encoding="utf-8")

    def register(self, prompt: str, response: str) -> Path:
        """Write a canned response for a prompt; returns the fixture path."""
        self.fixture_dir.mkdir(parents=True, exist_ok=True)
        path = self.fixture_dir / f"{prompt_digest(prompt)}.txt"
        path.write_text(response, encoding="utf-8")
        return path


class HttpLLMBackend:
    """Minimal JSON-over-HTTP completion client."""

    def __init__(self, config: LLMBackendConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        last: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            try:
                resp = requests.post(
                    self.config.endpoint,
                    json={"model": self.config.model, "prompt": prompt},
                    timeout=self.config.timeout,
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = exc
                continue
            if resp.status_code != 200:
                raise BackendUnreachableError(
                    f"completion endpoint returned {resp.status_code}"
                )
            return resp.json()["text"]
        raise BackendUnreachableError(f"cannot reach {self.config.endpoint}: {last}")


@dataclass(frozen=True)
class ClassSet:
    """Terrain classes in play for a session, with where each came from.

    Provenance is "prompt" for classes the model pulled out of the mission
    statement and "default" for the always-on navigation staples.
    """

    classes: tuple[ClassSpec, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.classes:
            raise ValueError("a class set cannot be empty")
        names = [spec.name.casefold() for spec in self.classes]
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique (case-insensitive)")

    def names(self) -> list[str]:
        return [spec.name for spec in self.classes]

    def geometry_of(self, name: str) -> Geometry:
        for spec in self.classes:
            if spec.name == name:
                return spec.geometry
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps(
            {
                "classes": [
                    {
                        "name": spec.name,
                        "geometry": spec.geometry.value,
                        "source": self.provenance.get(spec.name, "prompt"),
                    }
                    for spec in self.classes
                ]
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ClassSet":
        doc = json.loads(text)
        classes = tuple(
            ClassSpec(entry["name"], Geometry(entry["geometry"]))
            for entry in doc["classes"]
        )
        provenance = {
            entry["name"]: entry.get("source", "prompt") for entry in doc["classes"]
        }
        return cls(classes, provenance)


def _load_template(name: str) -> str:
    return (resources.files("overseec") / "templates" / name).read_text(encoding="utf-8")


def _render(name: str, **subs: str) -> str:
    # str.format would trip over the JSON braces in the templates
    text = _load_template(name)
    for key, value in subs.items():
        text = text.replace("{" + key + "}", value)
    return text


def _class_listing(classes: ClassSet) -> str:
    return "\n".join(
        f"- {spec.name} ({spec.geometry.value})" for spec in classes.classes
    )


def render_entity_prompt(prompt: str) -> str:
    return _render(ENTITY_TEMPLATE, prompt=prompt)


def render_compose_prompt(prompt: str, classes: ClassSet) -> str:
    return _render(COMPOSE_TEMPLATE, prompt=prompt, classes=_class_listing(classes))


def render_rank_prompt(prompt: str, classes: ClassSet) -> str:
    return _render(RANK_TEMPLATE, prompt=prompt, classes=_class_listing(classes))


def render_retry_prompt(request: str, response: str, error: str) -> str:
    return _render(RETRY_TEMPLATE, request=request, response=response, error=error)


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def _strip_fence(text: str) -> str:
    match = _FENCE_RE.search(text)
    return match.group(1) if match else text


def _parse_json_response(text: str, schema: dict) -> dict:
    doc = json.loads(_strip_fence(text).strip())
    jsonschema.validate(doc, schema)
    return doc


def _ask(backend: LLMBackend, request: str, parse, retries: int):
    """Run request -> parse, feeding errors back into retry prompts.

    Returns (parsed value, raw response). Raises the last parse error after
    retries are exhausted; the caller wraps it in a domain error.
    """
    current = request
    last_error: Exception | None = None
    for _ in range(retries + 1):
        response = backend.complete(current)
        try:
            return parse(response), response
        except (json.JSONDecodeError, jsonschema.ValidationError, ValueError,
                OverseecError) as exc:
            last_error = exc
            current = render_retry_prompt(request, response, str(exc))
    assert last_error is not None
    raise last_error


def identify_entities(
    prompt: str, backend: LLMBackend, retries: int = DEFAULT_RETRIES
) -> ClassSet:
    """Extract terrain classes from a mission statement and merge in defaults.

    Classes named in the prompt keep the geometry the model assigned; the
    default navigation classes are appended afterwards unless the prompt
    already produced a same-named class.
    """

    def parse(response: str) -> ClassSet:
        doc = _parse_json_response(response, _ENTITY_SCHEMA)
        specs: list[ClassSpec] = []
        provenance: dict[str, str] = {}
        seen: set[str] = set()
        for entry in doc["classes"]:
            name = entry["name"].strip().lower()
            if not name or name.casefold() in seen:
                continue
            seen.add(name.casefold())
            specs.append(ClassSpec(name, Geometry(entry["geometry"])))
            provenance[name] = "prompt"
        for spec in DEFAULT_CLASSES:
            if spec.name.casefold() not in seen:
                seen.add(spec.name.casefold())
                specs.append(spec)
                provenance[spec.name] = "default"
        return ClassSet(tuple(specs), provenance)

    try:
        result, _ = _ask(backend, render_entity_prompt(prompt), parse, retries)
    except (json.JSONDecodeError, jsonschema.ValidationError, ValueError) as exc:
        raise MalformedResponseError(f"entity extraction failed: {exc}") from exc
    return result


def compose_program(
    prompt: str, classes: ClassSet, backend: LLMBackend, retries: int = DEFAULT_RETRIES
) -> dsl.CostProgram:
    """Ask the model for a cost program and return it parsed and validated.

    Parse and validation errors are quoted back to the model for another
    attempt; after the retry budget the last error surfaces as
    UnparseableProgramError.
    """
    available = set(classes.names())

    def parse(response: str) -> dsl.CostProgram:
        program = dsl.parse(_strip_fence(response).strip())
        dsl.validate(program, available)
        return program

    try:
        program, _ = _ask(backend, render_compose_prompt(prompt, classes), parse, retries)
    except FixtureMissError:
        raise
    except OverseecError as exc:
        raise UnparseableProgramError(f"no usable cost program: {exc}") from exc
    return program


def derive_rank_map(
    prompt: str, classes: ClassSet, backend: LLMBackend, retries: int = DEFAULT_RETRIES
) -> dict[str, int]:
    """Rank every class by traversal preference, 1 = most preferred.

    Ranks must cover the whole class set and stay within 1..len(classes);
    ties are allowed. Extra names in the response are ignored.
    """
    names = classes.names()

    def parse(response: str) -> dict[str, int]:
        doc = _parse_json_response(response, _RANK_SCHEMA)
        ranks = {e["name"]: e["rank"] for e in doc["ranks"] if e["name"] in names}
        missing = [name for name in names if name not in ranks]
        if missing:
            raise ValueError(f"classes missing a rank: {', '.join(missing)}")
        high = [name for name, rank in ranks.items() if rank > len(names)]
        if high:
            raise ValueError(
                f"ranks must stay within 1..{len(names)}: {', '.join(high)}"
            )
        return ranks

    try:
        result, _ = _ask(backend, render_rank_prompt(prompt, classes), parse, retries)
    except (json.JSONDecodeError, jsonschema.ValidationError, ValueError) as exc:
        raise MalformedResponseError(f"rank derivation failed: {exc}") from exc
    return result
