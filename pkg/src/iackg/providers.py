"""Embedding and text-generation providers.

The hashed bag-of-words embedder and the stub generators are deterministic
and need no network; the HTTP providers talk to any service that speaks the
small JSON protocol documented on each class.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import httpx

_WORD = re.compile(r"[a-z0-9]+")


class ProviderError(RuntimeError):
    pass


class EmbeddingProvider(Protocol):
    dimension: int
    model_id: str

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class GenerationProvider(Protocol):
    model_id: str

    def generate(self, prompt: str, temperature: float = 0.0) -> str: ...


def tokens(text: str) -> list[str]:
    """Lower-cased alphanumeric words; underscores split words."""
    return _WORD.findall(text.lower())


def _bucket(token: str, dimension: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dimension


@dataclass
class HashingEmbedder:
    """Unit-normalised hashed bag of words.

    Texts without any word map to the zero vector, which has cosine 0 with
    everything.
    """

    dimension: int = 768
    model_id: str = "hashed-bow"

    def embed_one(self, text: str) -> list[float]:
        vec = [0.0] * self.dimension
        for tok in tokens(text):
            vec[_bucket(tok, self.dimension)] += 1.0
        norm = math.sqrt(math.fsum(v * v for v in vec))
        if norm == 0.0:
            return vec
        return [v / norm for v in vec]

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self.embed_one(t) for t in texts]


@dataclass
class HttpEmbedder:
    """POST ``{"texts": [...]}`` -> ``{"vectors": [[...]], "dimension": n}``."""

    url: str
    dimension: int = 768
    model_id: str = "http-embedder"
    timeout: float = 60.0

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        try:
            resp = httpx.post(self.url, json={"texts": list(texts)}, timeout=self.timeout)
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        if body.get("dimension", self.dimension) != self.dimension:
            raise ProviderError(f"provider dimension {body.get('dimension')} != {self.dimension}")
        return body["vectors"]


@dataclass
class HttpGenerator:
    """POST ``{"prompt", "temperature", "model"}`` -> ``{"text": ...}``."""

    url: str
    model_id: str = "gpt-4o"
    timeout: float = 300.0

    def generate(self, prompt: str, temperature: float = 0.0) -> str:
        try:
            resp = httpx.post(self.url, json={"prompt": prompt, "temperature": temperature, "model": self.model_id},
                              timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["text"]
        except (httpx.HTTPError, ValueError, KeyError) as exc:
            raise ProviderError(f"generation request failed: {exc}") from exc


@dataclass
class EchoGenerator:
    """Returns the prompt unchanged."""

    model_id: str = "stub-echo"

    def generate(self, prompt: str, temperature: float = 0.0) -> str:
        return prompt


@dataclass
class FunctionGenerator:
    fn: Callable[[str], str]
    model_id: str = "stub-fn"

    def generate(self, prompt: str, temperature: float = 0.0) -> str:
        return self.fn(prompt)


@dataclass
class TemplateGenerator:
    """Emits one empty resource block per ``RESOURCE:`` line in the prompt,
    fenced as HCL. Useful for exercising validators without a model."""

    model_id: str = "stub-template"

    def generate(self, prompt: str, temperature: float = 0.0) -> str:
        names = re.findall(r"\bRESOURCE: ([A-Za-z0-9_]+)$", prompt, flags=re.M)
        body = "\n\n".join(f'resource "{n}" "this" {{\n}}' for n in dict.fromkeys(names))
        return f"```hcl\n{body}\n```\n"


def make_embedder(spec: Optional[dict]) -> EmbeddingProvider:
    spec = dict(spec or {"kind": "hashing"})
    kind = spec.pop("kind", "hashing")
    if kind == "hashing":
        return HashingEmbedder(**spec)
    if kind == "http":
        return HttpEmbedder(**spec)
    raise ValueError(f"unknown embedder kind {kind!r}")


def make_generator(spec: Optional[dict]) -> GenerationProvider:
    spec = dict(spec or {"kind": "echo"})
    kind = spec.pop("kind", "echo")
    if kind == "echo":
        return EchoGenerator(**spec)
    if kind == "template":
        return TemplateGenerator(**spec)
    if kind == "http":
        return HttpGenerator(**spec)
    raise ValueError(f"unknown generator kind {kind!r}")
