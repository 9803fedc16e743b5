"""Generation and embedding backends.

Two capabilities are consumed by the pipeline: conditional text generation
(the tuple extractor and the dynamic knowledge base) and sentence
embedding. Any object with a matching ``generate`` or ``embed`` method
works; the classes here are the in-tree implementations.

Backends carry a ``concurrency_safe`` attribute. When it is false the
corpus scorer serializes calls to the instance.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union

import numpy as np

from .errors import BackendError, ContractViolation, DegenerateVector

DEFAULT_MAX_OUTPUT_TOKENS = 64


@dataclass(frozen=True)
class GenerationRequest:
    input_text: str
    num_return_sequences: int = 1
    decode_mode: str = "beam"
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self):
        if self.num_return_sequences < 1:
            raise ContractViolation("num_return_sequences must be >= 1")
        if self.max_output_tokens < 1:
            raise ContractViolation("max_output_tokens must be >= 1")
        if self.decode_mode != "beam":
            raise ContractViolation(f"unsupported decode mode {self.decode_mode!r}")


@dataclass(frozen=True)
class GenerationResult:
    sequences: tuple[str, ...]
    per_sequence_loss: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if self.per_sequence_loss is not None:
            losses = tuple(float(x) for x in self.per_sequence_loss)
            if len(losses) != len(self.sequences):
                raise ContractViolation("per_sequence_loss must align with sequences")
            if any(x < 0 or math.isnan(x) for x in losses):
                raise ContractViolation("losses must be non-negative")
            object.__setattr__(self, "per_sequence_loss", losses)


class Generator(Protocol):
    concurrency_safe: bool

    def generate(self, request: GenerationRequest) -> GenerationResult: ...


class Embedder(Protocol):
    concurrency_safe: bool

    def embed(self, text: str) -> np.ndarray: ...


def _check_input(text):
    if not isinstance(text, str) or not text.strip():
        raise ContractViolation("backend input text must be non-empty")


def _truncate(result: GenerationResult, k: int) -> GenerationResult:
    if len(result.sequences) <= k:
        return result
    losses = result.per_sequence_loss[:k] if result.per_sequence_loss is not None else None
    return GenerationResult(result.sequences[:k], losses)


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateVector("cosine of a zero vector is undefined")
    value = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, value))


class ScriptedGenerator:
    """Table-lookup generator for tests and dry runs.

    ``script`` maps an exact input text to the sequences returned for it,
    best first. In strict mode an unscripted input raises ``BackendError``;
    otherwise ``default`` is used, either a fixed list or a callable of the
    input text. ``target_losses`` maps ``(source, target)`` pairs to a loss
    for :meth:`loss`. Every request is appended to ``calls``.
    """

    concurrency_safe = True

    def __init__(
        self,
        script: Optional[Mapping[str, Sequence[str]]] = None,
        strict: bool = True,
        default: Union[Sequence[str], Callable[[str], Sequence[str]], None] = None,
        losses: Optional[Mapping[str, Sequence[float]]] = None,
        target_losses: Optional[Mapping[tuple, float]] = None,
    ):
        self.script = {k: list(v) for k, v in (script or {}).items()}
        self.strict = strict
        self.default = default
        self.losses = dict(losses or {})
        self.target_losses = dict(target_losses or {})
        self.calls: list[GenerationRequest] = []
        self._lock = threading.Lock()

    def generate(self, request: GenerationRequest) -> GenerationResult:
        _check_input(request.input_text)
        with self._lock:
            self.calls.append(request)
        text = request.input_text
        if text in self.script:
            sequences = self.script[text]
        elif self.strict:
            raise BackendError(f"no scripted output for input {text!r}")
        elif callable(self.default):
            sequences = list(self.default(text))
        else:
            sequences = list(self.default or ["None"])
        losses = self.losses.get(text)
        result = GenerationResult(tuple(sequences), tuple(losses) if losses is not None else None)
        return _truncate(result, request.num_return_sequences)

    def loss(self, source: str, target: str) -> float:
        key = (source, target)
        if key not in self.target_losses:
            raise BackendError(f"no scripted loss for {key!r}")
        return float(self.target_losses[key])


_TOKEN = re.compile(r"\w+", re.UNICODE)


def _bucket(feature: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return value % dim, (1.0 if (value >> 63) & 1 else -1.0)


class HashEmbedder:
    """Deterministic feature-hashing embedder.

    Word unigrams, word bigrams and character trigrams are hashed into a
    fixed number of signed buckets. Identical texts map to identical
    vectors in every process.
    """

    concurrency_safe = True

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ContractViolation("dim must be >= 2")
        self.dim = dim

    def features(self, text: str) -> list[str]:
        lowered = text.lower()
        words = _TOKEN.findall(lowered)
        feats = ["w:" + w for w in words]
        feats += [f"b:{a} {b}" for a, b in zip(words, words[1:])]
        padded = f"#{' '.join(lowered.split())}#"
        feats += ["c:" + padded[i:i + 3] for i in range(len(padded) - 2)]
        return feats

    def embed(self, text: str) -> np.ndarray:
        _check_input(text)
        vec = np.zeros(self.dim)
        for feat in self.features(text):
            idx, sign = _bucket(feat, self.dim)
            vec[idx] += sign
        if not vec.any():
            vec[0] = 1.0
        return vec


class LookupEmbedder:
    """Embedder backed by an explicit text-to-vector table."""

    concurrency_safe = True

    def __init__(self, table: Mapping[str, Sequence[float]]):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        dims = {v.shape for v in self.table.values()}
        if len(dims) > 1:
            raise ContractViolation("all vectors must share one dimension")

    def embed(self, text: str) -> np.ndarray:
        _check_input(text)
        try:
            return self.table[text].copy()
        except KeyError:
            raise BackendError(f"no vector for {text!r}") from None


def _post_json(url, payload, timeout):
    body = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise BackendError(f"request to {url} failed: {exc}", cause=exc) from exc


class EndpointGenerator:
    """Client for a local inference server.

    Request body ``{"input", "k", "max_tokens"}``; response body
    ``{"sequences": [...], "losses": [...] | null}``.
    """

    def __init__(self, url: str, timeout: float = 60.0, concurrency_safe: bool = True):
        self.url = url
        self.timeout = timeout
        self.concurrency_safe = concurrency_safe

    def generate(self, request: GenerationRequest) -> GenerationResult:
        _check_input(request.input_text)
        data = _post_json(
            self.url,
            {"input": request.input_text, "k": request.num_return_sequences,
             "max_tokens": request.max_output_tokens},
            self.timeout,
        )
        try:
            sequences = [str(s) for s in data["sequences"]]
            losses = data.get("losses")
            result = GenerationResult(tuple(sequences), tuple(losses) if losses is not None else None)
        except (KeyError, TypeError, ContractViolation) as exc:
            raise BackendError(f"malformed response from {self.url}: {exc}", cause=exc) from exc
        return _truncate(result, request.num_return_sequences)

    def check(self):
        try:
            urllib.request.urlopen(self.url, timeout=min(self.timeout, 5.0)).close()
        except urllib.error.HTTPError:
            pass  # server is up; it just rejects GET
        except (urllib.error.URLError, OSError) as exc:
            raise BackendError(f"backend at {self.url} is unreachable: {exc}", cause=exc) from exc


class EndpointEmbedder:
    """Embedding client: request ``{"input": text}``, response ``{"embedding": [...]}``."""

    def __init__(self, url: str, timeout: float = 60.0, concurrency_safe: bool = True):
        self.url = url
        self.timeout = timeout
        self.concurrency_safe = concurrency_safe

    def embed(self, text: str) -> np.ndarray:
        _check_input(text)
        data = _post_json(self.url, {"input": text}, self.timeout)
        try:
            vec = np.asarray(data["embedding"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed response from {self.url}: {exc}", cause=exc) from exc
        if vec.ndim != 1 or not np.all(np.isfinite(vec)):
            raise BackendError(f"non-finite or non-vector embedding from {self.url}")
        return vec

    check = EndpointGenerator.check


class Seq2SeqGenerator:
    """Beam-search generation from a local Hugging Face seq2seq checkpoint.

    Used for both the fine-tuned tuple extractor (T5) and the dynamic
    knowledge base (COMET-BART). Exclusive-use: the pipeline serializes it.
    """

    concurrency_safe = False

    def __init__(self, model_path: str, device: str = "cpu", num_beams: Optional[int] = None):
        try:
            import torch  # noqa: F401
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
        except ImportError as exc:
            raise BackendError("transformers and torch are required for model backends", cause=exc) from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_path)
            self.model = AutoModelForSeq2SeqLM.from_pretrained(model_path).to(device).eval()
        except (OSError, ValueError) as exc:
            raise BackendError(f"cannot load model from {model_path}: {exc}", cause=exc) from exc
        self.device = device
        self.num_beams = num_beams

    def generate(self, request: GenerationRequest) -> GenerationResult:
        import torch

        _check_input(request.input_text)
        k = request.num_return_sequences
        batch = self.tokenizer([request.input_text], return_tensors="pt", truncation=True).to(self.device)
        with torch.no_grad():
            out = self.model.generate(
                **batch,
                num_beams=max(k, self.num_beams or k),
                num_return_sequences=k,
                max_new_tokens=request.max_output_tokens,
                early_stopping=True,
            )
        texts = self.tokenizer.batch_decode(out, skip_special_tokens=True)
        return GenerationResult(tuple(t.strip() for t in texts))

    def loss(self, source: str, target: str) -> float:
        """Mean token cross-entropy of ``target`` given ``source``."""
        import torch

        _check_input(source)
        _check_input(target)
        batch = self.tokenizer([source], return_tensors="pt", truncation=True).to(self.device)
        labels = self.tokenizer([target], return_tensors="pt", truncation=True).input_ids.to(self.device)
        with torch.no_grad():
            out = self.model(**batch, labels=labels)
        return float(out.loss)


class SentenceTransformerEmbedder:
    """Sentence-Transformers model (``paraphrase-MiniLM-L6-v2`` by default)."""

    concurrency_safe = False

    def __init__(self, model_name_or_path: str = "sentence-transformers/paraphrase-MiniLM-L6-v2",
                 device: str = "cpu"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise BackendError("sentence-transformers is required for this embedder", cause=exc) from exc
        try:
            self.model = SentenceTransformer(model_name_or_path, device=device)
        except Exception as exc:  # the library raises a wide range of types
            raise BackendError(f"cannot load embedder {model_name_or_path}: {exc}", cause=exc) from exc

    def embed(self, text: str) -> np.ndarray:
        _check_input(text)
        return np.asarray(self.model.encode(text, convert_to_numpy=True), dtype=float)
