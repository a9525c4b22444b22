"""Embedding backends and similarity scoring.

Three interchangeable backends produce fixed-dimension embeddings:

* ``ReferenceEmbedder`` — a deterministic, dependency-free stand-in model
  (grayscale block means, mean-subtracted, L2-normalized).
* ``PrecomputedEmbedder`` — reads a store of embeddings keyed by the content
  hash of the pixel tensor.
* ``SubprocessEmbedder`` — drives an external model over a newline-delimited
  JSON protocol on the child's stdin/stdout.

The wire protocol and store layout are shared with external adapters and are
bit-exact: pixel tensors and embeddings travel as base64 of little-endian
32-bit floats in row-major order.
"""

from __future__ import annotations

import base64
import hashlib
import json
import shlex
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BackendIOError,
    FreqlensError,
    InvalidConfigError,
    InvalidInputError,
    MissingEmbeddingError,
)
from .spectral import SpatialImage

ZERO_NORM_EPS = 1e-12
PROTOCOL_VERSION = 1
STORE_INDEX_NAME = "index.json"
STORE_FILE_SUFFIX = ".f32"


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; 0 if either vector has negligible norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError(f"embedding dimensions differ: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a < ZERO_NORM_EPS or norm_b < ZERO_NORM_EPS:
        return 0.0
    if np.array_equal(a, b):
        return 1.0
    value = float(np.dot(a, b) / (norm_a * norm_b))
    return min(1.0, max(-1.0, value))


def pixel_bytes(image: SpatialImage) -> bytes:
    """Row-major little-endian float32 serialization of the pixel tensor.

    This is the byte string the wire protocol base64-encodes and the string
    the precomputed store hashes.
    """
    return np.ascontiguousarray(image.pixels, dtype="<f4").tobytes()


def pixel_hash(image: SpatialImage) -> str:
    """Content hash (sha256 hex) of the canonical pixel serialization."""
    return hashlib.sha256(pixel_bytes(image)).hexdigest()


def decode_embedding(payload: str) -> np.ndarray:
    """Decode a base64 float32 embedding payload to a float64 vector."""
    raw = base64.b64decode(payload.encode("ascii"), validate=True)
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


def encode_embedding(values: np.ndarray) -> str:
    """Base64 float32 encoding of an embedding vector."""
    return base64.b64encode(np.ascontiguousarray(values, dtype="<f4").tobytes()).decode("ascii")


@dataclass(frozen=True)
class BackendDescriptor:
    """Portable recipe for constructing a backend.

    ``kind`` is one of ``reference``, ``precomputed``, ``subprocess``;
    ``parameter`` is the store directory or the child command line.
    Descriptors are cheap, picklable, and safe to ship to worker processes.
    """

    kind: str
    parameter: str | None = None

    def __post_init__(self):
        if self.kind == "reference":
            if self.parameter is not None:
                raise InvalidConfigError("reference backend takes no parameter")
        elif self.kind == "precomputed":
            if not self.parameter:
                raise InvalidConfigError("precomputed backend needs a store directory")
        elif self.kind == "subprocess":
            if not self.parameter:
                raise InvalidConfigError("subprocess backend needs a command line")
        else:
            raise InvalidConfigError(f"unknown backend kind: {self.kind!r}")


def parse_backend(text: str) -> BackendDescriptor:
    """Parse a CLI backend string: ``reference``, ``precomputed:<dir>``, ``subprocess:<cmd>``."""
    kind, sep, parameter = text.partition(":")
    if not sep:
        return BackendDescriptor(kind=kind)
    return BackendDescriptor(kind=kind, parameter=parameter)


def create_backend(descriptor: BackendDescriptor):
    """Instantiate the backend a descriptor names."""
    if descriptor.kind == "reference":
        return ReferenceEmbedder()
    if descriptor.kind == "precomputed":
        return PrecomputedEmbedder(Path(descriptor.parameter))
    return SubprocessEmbedder(descriptor.parameter)


@dataclass(frozen=True)
class ReferenceEmbedder:
    """Deterministic desk-scale embedder.

    Converts to grayscale by channel mean, averages non-overlapping
    ``block_size``×``block_size`` blocks, flattens, subtracts the vector
    mean, and L2-normalizes. A constant image therefore maps to the zero
    vector (the degenerate-norm rule).
    """

    block_size: int = 8

    def __post_init__(self):
        if self.block_size < 1:
            raise InvalidConfigError(f"block_size must be positive, got {self.block_size}")

    def embed(self, image: SpatialImage) -> np.ndarray:
        bs = self.block_size
        if image.height % bs or image.width % bs:
            raise InvalidInputError(
                f"block_size {bs} does not divide image dimensions "
                f"{image.height}×{image.width}"
            )
        gray = image.pixels.mean(axis=2)
        blocks = gray.reshape(image.height // bs, bs, image.width // bs, bs)
        vector = blocks.mean(axis=(1, 3)).ravel()
        vector = vector - vector.mean()
        norm = float(np.linalg.norm(vector))
        if norm < ZERO_NORM_EPS:
            return np.zeros_like(vector)
        return vector / norm


class PrecomputedEmbedder:
    """Looks embeddings up in a store directory written by an exporter.

    Layout: ``index.json`` with ``{"protocol": 1, "dim": D, "entries":
    {<image path>: <file name>}, "errors": {...}}`` next to one raw
    little-endian float32 file per distinct pixel tensor, named by the
    tensor's content hash (see :func:`pixel_hash`).
    """

    def __init__(self, store_dir: str | Path):
        self.store_dir = Path(store_dir)
        index_path = self.store_dir / STORE_INDEX_NAME
        try:
            index = json.loads(index_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InvalidConfigError(f"no store index at {index_path}") from None
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"corrupt store index {index_path}: {exc}") from exc
        self.dim = int(index["dim"])
        self.entries: dict[str, str] = dict(index.get("entries", {}))

    def _read(self, file_name: str) -> np.ndarray:
        path = self.store_dir / file_name
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            raise MissingEmbeddingError(f"store file missing: {path}") from None
        vector = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if vector.size != self.dim:
            raise BackendIOError(
                f"store file {path} holds {vector.size} values, expected {self.dim}"
            )
        return vector

    def embed(self, image: SpatialImage) -> np.ndarray:
        key = pixel_hash(image)
        file_name = key + STORE_FILE_SUFFIX
        if not (self.store_dir / file_name).exists():
            raise MissingEmbeddingError(f"no embedding stored for content hash {key}")
        return self._read(file_name)

    def embed_path(self, image_path: str) -> np.ndarray:
        """Look an embedding up by the original image path recorded at export."""
        file_name = self.entries.get(image_path)
        if file_name is None:
            raise MissingEmbeddingError(f"no embedding stored for path {image_path!r}")
        return self._read(file_name)


class SubprocessEmbedder:
    """Drives an external embedding model over stdin/stdout JSON lines.

    One child process, one connection. Requests carry monotonically
    increasing ids; responses may arrive in any order and are matched by id,
    so several requests can be in flight at once. All writes go through an
    internal lock — concurrent callers serialize on the connection, which is
    the synchronization point.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 30.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise InvalidConfigError("subprocess backend command is empty")
        self.timeout = timeout
        try:
            self._child = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise BackendIOError(f"failed to start backend {argv[0]!r}: {exc}") from exc
        self._lock = threading.Lock()
        self._responses: dict[int, dict] = {}
        self._response_ready = threading.Condition(self._lock)
        self._next_id = 0
        self._eof = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        handshake = self._wait_for_handshake()
        if handshake.get("protocol") != PROTOCOL_VERSION:
            self.close()
            raise BackendIOError(f"unsupported protocol handshake: {handshake}")
        self.dim = int(handshake["dim"])

    def _read_loop(self):
        assert self._child.stdout is not None
        for line in self._child.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                message = {"malformed": line}
            with self._response_ready:
                if "protocol" in message and "id" not in message:
                    self._responses[-1] = message
                else:
                    self._responses[int(message.get("id", -2))] = message
                self._response_ready.notify_all()
        with self._response_ready:
            self._eof = True
            self._response_ready.notify_all()

    def _wait_for(self, request_id: int) -> dict:
        with self._response_ready:
            ok = self._response_ready.wait_for(
                lambda: request_id in self._responses or self._eof,
                timeout=self.timeout,
            )
            if request_id in self._responses:
                return self._responses.pop(request_id)
            if not ok:
                raise BackendIOError(f"backend timed out after {self.timeout}s (id {request_id})")
            raise BackendIOError("backend closed its output stream")

    def _wait_for_handshake(self) -> dict:
        return self._wait_for(-1)

    def _send(self, image: SpatialImage) -> int:
        request = {
            "id": None,
            "height": image.height,
            "width": image.width,
            "channels": image.channels,
            "pixels": base64.b64encode(pixel_bytes(image)).decode("ascii"),
        }
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            request["id"] = request_id
            try:
                assert self._child.stdin is not None
                self._child.stdin.write(json.dumps(request) + "\n")
                self._child.stdin.flush()
            except (OSError, ValueError) as exc:
                raise BackendIOError(f"backend write failed: {exc}") from exc
        return request_id

    def _result(self, response: dict) -> np.ndarray:
        if "error" in response:
            raise BackendIOError(f"backend error: {response['error']}")
        if "embedding" not in response:
            raise BackendIOError(f"malformed backend response: {response}")
        vector = decode_embedding(response["embedding"])
        if vector.size != self.dim:
            raise BackendIOError(f"backend returned dim {vector.size}, expected {self.dim}")
        return vector

    def embed(self, image: SpatialImage) -> np.ndarray:
        return self._result(self._wait_for(self._send(image)))

    def batch_embed(self, images: Sequence[SpatialImage]) -> list[np.ndarray]:
        """Pipeline all requests, then collect responses in request order."""
        ids = [self._send(image) for image in images]
        results = []
        for index, request_id in enumerate(ids):
            try:
                results.append(self._result(self._wait_for(request_id)))
            except FreqlensError as exc:
                raise BackendIOError(f"image {index}: {exc}") from exc
        return results

    def close(self):
        if self._child.stdin is not None:
            try:
                self._child.stdin.close()
            except OSError:
                pass
        try:
            self._child.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._child.kill()
            self._child.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def batch_embed(backend, images: Sequence[SpatialImage]) -> list[np.ndarray]:
    """Embed a sequence of images in order.

    Uses the backend's pipelined path when it has one; errors are re-raised
    with the failing index.
    """
    if hasattr(backend, "batch_embed"):
        return backend.batch_embed(images)
    results = []
    for index, image in enumerate(images):
        try:
            results.append(backend.embed(image))
        except FreqlensError as exc:
            raise type(exc)(f"image {index}: {exc}") from exc
    return results
