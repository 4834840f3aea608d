"""Unit-norm document vectors and cosine nearest-neighbour search."""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.cluster.vq import kmeans2

from .textkit import Tokenizer

BINARY_MAGIC = b"CREM"
NORM_TOL = 1e-6


class EmbeddingError(ValueError):
    pass


class Neighbors(list):
    """``(doc_id, cosine)`` pairs, best first; ``approximate`` marks index-backed results."""

    def __init__(self, items=(), approximate: bool = False):
        super().__init__(items)
        self.approximate = approximate


class EmbeddingStore:
    def __init__(self, ids: Sequence[str], matrix: np.ndarray, normalize: bool = True):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            raise EmbeddingError("matrix must have one row per id")
        if len(set(ids)) != len(ids):
            raise EmbeddingError("duplicate document ids in embedding store")
        norms = np.linalg.norm(matrix, axis=1)
        for doc_id, n in zip(ids, norms):
            if n == 0 or not np.isfinite(n):
                raise EmbeddingError(f"zero-norm or non-finite vector for {doc_id!r}")
        if normalize:
            matrix = matrix / norms[:, None]
        elif np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise EmbeddingError("vectors are not unit norm and normalize=False")
        self.ids = list(ids)
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self._row = {d: i for i, d in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.ids)

    def __contains__(self, doc_id):
        return doc_id in self._row

    def vector(self, doc_id: str) -> np.ndarray:
        try:
            return self.matrix[self._row[doc_id]]
        except KeyError:
            raise EmbeddingError(f"no embedding for document {doc_id!r}") from None

    def rows(self, doc_ids: Iterable[str]) -> np.ndarray:
        return np.array([self._row[d] for d in doc_ids], dtype=np.intp)

    def subset(self, doc_ids: Iterable[str]) -> "EmbeddingStore":
        doc_ids = list(doc_ids)
        return EmbeddingStore(doc_ids, self.matrix[self.rows(doc_ids)], normalize=False)


def _parse_text(path) -> tuple[list[str], list[list[float]]]:
    ids, rows = [], []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc_id, values = line.rstrip("\n").split("\t", 1)
                rows.append([float(v) for v in values.split()])
            except ValueError:
                raise EmbeddingError(f"line {lineno}: expected 'doc_id<TAB>floats'") from None
            ids.append(doc_id)
    return ids, rows


def _parse_binary(data: bytes) -> tuple[list[str], np.ndarray]:
    n, dim = struct.unpack_from("<II", data, 4)
    off = 12
    ids, vecs = [], np.empty((n, dim))
    for i in range(n):
        (id_len,) = struct.unpack_from("<I", data, off)
        off += 4
        ids.append(data[off:off + id_len].decode("utf-8"))
        off += id_len
        vecs[i] = np.frombuffer(data, dtype="<f8", count=dim, offset=off)
        off += 8 * dim
    return ids, vecs


def load_embeddings(path, normalize: bool = True) -> EmbeddingStore:
    """Read a text (``doc_id<TAB>f1 f2 ...``) or binary embeddings file."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        ids, matrix = _parse_binary(path.read_bytes())
        return EmbeddingStore(ids, matrix, normalize)
    ids, rows = _parse_text(path)
    dims = {len(r) for r in rows}
    if len(dims) > 1:
        raise EmbeddingError(f"rows have mixed dimensions: {sorted(dims)}")
    return EmbeddingStore(ids, np.array(rows, dtype=np.float64).reshape(len(ids), -1), normalize)


def save_embeddings(store: EmbeddingStore, path, binary: bool = False) -> None:
    if binary:
        parts = [BINARY_MAGIC, struct.pack("<II", len(store), store.dim)]
        for doc_id, vec in zip(store.ids, store.matrix):
            raw = doc_id.encode("utf-8")
            parts += [struct.pack("<I", len(raw)), raw, vec.astype("<f8").tobytes()]
        Path(path).write_bytes(b"".join(parts))
        return
    with open(path, "w", encoding="ascii") as fh:
        for doc_id, vec in zip(store.ids, store.matrix):
            fh.write(doc_id + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")


def _token_column(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x1f{token}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.choice((-1.0, 1.0), size=dim)


def test_embedder(doc, dim: int = 64, seed: int = 0, tokenizer: Tokenizer | None = None) -> np.ndarray:
    """Deterministic stand-in for a sentence encoder.

    Every abstract token is hashed to a seeded random sign vector; the sum of
    those columns is L2-normalized.
    """
    tokenizer = tokenizer or Tokenizer()
    tokens = tokenizer(doc.abstract)
    if not tokens:
        raise EmbeddingError(f"document {doc.doc_id!r} has an empty abstract")
    vec = np.zeros(dim)
    for tok in tokens:
        vec += _token_column(tok, dim, seed)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise EmbeddingError(f"hashed projection of {doc.doc_id!r} cancelled to zero")
    return vec / norm


# keep pytest from collecting the embedder as a test
test_embedder.__test__ = False


def embed_documents(docs: Iterable, dim: int = 64, seed: int = 0,
                    tokenizer: Tokenizer | None = None) -> EmbeddingStore:
    docs = [d for d in docs if d.abstract]
    vecs = np.array([test_embedder(d, dim, seed, tokenizer) for d in docs]).reshape(len(docs), dim)
    return EmbeddingStore([d.doc_id for d in docs], vecs, normalize=False)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise EmbeddingError("cosine of a zero vector is undefined")
    return float(u @ v / (nu * nv))


def _rank(ids: Sequence[str], sims: np.ndarray, K: int, exclude) -> Neighbors:
    order = sorted((i for i, d in enumerate(ids) if d not in exclude), key=lambda i: (-sims[i], ids[i]))
    return Neighbors((ids[i], float(sims[i])) for i in order[:K])


def nearest_to_vector(store: EmbeddingStore, query: np.ndarray, K: int,
                      exclude: Iterable[str] = ()) -> Neighbors:
    """Exact top-``K`` scan by cosine; ties broken by doc id."""
    if K <= 0:
        return Neighbors()
    return _rank(store.ids, store.matrix @ query, K, set(exclude))


def nearest_neighbors(store: EmbeddingStore, query_id: str, K: int,
                      exclude: Iterable[str] = (), index: "IVFIndex | None" = None) -> Neighbors:
    if query_id not in store:
        raise EmbeddingError(f"query document {query_id!r} is not in the store")
    exclude = set(exclude) | {query_id}
    if index is not None:
        return index.search(store.vector(query_id), K, exclude)
    return nearest_to_vector(store, store.vector(query_id), K, exclude)


class IVFIndex:
    """Inverted-file index: k-means coarse cells, exact scan of the ``n_probe`` closest cells."""

    def __init__(self, store: EmbeddingStore, n_lists: int = 16, n_probe: int = 4, seed: int = 0):
        self.store = store
        self.n_probe = min(n_probe, n_lists)
        centroids, labels = kmeans2(store.matrix, n_lists, minit="++", seed=seed)
        self.centroids = centroids
        self.lists = [np.flatnonzero(labels == c) for c in range(len(centroids))]

    def search(self, query: np.ndarray, K: int, exclude: Iterable[str] = ()) -> Neighbors:
        if K <= 0:
            return Neighbors(approximate=True)
        cells = np.argsort(-(self.centroids @ query), kind="stable")[: self.n_probe]
        rows = np.concatenate([self.lists[c] for c in cells])
        ids = [self.store.ids[r] for r in rows]
        found = _rank(ids, self.store.matrix[rows] @ query, K, set(exclude))
        return Neighbors(found, approximate=True)
