"""Model, embedding-spec, CSV and config-file serialization.

Floats are written with Python's shortest round-trip repr, so every value
survives save -> load bit-exactly and save -> load -> save is byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .codebook import Codebook
from .gaussmodel import GaussianModel
from .kernels import kernel_from_dict, kernel_to_dict
from .synth import EmbeddingSpec

SCHEMA_VERSION = 1


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).reshape(-1)]


def _dump(obj, path):
    text = json.dumps(obj, indent=1, allow_nan=False) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _load(path, kind):
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {obj.get('schema_version')!r}")
    if obj.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind!r} file, found {obj.get('kind')!r}")
    return obj


def file_kind(path) -> str:
    return json.loads(Path(path).read_text(encoding="utf-8")).get("kind", "")


def codebook_to_dict(cb: Codebook, k: int | None = None, fit_meta: dict | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "codebook",
        "n": cb.dim,
        "k": k,
        "mu": cb.mu,
        "kernel": kernel_to_dict(cb.kernel),
        "components": [
            {"weight": float(p), "length": float(ln), "mean": _floats(g.mean), "cov": _floats(g.cov)}
            for g, p, ln in zip(cb.models, cb.weights, cb.lengths)
        ],
        "fit": fit_meta or {},
    }


def codebook_from_dict(obj: dict) -> Codebook:
    n = int(obj["n"])
    comps = obj["components"]
    models = tuple(
        GaussianModel(np.array(c["mean"]), np.array(c["cov"]).reshape(n, n)) for c in comps
    )
    return Codebook(
        models,
        np.array([c["weight"] for c in comps]),
        np.array([c["length"] for c in comps]),
        kernel_from_dict(obj["kernel"]),
        float(obj["mu"]),
    )


def save_model(path, cb: Codebook, k: int | None = None, fit_meta: dict | None = None):
    _dump(codebook_to_dict(cb, k, fit_meta), path)


def load_model(path):
    """Return ``(codebook, k, fit_meta)``; the codebook invariants are re-checked."""
    obj = _load(path, "codebook")
    return codebook_from_dict(obj), obj.get("k"), obj.get("fit", {})


def save_embedding(path, spec: EmbeddingSpec):
    _dump({
        "schema_version": SCHEMA_VERSION,
        "kind": "embedding",
        "n": spec.n,
        "k": spec.k,
        "charts": [
            {"weight": float(w), "mean": _floats(m), "A": _floats(A), "Sigma": _floats(S)}
            for w, m, A, S in zip(spec.weights, spec.means, spec.A, spec.Sigma)
        ],
    }, path)


def load_embedding(path) -> EmbeddingSpec:
    obj = _load(path, "embedding")
    n, k = int(obj["n"]), int(obj["k"])
    ch = obj["charts"]
    return EmbeddingSpec(
        weights=[c["weight"] for c in ch],
        means=[c["mean"] for c in ch],
        A=[np.array(c["A"]).reshape(n, k) for c in ch],
        Sigma=[np.array(c["Sigma"]).reshape(n, n) for c in ch],
    )


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, columns):
    """Write equal-length columns with a header row, LF line endings."""
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """Return ``(header, rows)`` with rows as a float array."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def write_points(path, X, labels=None, latents=None):
    X = np.atleast_2d(X)
    header = [f"x{i + 1}" for i in range(X.shape[1])]
    cols = [X[:, i] for i in range(X.shape[1])]
    if labels is not None:
        header.append("l")
        cols.append(np.asarray(labels, dtype=int))
    if latents is not None:
        header += [f"y{i + 1}" for i in range(latents.shape[1])]
        cols += [latents[:, i] for i in range(latents.shape[1])]
    write_csv(path, header, cols)


def read_points(path) -> np.ndarray:
    """Load the x1..xn columns of a dataset CSV, ignoring latent columns."""
    header, data = read_csv(path)
    idx = [i for i, h in enumerate(header) if h.startswith("x")]
    if not idx:
        raise ValueError(f"{path}: no x columns in header {header}")
    return data[:, idx]


def write_reduced(path, charts, coords):
    coords = np.atleast_2d(coords)
    header = ["chart"] + [f"u{i + 1}" for i in range(coords.shape[1])]
    write_csv(path, header, [np.asarray(charts, dtype=int)] + [coords[:, i] for i in range(coords.shape[1])])


def read_reduced(path):
    header, data = read_csv(path)
    if not header or header[0] != "chart":
        raise ValueError(f"{path}: first column must be 'chart'")
    return data[:, 0].astype(int), data[:, 1:]


# flat "section.key = value" config files

CONFIG_KEYS = {
    "fit.m_init": int,
    "fit.mu": float,
    "fit.epsilon": float,
    "fit.max_iter": int,
    "fit.seed": int,
    "fit.cov_floor_ratio": float,
    "fit.init_scheme": str,
    "fit.k": int,
    "kernel.variant": str,
    "kernel.sigma": float,
    "kernel.r1": float,
    "kernel.r2": float,
    "kernel.d_min": float,
    "atlas.delta_ratio": float,
    "eval.mc_n": int,
    "eval.seed": int,
    "eval.h": float,
    "eval.M": float,
    "eval.delta": float,
    "eval.A": float,
    "eval.n_train": int,
}


def read_config(path) -> dict:
    """Parse ``section.key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](val)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad value {val!r} for {key}") from None
    return out
