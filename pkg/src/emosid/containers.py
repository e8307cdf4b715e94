"""Binary containers for features and models.

All three formats share a layout: an 8-byte magic string, a uint32 format
version, a JSON header (describing metadata and array shapes), then the
arrays themselves as row-major little-endian float64. Round trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .dnn import DnnModel
from .errors import ContainerError, VersionError
from .features import FeatureMatrix
from .gmm import GmmTag, TagStore

FEATURE_MAGIC = b"SIDFEAT\0"
TAGS_MAGIC = b"SIDTAGS\0"
DNN_MAGIC = b"SIDDNN\0\0"
FORMAT_VERSION = 1


def _pack(magic: bytes, header: dict, arrays) -> bytes:
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    out = [magic, struct.pack("<II", FORMAT_VERSION, len(head)), head]
    for arr in arrays:
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


def _unpack(magic: bytes, blob: bytes):
    if len(blob) < 16 or blob[:8] != magic:
        raise ContainerError(f"bad magic; expected {magic!r}")
    version, head_len = struct.unpack_from("<II", blob, 8)
    if version != FORMAT_VERSION:
        raise VersionError(f"container version {version}, reader supports {FORMAT_VERSION}")
    if len(blob) < 16 + head_len:
        raise ContainerError("truncated header")
    try:
        header = json.loads(blob[16:16 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"corrupt header: {exc}") from exc
    return header, blob[16 + head_len:]


def _take_arrays(payload: bytes, shapes):
    arrays = []
    pos = 0
    for shape in shapes:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if pos + nbytes > len(payload):
            raise ContainerError("truncated payload")
        arrays.append(np.frombuffer(payload[pos:pos + nbytes], dtype="<f8")
                      .reshape(shape).copy())
        pos += nbytes
    if pos != len(payload):
        raise ContainerError("trailing bytes after payload")
    return arrays


# --- features ---

def save_features(fm: FeatureMatrix) -> bytes:
    header = {"meta": fm.meta, "shape": list(fm.data.shape)}
    return _pack(FEATURE_MAGIC, header, [fm.data])


def load_features(blob: bytes) -> FeatureMatrix:
    header, payload = _unpack(FEATURE_MAGIC, blob)
    (data,) = _take_arrays(payload, [tuple(header["shape"])])
    return FeatureMatrix(data=data, meta=header["meta"])


# --- GMM tag store ---

def save_tag_store(store: TagStore) -> bytes:
    keys = [[spk, emo] for spk in store.speaker_roster for emo in store.emotion_roster]
    header = {
        "speaker_roster": list(store.speaker_roster),
        "emotion_roster": list(store.emotion_roster),
        "tags": [],
    }
    arrays = []
    for spk, emo in keys:
        tag = store.tags[(spk, emo)]
        header["tags"].append({
            "label": [spk, emo],
            "num_components": tag.num_components,
            "dim": tag.dim,
            "train_meta": tag.train_meta,
        })
        arrays += [tag.weights, tag.means, tag.variances]
    return _pack(TAGS_MAGIC, header, arrays)


def load_tag_store(blob: bytes) -> TagStore:
    header, payload = _unpack(TAGS_MAGIC, blob)
    shapes = []
    for rec in header["tags"]:
        m, d = rec["num_components"], rec["dim"]
        shapes += [(m,), (m, d), (m, d)]
    arrays = _take_arrays(payload, shapes)
    tags = {}
    for j, rec in enumerate(header["tags"]):
        spk, emo = rec["label"]
        tags[(spk, emo)] = GmmTag(
            weights=arrays[3 * j], means=arrays[3 * j + 1], variances=arrays[3 * j + 2],
            label=(spk, emo), train_meta=rec["train_meta"])
    return TagStore(tags=tags, speaker_roster=header["speaker_roster"],
                    emotion_roster=header["emotion_roster"])


# --- DNN model ---

def save_dnn(model: DnnModel) -> bytes:
    header = {
        "layer_shapes": [list(w.shape) for w in model.weights],
        "standardized": model.input_standardization is not None,
        "train_meta": model.train_meta,
    }
    arrays = []
    if model.input_standardization is not None:
        mean, std = model.input_standardization
        arrays += [mean, std]
    for w, b in zip(model.weights, model.biases):
        arrays += [w, b]
    return _pack(DNN_MAGIC, header, arrays)


def load_dnn(blob: bytes) -> DnnModel:
    header, payload = _unpack(DNN_MAGIC, blob)
    shapes = []
    in_size = header["layer_shapes"][0][0]
    if header["standardized"]:
        shapes += [(in_size,), (in_size,)]
    for shp in header["layer_shapes"]:
        shapes += [tuple(shp), (shp[1],)]
    arrays = _take_arrays(payload, shapes)
    pos = 0
    standardization = None
    if header["standardized"]:
        standardization = (arrays[0], arrays[1])
        pos = 2
    weights, biases = [], []
    for _ in header["layer_shapes"]:
        weights.append(arrays[pos])
        biases.append(arrays[pos + 1])
        pos += 2
    return DnnModel(weights=weights, biases=biases,
                    input_standardization=standardization,
                    train_meta=header["train_meta"])


def write_file(path, blob: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(blob)


def read_file(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()
