"""File formats: PNG/PGM/PPM images, elements JSON (schema 1), solver
config JSON, and the binary dense-flow format."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np
from PIL import Image

from .core import GeometricElements, ImageBuffer, Point2, Polyline

FLOW_MAGIC = b"GWFLOW1\x00"
ELEMENTS_SCHEMA = 1


class BadInputError(ValueError):
    """Unreadable or malformed input file."""


def read_image(path) -> ImageBuffer:
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise BadInputError(f"cannot read image {path}: {exc}") from exc
    if img.mode in ("L", "1", "I;16"):
        arr = np.asarray(img.convert("L"), dtype=np.uint8)
    else:
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return ImageBuffer.from_array(arr)


def write_image(path, img: ImageBuffer):
    Image.fromarray(img.data).save(path)


def _polyline_to_json(line: Polyline):
    return [[p.x, p.y] for p in line.points]


def _polyline_from_json(obj) -> Polyline:
    return Polyline([Point2(float(x), float(y)) for x, y in obj])


def write_elements(path, elems: GeometricElements):
    doc = {
        "schema": ELEMENTS_SCHEMA,
        "image_size": list(elems.image_size),
        "boundary": {
            "top": _polyline_to_json(elems.boundary_top),
            "bottom": _polyline_to_json(elems.boundary_bottom),
            "left": _polyline_to_json(elems.boundary_left),
            "right": _polyline_to_json(elems.boundary_right),
        },
        "text_lines": [_polyline_to_json(l) for l in elems.text_lines],
        "vertical_lines": [_polyline_to_json(l) for l in elems.vertical_lines],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_elements(path) -> GeometricElements:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except Exception as exc:
        raise BadInputError(f"cannot read elements {path}: {exc}") from exc
    try:
        if doc.get("schema") != ELEMENTS_SCHEMA:
            raise BadInputError(f"unsupported elements schema {doc.get('schema')}")
        bd = doc["boundary"]
        return GeometricElements(
            boundary_top=_polyline_from_json(bd["top"]),
            boundary_bottom=_polyline_from_json(bd["bottom"]),
            boundary_left=_polyline_from_json(bd["left"]),
            boundary_right=_polyline_from_json(bd["right"]),
            text_lines=tuple(_polyline_from_json(l)
                             for l in doc.get("text_lines", [])),
            vertical_lines=tuple(_polyline_from_json(l)
                                 for l in doc.get("vertical_lines", [])),
            image_size=tuple(doc["image_size"]),
        )
    except BadInputError:
        raise
    except Exception as exc:
        raise BadInputError(f"malformed elements {path}: {exc}") from exc


def write_flow(path, flow: np.ndarray):
    """Dense 2-field as magic + LE uint32 w, h header + float32 LE data."""
    flow = np.asarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise BadInputError("flow must have shape (H, W, 2)")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(flow.tobytes())


def read_flow(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != FLOW_MAGIC:
                raise BadInputError(f"bad flow magic in {path}")
            w, h = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(), dtype="<f4")
    except BadInputError:
        raise
    except Exception as exc:
        raise BadInputError(f"cannot read flow {path}: {exc}") from exc
    if data.size != w * h * 2:
        raise BadInputError(f"flow payload size mismatch in {path}")
    return data.reshape(h, w, 2).astype(np.float64)


DEFAULT_CONFIG = {
    "n": 128,
    "alpha": 10.0,
    "lambda": 2.0,
    "beta": 20.0,
    "tol": 1e-8,
    "max_iters": 20000,
    "text_interval": 16.0,
    "vertical_interval": 10.0,
    "boundary_interval": 4.0,
    "detect_w": 15.0,
    "detect_h": 15.0,
    "detect_theta": float(np.arctan(0.45)),
}


def read_config(path=None, overrides=None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except Exception as exc:
            raise BadInputError(f"cannot read config {path}: {exc}") from exc
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise BadInputError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg
