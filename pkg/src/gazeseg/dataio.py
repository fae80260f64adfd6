"""Volume ingestion, per-structure decomposition, and corpus handling.

A corpus is a flat list of (image slice, reference masks) cases; it can
come from a dataset manifest of NIfTI volumes, from a phantom corpus
directory (PNG images plus RLE JSON sidecars), or be built in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import ImageSlice, Mask, decode_rle, encode_rle, organ_name
from .errors import CorpusError, InvalidParam, InvalidWindow, ShapeMismatch
from .nifti import Volume, parse_nifti
from .phantom import PhantomSpec, generate_phantom, mixed_spec, two_lobe_spec
from .pngio import load_png, save_png

_EIGHT_CONNECTED = np.ones((3, 3), dtype=np.uint8)

DEFAULT_WINDOW_CENTER = 40.0  # abdominal soft-tissue window
DEFAULT_WINDOW_WIDTH = 400.0
DEFAULT_MIN_AREA = 50


@dataclass(frozen=True, eq=False)
class CaseRecord:
    case_id: str
    image: Volume
    labels: Volume

    def __post_init__(self):
        if self.image.dims != self.labels.dims:
            raise ShapeMismatch(
                f"image dims {self.image.dims} != label dims {self.labels.dims}"
            )


@dataclass(frozen=True, eq=False)
class CorpusCase:
    """One image slice with its per-structure reference masks."""

    case_id: str
    image: ImageSlice
    structures: tuple[Mask, ...]

    def mask_for(self, structure: str) -> Mask | None:
        for m in self.structures:
            if m.structure_label == structure:
                return m
        return None


def slice_and_window(
    vol: Volume,
    window_center: float = DEFAULT_WINDOW_CENTER,
    window_width: float = DEFAULT_WINDOW_WIDTH,
    case_id: str = "case",
) -> list[ImageSlice]:
    """Axial slices with intensities window-mapped into [0, 1]."""
    if window_width <= 0:
        raise InvalidWindow(f"window width {window_width} must be positive")
    low = window_center - window_width / 2.0
    scaled = vol.scaled_voxels()
    slices = []
    for k in range(vol.dims[2]):
        mapped = np.clip((scaled[:, :, k] - low) / window_width, 0.0, 1.0)
        slices.append(ImageSlice(mapped, slice_index=k, case_id=case_id))
    return slices


def decompose_structures(
    label_slice: np.ndarray, organ_id: int, min_area: int = DEFAULT_MIN_AREA
) -> list[Mask]:
    """Split one organ's pixels into 8-connected components, dropping specks.

    Components are returned in raster order of their first pixel; an absent
    organ yields an empty list.
    """
    if not 1 <= organ_id <= 16:
        raise InvalidParam(f"organ id {organ_id} outside 1..16")
    binary = np.asarray(label_slice) == organ_id
    if not binary.any():
        return []
    labels, count = ndimage.label(binary, structure=_EIGHT_CONNECTED)
    name = organ_name(organ_id)
    components: list[tuple[int, Mask]] = []
    for lab in range(1, count + 1):
        bits = labels == lab
        if int(bits.sum()) < min_area:
            continue
        first = int(np.flatnonzero(bits.ravel())[0])
        components.append((first, Mask(bits.astype(np.uint8), structure_label=name)))
    components.sort(key=lambda item: item[0])
    return [m for _, m in components]


def load_manifest(path: str | Path) -> list[CaseRecord]:
    """Dataset manifest: {"cases": [{"id", "image", "labels"}, ...]}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or "cases" not in doc:
        raise CorpusError("manifest must carry a 'cases' list")
    records = []
    for entry in doc["cases"]:
        try:
            case_id = entry["id"]
            image = parse_nifti((path.parent / entry["image"]).read_bytes())
            labels = parse_nifti((path.parent / entry["labels"]).read_bytes())
        except (KeyError, OSError) as exc:
            raise CorpusError(f"bad manifest entry {entry!r}: {exc}") from exc
        records.append(CaseRecord(case_id=case_id, image=image, labels=labels))
    return records


def corpus_from_records(
    records: list[CaseRecord],
    organ_ids: list[int],
    window_center: float = DEFAULT_WINDOW_CENTER,
    window_width: float = DEFAULT_WINDOW_WIDTH,
    min_area: int = DEFAULT_MIN_AREA,
) -> list[CorpusCase]:
    """Decompose volumes into single-structure slice cases."""
    out: list[CorpusCase] = []
    for rec in records:
        slices = slice_and_window(rec.image, window_center, window_width, case_id=rec.case_id)
        for k, img in enumerate(slices):
            label_slice = rec.labels.slice_raw(k)
            for organ_id in organ_ids:
                parts = decompose_structures(label_slice, organ_id, min_area=min_area)
                for i, mask in enumerate(parts):
                    label = f"{mask.structure_label}_{i}" if len(parts) > 1 else mask.structure_label
                    out.append(
                        CorpusCase(
                            case_id=f"{rec.case_id}_s{k}",
                            image=img,
                            structures=(Mask(mask.bits, structure_label=label),),
                        )
                    )
    return out


def builtin_corpus(name: str, cases: int | None = None, seed: int = 0) -> list[CorpusCase]:
    """Packaged phantom corpora: 'default' (disk + two-lobe per case) and
    'twolobe' (one two-lobe structure per case)."""
    if name == "default":
        n = cases if cases is not None else 8
        specs = [mixed_spec(seed=seed + i) for i in range(n)]
    elif name == "twolobe":
        n = cases if cases is not None else 12
        specs = [two_lobe_spec(seed=seed + i) for i in range(n)]
    else:
        raise CorpusError(f"unknown builtin corpus {name!r}")
    out = []
    for i, spec in enumerate(specs):
        image, masks = generate_phantom(spec)
        case_id = f"{name}{i:03d}"
        image = ImageSlice(image.intensities, slice_index=0, case_id=case_id)
        out.append(CorpusCase(case_id=case_id, image=image, structures=tuple(masks)))
    return out


def phantom_corpus_from_specs(specs: list[PhantomSpec], prefix: str = "phantom") -> list[CorpusCase]:
    out = []
    for i, spec in enumerate(specs):
        image, masks = generate_phantom(spec)
        case_id = f"{prefix}{i:03d}"
        image = ImageSlice(image.intensities, slice_index=0, case_id=case_id)
        out.append(CorpusCase(case_id=case_id, image=image, structures=tuple(masks)))
    return out


def write_corpus_dir(directory: str | Path, corpus: list[CorpusCase]) -> Path:
    """Persist a corpus as PNG images plus RLE JSON sidecars and an index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = {"cases": []}
    for case in corpus:
        image_name = f"{case.case_id}.png"
        save_png(directory / image_name, case.image.intensities)
        masks = []
        for mask in case.structures:
            sidecar = f"{case.case_id}__{mask.structure_label}.json"
            (directory / sidecar).write_text(json.dumps(encode_rle(mask)), encoding="utf-8")
            masks.append({"structure": mask.structure_label, "rle": sidecar})
        index["cases"].append(
            {"id": case.case_id, "image": image_name, "slice_index": case.image.slice_index, "masks": masks}
        )
    (directory / "corpus.json").write_text(json.dumps(index, indent=2), encoding="utf-8")
    return directory / "corpus.json"


def load_corpus_dir(directory: str | Path) -> list[CorpusCase]:
    directory = Path(directory)
    index_path = directory / "corpus.json"
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read corpus index {index_path}: {exc}") from exc
    out = []
    for entry in index.get("cases", []):
        try:
            arr = load_png(directory / entry["image"])
            image = ImageSlice(arr, slice_index=int(entry.get("slice_index", 0)), case_id=entry["id"])
            masks = []
            for m in entry["masks"]:
                obj = json.loads((directory / m["rle"]).read_text(encoding="utf-8"))
                masks.append(decode_rle(obj, structure_label=m["structure"]))
            out.append(CorpusCase(case_id=entry["id"], image=image, structures=tuple(masks)))
        except (KeyError, OSError, json.JSONDecodeError) as exc:
            raise CorpusError(f"bad corpus entry {entry!r}: {exc}") from exc
    return out


def load_corpus_config(obj: dict) -> list[CorpusCase]:
    """Resolve the experiment/service corpus stanza into cases.

    Accepted forms:
      {"kind": "builtin", "name": "default"|"twolobe", "cases": n, "seed": s}
      {"kind": "dir", "path": "corpus_dir"}
      {"kind": "manifest", "path": "manifest.json", "organ_ids": [...], ...}
      {"kind": "phantoms", "specs": [{...PhantomSpec fields...}]}
    """
    kind = obj.get("kind")
    if kind == "builtin":
        return builtin_corpus(obj.get("name", "default"), obj.get("cases"), int(obj.get("seed", 0)))
    if kind == "dir":
        return load_corpus_dir(obj["path"])
    if kind == "manifest":
        records = load_manifest(obj["path"])
        return corpus_from_records(
            records,
            organ_ids=[int(v) for v in obj.get("organ_ids", list(range(1, 17)))],
            window_center=float(obj.get("window_center", DEFAULT_WINDOW_CENTER)),
            window_width=float(obj.get("window_width", DEFAULT_WINDOW_WIDTH)),
            min_area=int(obj.get("min_area", DEFAULT_MIN_AREA)),
        )
    if kind == "phantoms":
        from .phantom import Blob  # local import to keep module load light

        specs = []
        for s in obj["specs"]:
            blobs = tuple(
                Blob(
                    center=tuple(b["center"]),
                    radii=tuple(b["radii"]),
                    intensity=float(b["intensity"]),
                    rotation=float(b.get("rotation", 0.0)),
                    lobes=int(b.get("lobes", 1)),
                    lobe_gap_px=float(b.get("lobe_gap_px", 3.0)),
                    name=b.get("name", ""),
                )
                for b in s["blobs"]
            )
            specs.append(
                PhantomSpec(
                    height=int(s["height"]),
                    width=int(s["width"]),
                    blobs=blobs,
                    background_intensity=float(s.get("background_intensity", 0.2)),
                    noise_std=float(s.get("noise_std", 0.0)),
                    seed=int(s.get("seed", 0)),
                )
            )
        return phantom_corpus_from_specs(specs)
    raise CorpusError(f"unknown corpus kind {kind!r}")
