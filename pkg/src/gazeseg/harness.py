"""Batch simulation of iterative gaze-prompted segmentation over a corpus,
with deterministic seeding and byte-stable CSV emission."""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .backend import ReferenceBackend, RemoteBackend, SegmentationRequest
from .core import Mask, PointPrompt
from .dataio import CorpusCase, load_corpus_config
from .errors import CorpusError, EmptyGroundTruth, EmptyPrompt, InvalidParam
from .metrics import AggregateStat, aggregate, dice
from .strategy import StrategyConfig, StrategyState, label_points, next_prompt
from .synth import GazeGenConfig, generate_prompt_points

# Strategies exercised by the synthetic simulator; fixation strategies need
# a live timestamped stream and belong to the session service.
SIMULATABLE_KINDS = ("accumulate_sample", "linear_combo", "incremental")


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of identifying parts."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class GridCell:
    prop_gt: float
    prop_diff: float
    prop_out: float

    def as_percent(self) -> tuple[float, float, float]:
        return (self.prop_gt * 100.0, self.prop_out * 100.0, self.prop_diff * 100.0)


@dataclass
class ExperimentConfig:
    corpus: list[CorpusCase]
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    grid: list[GridCell] = field(default_factory=lambda: [GridCell(0.8, 0.0, 0.2)])
    n_points: list[int] = field(default_factory=lambda: [20])
    alphas: list[float] | None = None  # expands linear_combo rows when set
    iterations: int = 5
    master_seed: int = 0
    output_path: str = "out"
    backend_factory: Callable[[], object] = ReferenceBackend
    jobs: int = 1
    backend_desc: dict = field(default_factory=lambda: {"kind": "reference", "tau": 0.1})

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidParam("iterations must be >= 1")
        if not self.grid:
            raise InvalidParam("the proportion grid must be nonempty")
        if not self.corpus:
            raise CorpusError("corpus resolved to zero cases")
        if self.strategy.kind not in SIMULATABLE_KINDS:
            raise InvalidParam(
                f"strategy {self.strategy.kind!r} needs a live gaze stream; "
                f"the simulator supports {SIMULATABLE_KINDS}"
            )


@dataclass
class ResultRow:
    prop_gt: float  # percentages, matching the published table layout
    prop_out: float
    prop_mask_diff: float
    num_points: int
    strategy: str
    dice: AggregateStat
    per_case: list[tuple[str, str, int, float]]  # (case_id, structure, iteration, dice)


@dataclass
class TwoPassResult:
    base_dice: float
    corrected_dice: float
    base_mask: Mask
    corrected_mask: Mask


def _simulate_unit(
    case: CorpusCase,
    gt: Mask,
    strategy_cfg: StrategyConfig,
    cell: GridCell,
    n_points: int,
    iterations: int,
    master_seed: int,
    backend,
) -> list[float]:
    """Run one case/structure for `iterations` rounds, returning per-round dice."""
    state = StrategyState(
        strategy_cfg, derive_seed(master_seed, case.case_id, gt.structure_label, "strategy")
    )
    predicted: Mask | None = None
    scores: list[float] = []
    budget = strategy_cfg.k if strategy_cfg.kind == "incremental" else n_points
    for it in range(iterations):
        gen = GazeGenConfig(
            prop_gt=cell.prop_gt,
            prop_diff=cell.prop_diff,
            prop_out=cell.prop_out,
            n_points=budget,
            seed=derive_seed(master_seed, case.case_id, gt.structure_label, "gen", it),
        )
        tagged = generate_prompt_points(gt, predicted, gen)
        new_points = [(p.x, p.y) for p in tagged]
        prompt = next_prompt(state, new_points=new_points)
        req = SegmentationRequest(
            prompt=prompt,
            image=case.image,
            case_id=case.case_id,
            prior_mask=predicted if strategy_cfg.send_prior_mask else None,
            request_id=f"{case.case_id}:{gt.structure_label}:{it}",
        )
        try:
            predicted = backend.segment(req).mask
        except EmptyPrompt:
            pass  # all-background labels: keep the previous prediction
        scores.append(dice(predicted, gt) if predicted is not None else 0.0)
    return scores


def run_synthetic_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Sweep the proportion/point grid over every case and structure.

    Iteration 1 generates points with no prediction available (the
    difference quota reallocates into the reference mask); later iterations
    target the current prediction's mask difference.  Each result row
    aggregates the final-iteration dice over all case/structure units.
    """
    units: list[tuple[CorpusCase, Mask]] = []
    for case in cfg.corpus:
        for gt in case.structures:
            if gt.is_empty():
                raise EmptyGroundTruth(f"{case.case_id}/{gt.structure_label} has no pixels")
            units.append((case, gt))

    alphas = cfg.alphas if (cfg.alphas and cfg.strategy.kind == "linear_combo") else [cfg.strategy.alpha]
    rows: list[ResultRow] = []
    for cell in cfg.grid:
        for n in cfg.n_points:
            for alpha in alphas:
                strategy_cfg = replace(cfg.strategy, alpha=alpha)

                def work(unit):
                    case, gt = unit
                    backend = cfg.backend_factory()
                    scores = _simulate_unit(
                        case, gt, strategy_cfg, cell, n, cfg.iterations, cfg.master_seed, backend
                    )
                    return case.case_id, gt.structure_label, scores

                if cfg.jobs > 1:
                    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                        results = list(pool.map(work, units))
                else:
                    results = [work(u) for u in units]

                results.sort(key=lambda r: (r[0], r[1]))
                per_case = [
                    (case_id, structure, it + 1, score)
                    for case_id, structure, scores in results
                    for it, score in enumerate(scores)
                ]
                finals = [scores[-1] for _, _, scores in results]
                pct = cell.as_percent()
                rows.append(
                    ResultRow(
                        prop_gt=pct[0],
                        prop_out=pct[1],
                        prop_mask_diff=pct[2],
                        num_points=n,
                        strategy=strategy_cfg.describe(),
                        dice=aggregate(finals),
                        per_case=per_case,
                    )
                )
    return rows


def _direct_prompt(
    tagged_points, capacity: int, label_mode: str, seed: int
) -> PointPrompt:
    import numpy as np

    rng = np.random.default_rng(seed)
    coords = [(p.x, p.y) for p in tagged_points]
    labels = label_points(coords, label_mode, rng)
    return PointPrompt.build(coords[:capacity], labels[:capacity], capacity)


def run_two_pass(
    case: CorpusCase,
    gt: Mask,
    backend,
    n_points: int = 20,
    pass2: GridCell = GridCell(prop_gt=0.2, prop_diff=0.7, prop_out=0.1),
    send_prior_mask: bool = False,
    label_mode: str = "fixed_ones",
    master_seed: int = 0,
) -> TwoPassResult:
    """Base prediction from reference-mask points, then one correction pass
    targeting the difference between that prediction and the reference."""
    if gt.is_empty():
        raise EmptyGroundTruth(f"{case.case_id}/{gt.structure_label} has no pixels")
    key = (master_seed, case.case_id, gt.structure_label)
    gen1 = GazeGenConfig(
        prop_gt=1.0, prop_diff=0.0, prop_out=0.0, n_points=n_points,
        seed=derive_seed(*key, "two_pass", 0),
    )
    prompt1 = _direct_prompt(
        generate_prompt_points(gt, None, gen1), n_points, label_mode, derive_seed(*key, "lab", 0)
    )
    base = backend.segment(
        SegmentationRequest(prompt=prompt1, image=case.image, case_id=case.case_id)
    ).mask

    gen2 = GazeGenConfig(
        prop_gt=pass2.prop_gt, prop_diff=pass2.prop_diff, prop_out=pass2.prop_out,
        n_points=n_points, seed=derive_seed(*key, "two_pass", 1),
    )
    prompt2 = _direct_prompt(
        generate_prompt_points(gt, base, gen2), n_points, label_mode, derive_seed(*key, "lab", 1)
    )
    corrected = backend.segment(
        SegmentationRequest(
            prompt=prompt2,
            image=case.image,
            case_id=case.case_id,
            prior_mask=base if send_prior_mask else None,
        )
    ).mask
    return TwoPassResult(
        base_dice=dice(base, gt),
        corrected_dice=dice(corrected, gt),
        base_mask=base,
        corrected_mask=corrected,
    )


def emit_tables(rows: Sequence[ResultRow], out_dir: str | Path) -> tuple[Path, Path]:
    """Write the summary and per-case CSVs with fixed formatting so repeat
    runs are byte-identical."""
    if not rows:
        raise InvalidParam("no result rows to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = out_dir / "summary.csv"
    per_case = out_dir / "per_case.csv"
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("prop_gt,prop_out,prop_mask_diff,num_points,strategy,dice_mean,dice_std,n\n")
        for row in rows:
            fh.write(
                f"{row.prop_gt:g},{row.prop_out:g},{row.prop_mask_diff:g},"
                f"{row.num_points},{row.strategy},"
                f"{row.dice.mean:.5f},{row.dice.std:.5f},{row.dice.n}\n"
            )
    with open(per_case, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("case_id,structure,iteration,prop_gt,prop_out,prop_mask_diff,num_points,strategy,dice\n")
        for row in rows:
            for case_id, structure, iteration, score in row.per_case:
                fh.write(
                    f"{case_id},{structure},{iteration},"
                    f"{row.prop_gt:g},{row.prop_out:g},{row.prop_mask_diff:g},"
                    f"{row.num_points},{row.strategy},{score:.5f}\n"
                )
    return summary, per_case


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


def write_run_manifest(
    out_dir: str | Path,
    cfg: ExperimentConfig,
    rows: Sequence[ResultRow],
    config_doc: dict,
    elapsed_s: float,
) -> Path:
    """Run metadata: seed, config hash, backend identity, both aggregate
    weightings, and the per-iteration regeneration note."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_final: list[float] = []
    by_case: dict[str, list[float]] = {}
    for row in rows:
        last_by_unit: dict[tuple[str, str], float] = {}
        for case_id, structure, iteration, score in row.per_case:
            last_by_unit[(case_id, structure)] = score
        for (case_id, _), score in last_by_unit.items():
            all_final.append(score)
            by_case.setdefault(case_id, []).append(score)
    unweighted = aggregate(all_final) if all_final else None
    case_means = [sum(v) / len(v) for v in by_case.values()]
    case_weighted = aggregate(case_means) if case_means else None
    manifest = {
        "master_seed": cfg.master_seed,
        "config_hash": config_hash(config_doc),
        "backend": cfg.backend_desc,
        "iterations": cfg.iterations,
        "rows": len(rows),
        "elapsed_s": elapsed_s,
        "dice_unweighted": unweighted._asdict() if unweighted else None,
        "dice_case_weighted": case_weighted._asdict() if case_weighted else None,
        "notes": [
            "each iteration regenerates n_points fresh points into the strategy history",
            "aggregate std is the population standard deviation",
        ],
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def load_experiment_config(doc: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Build a runnable config from the JSON experiment document."""
    corpus_doc = dict(doc.get("corpus", {"kind": "builtin", "name": "default"}))
    if corpus_doc.get("kind") in ("dir", "manifest") and "path" in corpus_doc:
        corpus_doc["path"] = str(Path(base_dir) / corpus_doc["path"])
    corpus = load_corpus_config(corpus_doc)
    backend_doc = doc.get("backend", {"kind": "reference", "tau": 0.1})
    if backend_doc.get("kind") == "remote":
        url = backend_doc["url"]
        timeout = float(backend_doc.get("timeout_s", 10.0))
        factory = lambda: RemoteBackend(url, timeout_s=timeout)  # noqa: E731
    else:
        tau = float(backend_doc.get("tau", 0.1))
        factory = lambda: ReferenceBackend(tau=tau)  # noqa: E731
    gen = doc.get("gen", {})
    grid = [
        GridCell(
            prop_gt=float(cell["prop_gt"]),
            prop_diff=float(cell["prop_diff"]),
            prop_out=float(cell["prop_out"]),
        )
        for cell in gen.get("grid", [{"prop_gt": 0.8, "prop_diff": 0.0, "prop_out": 0.2}])
    ]
    return ExperimentConfig(
        corpus=corpus,
        strategy=StrategyConfig.from_dict(doc.get("strategy", {})),
        grid=grid,
        n_points=[int(v) for v in gen.get("n_points", [20])],
        alphas=[float(a) for a in doc["alphas"]] if "alphas" in doc else None,
        iterations=int(doc.get("iterations", 5)),
        master_seed=int(doc.get("master_seed", 0)),
        output_path=str(doc.get("output_path", "out")),
        backend_factory=factory,
        backend_desc=backend_doc,
    )


def run_experiment_from_doc(
    doc: dict,
    base_dir: str | Path = ".",
    seed_override: int | None = None,
    jobs: int = 1,
    out_override: str | None = None,
) -> tuple[Path, Path, Path]:
    """End-to-end entry used by the CLI: resolve, run, emit, manifest."""
    cfg = load_experiment_config(doc, base_dir=base_dir)
    if seed_override is not None:
        cfg.master_seed = seed_override
    cfg.jobs = jobs
    out_dir = Path(out_override) if out_override else Path(base_dir) / cfg.output_path
    started = time.perf_counter()
    rows = run_synthetic_experiment(cfg)
    elapsed = time.perf_counter() - started
    summary, per_case = emit_tables(rows, out_dir)
    manifest = write_run_manifest(out_dir, cfg, rows, doc, elapsed)
    return summary, per_case, manifest
