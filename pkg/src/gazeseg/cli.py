"""Command-line entry point: a thin client over the core package and the
service; domain failures surface as one JSON diagnostic line on stderr."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from pathlib import Path

from .errors import CorpusError, WorkbenchError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeseg",
        description="Gaze-driven interactive segmentation workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="Generate a phantom corpus directory")
    p.add_argument("--corpus", default="default", choices=["default", "twolobe"],
                   help="Builtin corpus family")
    p.add_argument("--cases", type=int, default=None, help="Number of cases")
    p.add_argument("--seed", type=int, default=0, help="Corpus seed")
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("experiment", help="Run a synthetic experiment sweep")
    p.add_argument("--config", required=True, help="Experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="Master seed override")
    p.add_argument("--jobs", type=int, default=1, help="Concurrent case workers")
    p.add_argument("--out", default=None, help="Output directory override")

    p = sub.add_parser("two-pass", help="Base prediction then one correction pass")
    p.add_argument("--config", required=True, help="Two-pass config JSON")
    p.add_argument("--seed", type=int, default=None, help="Master seed override")
    p.add_argument("--out", default=None, help="Output CSV path")

    p = sub.add_parser("evaluate", help="Score predicted masks against references")
    p.add_argument("--pred", required=True, help="Directory of predicted RLE JSON files")
    p.add_argument("--ref", required=True, help="Directory of reference RLE JSON files")
    p.add_argument("--out", default=None, help="Optional JSON report path")

    p = sub.add_parser("nifti-info", help="Print dims/pixdim/datatype of a NIfTI file")
    p.add_argument("path", help="Path to a .nii or .nii.gz file")

    p = sub.add_parser("serve", help="Start the segmentation/session service")
    p.add_argument("--port", type=int, default=8731, help="Bind port")
    p.add_argument("--host", default="127.0.0.1", help="Bind host")
    p.add_argument("--config", default=None, help="Service config JSON")

    p = sub.add_parser("replay", help="Replay a recorded session log")
    p.add_argument("--log", required=True, help="Session log (JSONL)")
    p.add_argument("--backend", default="reference",
                   help="'reference' or a remote base URL")
    p.add_argument("--config", default=None, help="Corpus config JSON (defaults to builtin)")
    p.add_argument("--tau", type=float, default=0.1, help="Reference backend tolerance")
    p.add_argument("--out", default=None, help="Optional JSON report path")

    p = sub.add_parser("bench", help="Benchmark the prompt-selection step")
    p.add_argument("--history-size", type=int, default=10_000, help="Gaze history length")
    p.add_argument("--repeats", type=int, default=200, help="Benchmark repetitions")
    return parser


def _diagnostic(exc: Exception) -> int:
    code = getattr(exc, "code", type(exc).__name__)
    print(json.dumps({"error": code, "detail": str(exc)}), file=sys.stderr)
    return 1


def _cmd_phantom(args) -> int:
    from .dataio import builtin_corpus, write_corpus_dir

    corpus = builtin_corpus(args.corpus, cases=args.cases, seed=args.seed)
    index = write_corpus_dir(args.out, corpus)
    print(json.dumps({"written": str(index), "cases": len(corpus)}))
    return 0


def _cmd_experiment(args) -> int:
    from .harness import run_experiment_from_doc

    config_path = Path(args.config)
    doc = json.loads(config_path.read_text(encoding="utf-8"))
    summary, per_case, manifest = run_experiment_from_doc(
        doc,
        base_dir=config_path.parent,
        seed_override=args.seed,
        jobs=args.jobs,
        out_override=args.out,
    )
    print(json.dumps({
        "summary": str(summary), "per_case": str(per_case), "manifest": str(manifest),
    }))
    return 0


def _cmd_two_pass(args) -> int:
    from .backend import ReferenceBackend, RemoteBackend
    from .dataio import load_corpus_config
    from .harness import GridCell, run_two_pass
    from .metrics import aggregate

    config_path = Path(args.config)
    doc = json.loads(config_path.read_text(encoding="utf-8"))
    corpus_doc = dict(doc.get("corpus", {"kind": "builtin", "name": "twolobe"}))
    if corpus_doc.get("kind") in ("dir", "manifest") and "path" in corpus_doc:
        corpus_doc["path"] = str(config_path.parent / corpus_doc["path"])
    corpus = load_corpus_config(corpus_doc)
    backend_doc = doc.get("backend", {"kind": "reference", "tau": 0.1})
    if backend_doc.get("kind") == "remote":
        backend = RemoteBackend(backend_doc["url"], timeout_s=float(backend_doc.get("timeout_s", 10.0)))
    else:
        backend = ReferenceBackend(tau=float(backend_doc.get("tau", 0.1)))
    props = doc.get("pass2", {"prop_gt": 0.2, "prop_diff": 0.7, "prop_out": 0.1})
    cell = GridCell(
        prop_gt=float(props["prop_gt"]),
        prop_diff=float(props["prop_diff"]),
        prop_out=float(props["prop_out"]),
    )
    seed = args.seed if args.seed is not None else int(doc.get("master_seed", 0))
    lines = []
    base_scores, corr_scores = [], []
    for case in corpus:
        for gt in case.structures:
            res = run_two_pass(
                case, gt, backend,
                n_points=int(doc.get("n_points", 20)),
                pass2=cell,
                send_prior_mask=bool(doc.get("send_prior_mask", False)),
                master_seed=seed,
            )
            lines.append((case.case_id, gt.structure_label, res.base_dice, res.corrected_dice))
            base_scores.append(res.base_dice)
            corr_scores.append(res.corrected_dice)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("case_id,structure,base_dice,corrected_dice\n")
            for case_id, structure, b, c in lines:
                fh.write(f"{case_id},{structure},{b:.5f},{c:.5f}\n")
    base_stat = aggregate(base_scores)
    corr_stat = aggregate(corr_scores)
    print(json.dumps({
        "units": len(lines),
        "base_dice_mean": round(base_stat.mean, 5),
        "corrected_dice_mean": round(corr_stat.mean, 5),
    }))
    return 0


def _cmd_evaluate(args) -> int:
    from .core import decode_rle
    from .metrics import aggregate, dice

    pred_dir, ref_dir = Path(args.pred), Path(args.ref)
    names = sorted(p.name for p in ref_dir.glob("*.json") if p.name != "corpus.json")
    if not names:
        raise CorpusError(f"no reference RLE files under {ref_dir}")
    scores: list[float] = []
    by_case: dict[str, list[float]] = {}
    for name in names:
        pred_path = pred_dir / name
        if not pred_path.exists():
            raise CorpusError(f"missing prediction for {name}")
        ref = decode_rle(json.loads((ref_dir / name).read_text(encoding="utf-8")))
        pred = decode_rle(json.loads(pred_path.read_text(encoding="utf-8")))
        score = dice(pred, ref)
        scores.append(score)
        case_id = name.split("__")[0]
        by_case.setdefault(case_id, []).append(score)
    unweighted = aggregate(scores)
    case_weighted = aggregate([sum(v) / len(v) for v in by_case.values()])
    report = {
        "n": unweighted.n,
        "dice_mean": round(unweighted.mean, 5),
        "dice_std": round(unweighted.std, 5),
        "dice_mean_case_weighted": round(case_weighted.mean, 5),
        "dice_std_case_weighted": round(case_weighted.std, 5),
        "cases": len(by_case),
    }
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(json.dumps(report))
    return 0


def _cmd_nifti_info(args) -> int:
    from .nifti import parse_nifti

    vol = parse_nifti(Path(args.path).read_bytes())
    print(json.dumps({
        "dims": list(vol.dims),
        "pixdim": [round(v, 6) for v in vol.pixdim],
        "datatype": vol.datatype,
        "endianness": vol.endianness,
        "rescale": list(vol.rescale),
    }))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app, load_service_config

    if args.config:
        config_path = Path(args.config)
        doc = json.loads(config_path.read_text(encoding="utf-8"))
        config = load_service_config(doc, base_dir=config_path.parent)
    else:
        from .dataio import builtin_corpus

        config = ServiceConfig(corpus=builtin_corpus("default"))
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_replay(args) -> int:
    from .backend import ReferenceBackend, RemoteBackend
    from .dataio import builtin_corpus, load_corpus_config
    from .session import CaseStore, read_session_log, replay_session

    if args.config:
        config_path = Path(args.config)
        doc = json.loads(config_path.read_text(encoding="utf-8"))
        corpus_doc = dict(doc.get("corpus", doc))
        if corpus_doc.get("kind") in ("dir", "manifest") and "path" in corpus_doc:
            corpus_doc["path"] = str(config_path.parent / corpus_doc["path"])
        corpus = load_corpus_config(corpus_doc)
    else:
        corpus = builtin_corpus("default")
    if args.backend == "reference":
        backend = ReferenceBackend(tau=args.tau)
    else:
        backend = RemoteBackend(args.backend)
    events = read_session_log(args.log)
    report = replay_session(events, backend, CaseStore(corpus))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(json.dumps({
        "exact_replay": report["exact_replay"],
        "structures": len(report["structures"]),
        "elapsed_mean_s": report["elapsed_mean_s"],
        "elapsed_std_s": report["elapsed_std_s"],
    }))
    return 0


def _cmd_bench(args) -> int:
    import numpy as np

    from .strategy import StrategyConfig, StrategyState, next_prompt_accumulate

    rng = np.random.default_rng(0)
    history = rng.uniform(0, 160, size=(args.history_size, 2)).tolist()
    timings = []
    for _ in range(args.repeats):
        state = StrategyState(StrategyConfig(kind="accumulate_sample", capacity=20), seed=1)
        state.record(history)
        started = time.perf_counter()
        next_prompt_accumulate(state, [(80.0, 80.0)])
        timings.append((time.perf_counter() - started) * 1000.0)
    print(json.dumps({
        "history_size": args.history_size,
        "repeats": args.repeats,
        "median_ms": round(statistics.median(timings), 4),
        "p95_ms": round(sorted(timings)[int(0.95 * len(timings))], 4),
    }))
    return 0


_COMMANDS = {
    "phantom": _cmd_phantom,
    "experiment": _cmd_experiment,
    "two-pass": _cmd_two_pass,
    "evaluate": _cmd_evaluate,
    "nifti-info": _cmd_nifti_info,
    "serve": _cmd_serve,
    "replay": _cmd_replay,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except WorkbenchError as exc:
        return _diagnostic(exc)
    except (OSError, json.JSONDecodeError) as exc:
        return _diagnostic(exc)


if __name__ == "__main__":
    sys.exit(main())
