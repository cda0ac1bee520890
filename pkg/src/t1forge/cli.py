"""Command-line entry point.

Subcommands: phantom, qc-fit, blood-fit, analyze, report. Exit codes:
0 success, 2 config/usage error, 3 every subject rejected, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import benchmark, phantom, pipeline, qc, rawgrid, report
from .analysis import fit_blood_model
from .errors import ConstantPredictor, EmptyCohort, OneClassOnly, T1ForgeError, TooFewSubjects
from .pipeline import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_REJECTED = 3
EXIT_IO = 4

_CORRUPT_ALIASES = {
    "wrong_plane": "wrong_plane",
    "motion": "motion_ghosting",
    "motion_ghosting": "motion_ghosting",
    "mask_failure": "mask_failure",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="t1forge",
                                     description="Automated native-T1 analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate synthetic phantom subjects")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1, help="number of subjects")
    p.add_argument("--size", type=int, default=192)
    p.add_argument("--noise-sd", type=float, default=30.0)
    p.add_argument("--corrupt", choices=sorted(_CORRUPT_ALIASES), default=None)
    p.add_argument("--severity", type=float, default=0.7)
    p.add_argument("--vary-myo-t1", action="store_true",
                   help="randomise myocardial T1 across the batch")

    p = sub.add_parser("qc-fit", help="calibrate the QC gate from a labelled dataset")
    p.add_argument("--dataset", required=True, help="labelled feature CSV")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.5, help="training fraction")
    p.add_argument("--iterations", type=int, default=800)
    p.add_argument("--learning-rate", type=float, default=0.25)

    p = sub.add_parser("blood-fit", help="fit the blood-correction model from a cohort CSV")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True, help="blood model JSON path")

    p = sub.add_parser("analyze", help="run the full pipeline over a cohort")
    p.add_argument("--config", required=True, help="TOML pipeline configuration")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-T", "--samples", type=int, default=None, dest="t",
                   help="override sample count per subject")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--qc-model", default=None)
    p.add_argument("--blood-model", default=None)
    p.add_argument("--fit-blood", action="store_true", default=None)

    p = sub.add_parser("report", help="emit plots and tables from a cohort CSV")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--column", default="t1_global")
    return parser


def _cmd_phantom(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = phantom.PhantomSpec(size=args.size, noise_sd=args.noise_sd,
                               lv_center=(args.size / 2.0, args.size / 2.0))
    specs = phantom.batch_specs(base, args.count, args.seed,
                                vary_myo_t1=(870.0, 1010.0) if args.vary_myo_t1 else None)
    subjects = []
    for i, spec in enumerate(specs):
        sid = f"s{i:04d}"
        sdir = out / sid
        sdir.mkdir(exist_ok=True)
        truth = phantom.generate(spec)
        image, mask = truth.image, truth.mask
        corruption = None
        if args.corrupt:
            mode = _CORRUPT_ALIASES[args.corrupt]
            image, mask = phantom.corrupt(truth, mode, args.severity, seed=spec.seed)
            corruption = {"mode": mode, "severity": args.severity}
        rawgrid.write_grid(sdir / "image.rawgrid", image, dtype="float64")
        rawgrid.write_mask(sdir / "mask.rawgrid", mask)
        meta = {
            "subject_id": sid,
            "seed": spec.seed,
            "size": spec.size,
            "noise_sd": spec.noise_sd,
            "true_t1": truth.true_t1,
            "rv1": list(truth.rv1),
            "rv2": list(truth.rv2),
            "septal_start": truth.septal_start,
            "septal_width": truth.septal_width,
            "lv_center": list(spec.lv_center),
            "corruption": corruption,
        }
        (sdir / "truth.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
        subjects.append(sid)
    lines = ["t = 100", f"seed = {args.seed}", 'output_dir = "analysis"', ""]
    for sid in subjects:
        lines += ["[[subjects]]", f'id = "{sid}"', f'image = "{sid}/image.rawgrid"',
                  f'group = "phantom"', ""]
    (out / "cohort.toml").write_text("\n".join(lines))
    print(f"wrote {len(subjects)} subject(s) under {out}")
    return EXIT_OK


def _cmd_qc_fit(args) -> int:
    records = benchmark.records_from_csv(args.dataset)
    cfg = qc.TrainConfig(iterations=args.iterations, learning_rate=args.learning_rate)
    threshold, classifier, metrics = benchmark.fit_qc(records, seed=args.seed,
                                                      split=args.split, config=cfg)
    qc.save_model(args.out, threshold, classifier)
    print(f"threshold = {threshold!r}")
    print(f"holdout sensitivity = {metrics['sensitivity']:.4f}")
    print(f"holdout specificity = {metrics['specificity']:.4f}")
    print(f"holdout balanced_accuracy = {metrics['balanced_accuracy']:.4f}")
    print(f"model written to {args.out}")
    return EXIT_OK


def _cmd_blood_fit(args) -> int:
    rows = report.read_cohort(args.cohort)
    t1, r1 = [], []
    for row in rows:
        if row.get("accepted") == "true" and row.get("t1_global") and row.get("r1"):
            t1.append(float(row["t1_global"]))
            r1.append(float(row["r1"]))
    model = fit_blood_model(t1, r1)
    model.save(args.out)
    print(f"alpha = {model.alpha!r}")
    print(f"intercept = {model.intercept!r}")
    print(f"r2 = {model.r2:.4f}, mse = {model.mse:.4f}, n = {len(t1)}")
    print(f"model written to {args.out}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    overrides = {"seed": args.seed, "t": args.t, "threads": args.threads,
                 "qc_model": args.qc_model, "blood_model": args.blood_model,
                 "output_dir": args.out}
    if args.fit_blood:
        overrides["fit_blood_from_cohort"] = True
    cfg = pipeline.load_config(args.config, overrides)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run.log", "a") as log:
        result = pipeline.run_analyze(cfg, log=log)
        pipeline.write_outputs(result, out)
    print(f"{result.n_accepted}/{len(result.reports)} subjects accepted; outputs in {out}")
    if result.n_accepted == 0:
        return EXIT_ALL_REJECTED
    return EXIT_OK


def _cmd_report(args) -> int:
    info = report.write_report(args.cohort, args.out, column=args.column)
    print(f"wrote report for {info['groups']} group(s) to {args.out}")
    if info["bland_altman"]:
        print(f"bland-altman bias = {info['bland_altman']['bias']:.4f} "
              f"(n={info['bland_altman']['n']})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "phantom": _cmd_phantom,
        "qc-fit": _cmd_qc_fit,
        "blood-fit": _cmd_blood_fit,
        "analyze": _cmd_analyze,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, OneClassOnly, EmptyCohort, TooFewSubjects,
            ConstantPredictor, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except T1ForgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
