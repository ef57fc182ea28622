"""Command-line entry point: generate -> train -> tune -> evaluate -> bench.

One binary with subcommands; every stochastic step keys off the single
``--seed`` flag, and each command drops a ``run_manifest.json`` beside its
artifacts recording the command line, config hash, seed, inputs/outputs,
tool version, and host.

Artifact layout under the work directory (``--out`` of train/tune/eval):

    features/                     per-tick feature cache
    detectors/<modality>_n<L>.rtsf
    scores/ns<S>_ng<G>_<fusion>/  cached [T, 6] fusion inputs
    policies/<variant>.rtsf|.fsm
    eval/<variant>/               report.json, det.csv, det.svg
    bench/<variant>.json
    sweep/                        sweep.csv, sweep.txt

Exit codes: 0 success, 2 usage error, 3 missing artifact, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import quantize_fp16
from .detectors import Detector
from .errors import (
    InvalidInputError,
    MissingArtifactError,
    NumericFailureError,
    RtsFuseError,
)
from .evaluation import (
    benchmark_pipeline,
    calibrate_threshold,
    compute_det_eer,
    fsm_operating_point,
    host_descriptor,
    scenario_breakdown,
)
from .fusion import FsmConfig, FsmPolicy, NeuralPolicy
from .sessions import Corpus
from .synthgen import GeneratorConfig, generate_challenge_set, generate_corpus
from .training import (
    CANDIDATES,
    FeatureCache,
    ScoreCache,
    SweepRunner,
    TrainConfig,
    parse_variant,
    policy_scored_sessions,
    fsm_scored_sessions,
    run_sweep,
    score_corpus,
    sweep_rows_to_csv,
    sweep_rows_to_text,
    train_detector,
    train_neural_policy,
    tune_fsm,
)

CONFIG_SCHEMA_VERSION = 1


def _load_config(path, kind):
    """Read a JSON config file with a schema_version field."""
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(f"config file not found: {p}")
    data = json.loads(p.read_text())
    version = data.pop("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported config schema_version {version}")
    data.pop("kind", None)
    allowed = {
        "gen": GeneratorConfig.__dataclass_fields__.keys(),
        "train": TrainConfig.__dataclass_fields__.keys(),
    }[kind]
    unknown = set(data) - set(allowed)
    if unknown:
        raise InvalidInputError(f"unknown config keys for {kind}: {sorted(unknown)}")
    return data


def _config_hash(obj):
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


def _write_run_manifest(out_dir, command, args, config_obj, inputs, outputs, started):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "seed": getattr(args, "seed", None),
        "config_hash": _config_hash(config_obj),
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": __version__,
        "host": host_descriptor(),
        "started_at": started,
        "finished_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _check_out_dir(path, force):
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise InvalidInputError(
            f"output directory {path} is not empty; pass --force to overwrite"
        )
    path.mkdir(parents=True, exist_ok=True)
    return path


def _progress_printer(label):
    state = {"last": 0.0}

    def cb(i, n, *extra):
        now = time.monotonic()
        if now - state["last"] > 5.0 or i == n:
            state["last"] = now
            detail = f" {extra[-1]}" if extra else ""
            print(f"  {label}: {i}/{n}{detail}", flush=True)

    return cb


# -- artifact path helpers --------------------------------------------------


def _detector_path(work, modality, n):
    return Path(work) / "detectors" / f"{modality}_n{n}.rtsf"


def _score_dir(work, ns, ng, fusion):
    return Path(work) / "scores" / f"ns{ns}_ng{ng}_{fusion}"


def _policy_path(work, variant, fusion):
    ext = "fsm" if fusion == "fsm" else "rtsf"
    return Path(work) / "policies" / f"{variant}.{ext}"


def _require(path, what):
    if not Path(path).exists():
        raise MissingArtifactError(f"missing {what}: {path}")
    return Path(path)


def _ensure_feature_cache(corpus_dir, work, progress=True, threads=1):
    fdir = Path(work) / "features"
    try:
        return FeatureCache.load(fdir)
    except MissingArtifactError:
        corpus = Corpus(_require(corpus_dir, "corpus directory"))
        print(f"featurizing {len(corpus)} sessions into {fdir} ...", flush=True)
        return FeatureCache.build(
            corpus, fdir,
            progress=_progress_printer("featurize") if progress else None,
            threads=threads,
        )


def _ensure_score_cache(work, ns, ng, fusion_type, corpus_dir=None):
    sdir = _score_dir(work, ns, ng, fusion_type)
    try:
        return ScoreCache.load(sdir)
    except MissingArtifactError:
        speech = Detector.load(
            _require(_detector_path(work, "speech", ns), "speech detector checkpoint")
        )
        gesture = Detector.load(
            _require(_detector_path(work, "gesture", ng), "gesture detector checkpoint")
        )
        fcache = _ensure_feature_cache(corpus_dir, work) if corpus_dir else FeatureCache.load(Path(work) / "features")
        print(f"scoring corpus into {sdir} ...", flush=True)
        return score_corpus(speech, gesture, fcache, fusion_type, sdir)


# -- subcommands -------------------------------------------------------------


def cmd_gen(args):
    started = _now()
    overrides = _load_config(args.config, "gen")
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = GeneratorConfig(**overrides)
    out = _check_out_dir(args.out, args.force)
    print(f"generating corpus: {config.n_subjects} subjects x "
          f"{config.sessions_per_subject} sessions, seed {config.seed}")
    records = generate_corpus(config, out, progress=_progress_printer("sessions"),
                              threads=args.threads)
    splits = {}
    subjects = {}
    for r in records:
        splits[r.split] = splits.get(r.split, 0) + 1
        subjects.setdefault(r.split, set()).add(r.subject_id)
    for name in ("train", "val", "test"):
        print(f"  {name}: {len(subjects.get(name, ()))} subjects, "
              f"{splits.get(name, 0)} sessions")
    positives = sum(r.intent for r in records)
    print(f"  positive sessions: {positives}/{len(records)}")
    if args.challenge_per_scenario:
        chal_dir = Path(args.out) / "challenge"
        generate_challenge_set(config, chal_dir, n_per_scenario=args.challenge_per_scenario)
        print(f"  challenge set: 5 x {args.challenge_per_scenario} sessions -> {chal_dir}")
    _write_run_manifest(out, "gen", args, config.to_json(),
                        {}, {"corpus": str(out)}, started)
    return 0


def _train_config(args):
    overrides = _load_config(args.config, "train")
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    return TrainConfig(**overrides)


def cmd_train(args):
    started = _now()
    config = _train_config(args)
    work = Path(args.out)
    work.mkdir(parents=True, exist_ok=True)
    fcache = _ensure_feature_cache(args.corpus, work, threads=args.threads)

    ns, ng, fusion, h, _ = parse_variant(args.variant)
    if fusion == "fsm":
        raise InvalidInputError("use the tune-fsm command for FSM variants")

    outputs = {}
    from .detectors import DetectorConfig

    for modality, n in (("speech", ns), ("gesture", ng)):
        path = _detector_path(work, modality, n)
        if path.exists() and not args.force:
            print(f"reusing detector {path}")
            continue
        print(f"training {modality} detector (n={n}, epochs={config.epochs}) ...")
        det, history = train_detector(
            modality,
            fcache,
            det_config=DetectorConfig(modality=modality, n_conv_layers=n),
            config=config,
            log_path=work / "logs" / f"{modality}_n{n}.jsonl" if _mkdir(work / "logs") else None,
            progress=_progress_printer(f"{modality} epochs"),
        )
        path.parent.mkdir(parents=True, exist_ok=True)
        det.save(path)
        outputs[f"{modality}_detector"] = str(path)
        print(f"  final val accuracy: {history[-1]['val_accuracy']:.4f} -> {path}")

    cache = _ensure_score_cache(work, ns, ng, fusion, corpus_dir=args.corpus)
    print(f"training neural policy ({fusion}, h={h}, epochs={config.epochs}) ...")
    policy, history = train_neural_policy(
        cache,
        h,
        config=config,
        log_path=work / "logs" / f"policy_{args.variant}.jsonl",
        progress=_progress_printer("policy epochs"),
    )
    ppath = _policy_path(work, args.variant, fusion)
    ppath.parent.mkdir(parents=True, exist_ok=True)
    policy.save(ppath)
    outputs["policy"] = str(ppath)
    print(f"  parameters: {policy.param_count}; best val EER: "
          f"{min(r['val_eer'] for r in history):.4f} -> {ppath}")
    _write_run_manifest(work, "train", args, vars(config).copy(),
                        {"corpus": str(args.corpus)}, outputs, started)
    return 0


def _mkdir(p):
    Path(p).mkdir(parents=True, exist_ok=True)
    return True


def cmd_tune_fsm(args):
    started = _now()
    config = _train_config(args)
    work = Path(args.out)
    ns, ng, fusion, _, tuning_seed = parse_variant(args.variant)
    if fusion != "fsm":
        raise InvalidInputError(f"variant {args.variant} is not an FSM variant")
    cache = _ensure_score_cache(work, ns, ng, "softmax", corpus_dir=args.corpus)
    print(f"tuning FSM over {args.budget} samples ...")
    cfg, best, _ = tune_fsm(
        cache,
        budget=args.budget,
        seed=config.seed + tuning_seed,
        progress=lambda i, n, obj: print(f"  tune-fsm: {i}/{n} best={obj:.4f}", flush=True),
    )
    ppath = _policy_path(work, args.variant, "fsm")
    ppath.parent.mkdir(parents=True, exist_ok=True)
    cfg.save(ppath)
    print(f"  best validation (FRR+FAR)/2: {best:.4f} -> {ppath}")
    _write_run_manifest(work, "tune-fsm", args, vars(config).copy(),
                        {"corpus": str(args.corpus)}, {"fsm_config": str(ppath)}, started)
    return 0


def _load_policy(work, variant, fusion, precision="fp32"):
    ppath = _require(_policy_path(work, variant, fusion), f"policy for variant {variant}")
    if fusion == "fsm":
        return FsmPolicy(FsmConfig.load(ppath), policy_id=f"fsm-{variant}")
    if precision == "fp16":
        qpath = ppath.with_suffix(".fp16.rtsf")
        quantize_fp16(ppath, qpath)
        return NeuralPolicy.load(qpath)
    return NeuralPolicy.load(ppath)


def cmd_eval(args):
    started = _now()
    work = Path(args.out)
    ns, ng, fusion, h, _ = parse_variant(args.variant)
    eval_dir = work / "eval" / args.variant
    eval_dir.mkdir(parents=True, exist_ok=True)

    report = {"variant": args.variant, "fusion": fusion, "precision": args.precision}
    outputs = {"eval_dir": str(eval_dir)}
    if fusion == "fsm":
        cache = _ensure_score_cache(work, ns, ng, "softmax", corpus_dir=args.corpus)
        policy = _load_policy(work, args.variant, "fsm")
        scored = fsm_scored_sessions(policy, cache, args.split)
        rates, comparison = fsm_operating_point(scored)
        report.update(
            frr=rates.frr,
            far_per_session=rates.far_per_session,
            far_per_hour=rates.far_per_hour,
            comparison_number=comparison,
            note="single tuned operating point; comparison is (FRR+FAR)/2",
        )
        print(f"FSM operating point: FRR={rates.frr:.4f} "
              f"FA/session={rates.far_per_session:.4f} FA/h={rates.far_per_hour:.2f}")
        print(f"comparison number: {comparison:.4f}")
    else:
        cache = _ensure_score_cache(work, ns, ng, fusion, corpus_dir=args.corpus)
        policy = _load_policy(work, args.variant, fusion, precision=args.precision)
        scored = policy_scored_sessions(policy, cache, args.split)
        curve, eer = compute_det_eer(scored)
        det_csv = eval_dir / "det.csv"
        det_svg = eval_dir / "det.svg"
        curve.to_csv(det_csv)
        curve.to_svg(det_svg, title=f"DET {args.variant} ({args.split})")
        report.update(
            eer=eer,
            degenerate=curve.degenerate,
            policy_params=policy.param_count,
            operating_point=_operating_point(scored, policy.threshold),
            det_csv=str(det_csv),
            det_svg=str(det_svg),
        )
        outputs.update(det_csv=str(det_csv), det_svg=str(det_svg))
        print(f"EER ({args.split}): {eer:.4f}  [{policy.param_count} policy params]")
        print(f"DET curve: {det_csv}")
        if args.challenge:
            chal_dir = _require(Path(args.challenge), "challenge corpus")
            report["challenge"] = _challenge_breakdown(
                work, args, ns, ng, fusion, policy, chal_dir
            )
            print("challenge false positives:", report["challenge"])
    (eval_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    _report_csv(eval_dir / "report.csv", report)
    _write_run_manifest(eval_dir, "eval", args, report,
                        {"corpus": str(args.corpus)}, outputs, started)
    return 0


def _operating_point(scored, theta):
    """Event-level rates at one fixed threshold, for the report."""
    from .evaluation import compute_frr_far, match_events

    misses = truths = fas = n_neg = 0
    neg_hours = 0.0
    for s in scored:
        events = s.events_at(theta)
        result = match_events([e.onset_time for e in events], s.truth_onsets)
        misses += result.misses
        truths += len(s.truth_onsets)
        fas += result.false_accepts
        if s.intent == 0:
            n_neg += 1
            neg_hours += s.duration_hours
    rates = compute_frr_far(misses, truths, fas, n_neg, neg_hours)
    return {
        "theta": theta,
        "frr": rates.frr,
        "far_per_session": rates.far_per_session,
        "far_per_hour": rates.far_per_hour,
    }


def _report_csv(path, report, prefix=""):
    """Flatten the report into key,value CSV rows."""
    rows = []

    def walk(obj, key):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(v, f"{key}.{k}" if key else str(k))
        else:
            rows.append(f"{key},{obj}")

    walk(report, prefix)
    Path(path).write_text("key,value\n" + "\n".join(rows) + "\n")


def _challenge_breakdown(work, args, ns, ng, fusion, policy, chal_dir):
    """Score the challenge corpus and count FPs at a 20% FRR threshold."""
    speech = Detector.load(_require(_detector_path(work, "speech", ns), "speech detector"))
    gesture = Detector.load(_require(_detector_path(work, "gesture", ng), "gesture detector"))
    corpus = Corpus(chal_dir)
    ch_features = Path(work) / "features_challenge"
    try:
        fc = FeatureCache.load(ch_features)
    except MissingArtifactError:
        fc = FeatureCache.build(corpus, ch_features)
    sdir = Path(work) / "scores_challenge" / f"ns{ns}_ng{ng}_{fusion}"
    try:
        cache = ScoreCache.load(sdir)
    except MissingArtifactError:
        cache = score_corpus(speech, gesture, fc, fusion, sdir)
    val_cache = _ensure_score_cache(work, ns, ng, fusion, corpus_dir=args.corpus)
    val_scored = [s for s in policy_scored_sessions(policy, val_cache, "val") if s.intent == 1]
    theta = calibrate_threshold(val_scored, target_frr=0.20, tol=0.01)
    chal_scored = policy_scored_sessions(policy, cache)
    return {"theta": theta, "fp_counts": scenario_breakdown(chal_scored, theta=theta)}


def cmd_sweep(args):
    started = _now()
    config = _train_config(args)
    work = Path(args.out)
    work.mkdir(parents=True, exist_ok=True)
    fcache = _ensure_feature_cache(args.corpus, work)
    variants = args.candidates.split(",") if args.candidates else list(CANDIDATES)
    rows = run_sweep(
        fcache,
        variants=variants,
        config=config,
        work_dir=work,
        fsm_budget=args.budget,
        progress=lambda msg: print(f"  sweep: {msg}", flush=True),
    )
    sweep_dir = work / "sweep"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    sweep_rows_to_csv(rows, sweep_dir / "sweep.csv")
    text = sweep_rows_to_text(rows)
    (sweep_dir / "sweep.txt").write_text(text + "\n")
    print(text)
    _write_run_manifest(sweep_dir, "sweep", args, vars(config).copy(),
                        {"corpus": str(args.corpus)},
                        {"csv": str(sweep_dir / "sweep.csv")}, started)
    return 0


def cmd_bench(args):
    started = _now()
    work = Path(args.out)
    ns, ng, fusion, h, _ = parse_variant(args.variant)
    speech = Detector.load(_require(_detector_path(work, "speech", ns), "speech detector"))
    gesture = Detector.load(_require(_detector_path(work, "gesture", ng), "gesture detector"))
    policy = _load_policy(work, args.variant, fusion, precision=args.precision)
    result = benchmark_pipeline(
        speech, gesture, policy,
        iterations=args.iters, seed=args.seed if args.seed is not None else 0,
        variant=args.variant,
    )
    bench_dir = work / "bench"
    bench_dir.mkdir(parents=True, exist_ok=True)
    out_path = bench_dir / f"{args.variant}.json"
    out_path.write_text(json.dumps(vars(result), indent=2, default=str) + "\n")
    print(f"variant {args.variant}: {result.iterations} iterations, "
          f"mean {result.mean_ms:.3f} ms, p95 {result.p95_ms:.3f} ms, "
          f"peak RSS {result.peak_rss_mb:.1f} MB")
    print(f"host: {result.host['cpu']} ({result.host['cores']} cores)")
    _write_run_manifest(bench_dir, "bench", args, {"iters": args.iters},
                        {"work": str(work)}, {"result": str(out_path)}, started)
    return 0


# -- argument parsing ---------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rtsfuse",
        description="Streaming raise-to-speak trigger detection: synthetic corpus, "
                    "training, fusion policies, and event-level evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"rtsfuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_corpus=True):
        p.add_argument("--seed", type=int, default=None, help="master seed for all randomness")
        p.add_argument("--threads", type=int, default=os.cpu_count(),
                       help="worker-parallelism cap (generation and featurization)")
        p.add_argument("--force", action="store_true", help="overwrite existing artifacts")
        p.add_argument("--config", default=None, help="JSON config file")
        if needs_corpus:
            p.add_argument("--corpus", required=True, help="corpus directory from `gen`")
        p.add_argument("--out", required=True, help="artifact/work directory")

    p = sub.add_parser("gen", help="generate a labeled synthetic corpus")
    common(p, needs_corpus=False)
    p.add_argument("--challenge-per-scenario", type=int, default=0,
                   help="also emit a challenge set with N sessions per scenario")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("train", help="train detectors and a fusion policy variant")
    common(p)
    p.add_argument("--variant", default="b", help="candidate letter (b..f) or sweep key")
    p.add_argument("--epochs", type=int, default=None, help="override config epochs")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("tune-fsm", help="random-search the FSM baseline hyperparameters")
    common(p)
    p.add_argument("--variant", default="a", help="FSM variant key (default: candidate a)")
    p.add_argument("--budget", type=int, default=2000, help="random-search samples")
    p.add_argument("--epochs", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_tune_fsm)

    p = sub.add_parser("eval", help="evaluate a trained variant (EER / operating point)")
    common(p)
    p.add_argument("--variant", default="b")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--precision", default="fp32", choices=["fp32", "fp16"])
    p.add_argument("--challenge", default=None,
                   help="challenge corpus dir for the per-scenario FP breakdown")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="train/tune/evaluate a set of sweep candidates")
    common(p)
    p.add_argument("--candidates", default=None,
                   help="comma-separated variant keys (default: a,b,c,d,e,f)")
    p.add_argument("--budget", type=int, default=2000, help="FSM tuning budget")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("bench", help="latency/memory benchmark of the full pipeline")
    common(p)
    p.add_argument("--variant", default="a")
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--precision", default="fp32", choices=["fp32", "fp16"])
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except MissingArtifactError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericFailureError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except (InvalidInputError, RtsFuseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
