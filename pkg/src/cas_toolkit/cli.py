"""Command-line interface: one binary, nine subcommands, file-based stages.

Every stage reads files, computes in memory, and writes its outputs
atomically at the end, so a failing invocation leaves no partial
artifacts.  Outputs land only inside the chosen --out-dir.  Identical
inputs and seeds produce byte-identical outputs.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import augment as aug
from . import cas as cas_mod
from . import dictionary as dict_mod
from . import report as report_mod
from . import sampling
from ._util import atomic_write_text, dump_json, worker_count
from .errors import CasToolkitError, ValidationError
from .rng import SeedStream, derive_seed
from .store import read_embeddings, read_manifest
from .taxonomy import load_default_taxonomy, load_taxonomy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INVALID = 4

EPILOG = """\
exit codes:
  0  success
  2  usage error (unknown subcommand, bad or missing flags)
  3  I/O error (missing or unreadable input file)
  4  invalid data (malformed file, failed validation, bad parameter value)

failures print one JSON object to stderr (argparse flag errors print
its usual usage text instead):
  {"error": "usage"|"io"|"validation", "type": <exception>, "message": <text>[, "stage": <name>]}

environment:
  CAS_TOOLKIT_THREADS  caps the worker-thread count for batch stages
  CAS_TOOLKIT_NO_EXT   set to 1 to force the pure-Python random kernels
"""


class CliError(Exception):
    """Carries an exit code and a machine-readable error payload."""

    def __init__(self, code, kind, message, stage=None, original_type=None):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.stage = stage
        self.original_type = original_type or type(self).__name__


def _io_error(message, stage=None):
    return CliError(EXIT_IO, "io", message, stage)


def _require_files(*paths):
    for path in paths:
        if path is None:
            continue
        if not os.path.isfile(path):
            raise _io_error(f"missing input file: {path}")


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_taxonomy_arg(path):
    if path is None:
        return load_default_taxonomy()
    _require_files(path)
    return load_taxonomy(path)


def _parse_seed(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer seed: {text!r}") from None


# ---------------------------------------------------------------- build-dict

def _cmd_build_dict(args):
    _require_files(args.text_embeddings, args.reference_images)
    taxonomy = _load_taxonomy_arg(args.taxonomy)
    text = read_embeddings(args.text_embeddings)
    refs = read_embeddings(args.reference_images)
    built = dict_mod.build_dictionary(text, refs, taxonomy)
    out = _out_dir(args)
    dict_mod.save_dictionary(built, out / "dictionary.case", out / "dictionary.json")
    print(f"dictionary: {built.keys.count} keys, dim {built.dim} -> {out / 'dictionary.case'}")
    return EXIT_OK


# ------------------------------------------------------------------ annotate

def _sidecar_path(keys_path, sidecar):
    if sidecar is not None:
        return sidecar
    return str(Path(keys_path).with_suffix(".json"))


def _cmd_annotate(args):
    sidecar = _sidecar_path(args.dictionary, args.sidecar)
    _require_files(args.dictionary, sidecar, args.images, args.manifest)
    built = dict_mod.load_dictionary(args.dictionary, sidecar)
    images = read_embeddings(args.images)
    manifest = read_manifest(args.manifest)
    annotated = dict_mod.annotate_dataset(built, images, manifest)
    out = _out_dir(args)
    dict_mod.write_annotations(annotated, out / "annotations.jsonl")
    print(f"annotated {len(annotated)} images -> {out / 'annotations.jsonl'}")
    return EXIT_OK


# ----------------------------------------------------------------------- cas

def _cmd_cas(args):
    _require_files(args.annotations)
    fingerprint = None
    if args.taxonomy is not None:
        fingerprint = _load_taxonomy_arg(args.taxonomy).fingerprint()
    annotations = dict_mod.read_annotations(args.annotations)
    table = cas_mod.build_frequency_table(annotations, scope=args.scope)
    scores = cas_mod.cas_of(annotations, table)
    statistics = cas_mod.cas_statistics(scores)
    out = _out_dir(args)
    cas_mod.write_cas_scores(scores, out / "cas.jsonl")
    cas_mod.write_statistics(statistics, out / "stats.json", taxonomy_fingerprint=fingerprint)
    print(
        f"cas: n={statistics.n} mean={statistics.mean:.4f} std={statistics.std:.4f} "
        f"-> {out / 'cas.jsonl'}"
    )
    return EXIT_OK


# ------------------------------------------------------------------- weights

def _cmd_weights(args):
    _require_files(args.cas)
    scores = cas_mod.read_cas_scores(args.cas)
    schedule = sampling.compute_schedule(scores, power=args.power, seed=args.seed)
    out = _out_dir(args)
    sampling.save_schedule(schedule, out / "schedule.json")
    print(f"schedule: {len(schedule)} items, power {schedule.power} -> {out / 'schedule.json'}")
    return EXIT_OK


# -------------------------------------------------------------------- sample

def _cmd_sample(args):
    _require_files(args.schedule)
    schedule = sampling.load_schedule(args.schedule)
    if args.count < 0:
        raise ValidationError("--count must be non-negative")
    indices = sampling.draw(schedule, args.count, seed=args.seed)
    if args.emit == "ids":
        lines = [schedule.image_ids[k] for k in indices]
    else:
        lines = [str(k) for k in indices]
    out = _out_dir(args)
    payload = "\n".join(lines)
    atomic_write_text(out / "samples.txt", payload + "\n" if payload else payload)
    print(f"sampled {args.count} ({args.emit}) -> {out / 'samples.txt'}")
    return EXIT_OK


# ------------------------------------------------------------------- augment

def _resolve_image_path(entry, manifest_dir, image_root):
    if entry.source_path is None:
        raise ValidationError(f"manifest entry {entry.image_id!r} has no source_path")
    base = Path(image_root) if image_root is not None else manifest_dir
    return base / entry.source_path


def _one_hot(labels, label):
    vec = [0.0] * len(labels)
    vec[labels.index(label)] = 1.0
    return vec


def _run_augment_batch(schedule, manifest, manifest_dir, args, out, seed):
    """Draw, pair, mix, and write one augmented batch; returns plan rows."""
    if args.batch < 2:
        raise ValidationError("--batch must be at least 2")
    master = SeedStream(seed)
    indices = sampling.draw_with_stream(schedule, args.batch, master)
    drawn_ids = [schedule.image_ids[k] for k in indices]
    pairs = aug.make_pairs(args.batch, master, offset=args.pair_offset)

    entries = {image_id: manifest.get(image_id) for image_id in set(drawn_ids)}
    paths = {
        image_id: _resolve_image_path(entry, manifest_dir, args.image_root)
        for image_id, entry in entries.items()
    }
    for image_id, path in sorted(paths.items()):
        if not path.is_file():
            raise _io_error(f"image file for {image_id!r} not found: {path}")

    workers = worker_count(len(paths))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        loaded = dict(
            zip(paths, pool.map(lambda p: aug.load_image(paths[p]), paths))
        )
    labels = sorted({entry.class_label for entry in manifest})
    shape = None
    for image_id in sorted(loaded):
        if shape is None:
            shape = loaded[image_id].shape
        elif loaded[image_id].shape != shape:
            raise ValidationError(
                f"image {image_id!r} has shape {loaded[image_id].shape}, "
                f"expected {shape}; augmentation needs equal shapes"
            )

    def mix_one(k):
        id_a = drawn_ids[pairs[k][0]]
        id_b = drawn_ids[pairs[k][1]]
        pair_seed = derive_seed(seed, k)
        result = aug.make_mix(
            args.method,
            loaded[id_a],
            loaded[id_b],
            _one_hot(labels, entries[id_a].class_label),
            _one_hot(labels, entries[id_b].class_label),
            SeedStream(pair_seed),
            alpha=args.alpha,
            decay=args.decay,
        )
        return (id_a, id_b, pair_seed, result)

    with ThreadPoolExecutor(max_workers=worker_count(args.batch)) as pool:
        mixed = list(pool.map(mix_one, range(args.batch)))

    mix_dir = out / "mixes"
    mix_dir.mkdir(parents=True, exist_ok=True)
    plan_rows = []
    for k, (id_a, id_b, pair_seed, result) in enumerate(mixed):
        name = f"mix_{k:04d}.png"
        aug.save_image(result.image, mix_dir / name)
        row = {
            "pair": [id_a, id_b],
            "method": result.method,
            "lambda": result.lam,
            "lambda_eff": result.lam_eff,
        }
        if result.box is not None:
            row["box"] = list(result.box)
        row["seed"] = pair_seed
        plan_rows.append(row)
    lines = "".join(dump_json(row) + "\n" for row in plan_rows)
    atomic_write_text(out / "plan.jsonl", lines)
    return plan_rows


def _cmd_augment(args):
    _require_files(args.schedule, args.manifest)
    schedule = sampling.load_schedule(args.schedule)
    manifest = read_manifest(args.manifest)
    manifest_dir = Path(args.manifest).resolve().parent
    out = _out_dir(args)
    seed = schedule.seed if args.seed is None else args.seed
    plan_rows = _run_augment_batch(schedule, manifest, manifest_dir, args, out, seed)
    print(f"augmented {len(plan_rows)} pairs ({args.method}) -> {out / 'plan.jsonl'}")
    return EXIT_OK


# -------------------------------------------------------------------- report

def _binning_rows_for(scores, per_class):
    if not per_class:
        return report_mod.binning_rows(report_mod.bin_cas(scores))
    by_class = {}
    for score in scores:
        by_class.setdefault(score.class_label, []).append(score)
    rows = []
    for label in sorted(by_class):
        rows.extend(
            report_mod.binning_rows(report_mod.bin_cas(by_class[label]), class_label=label)
        )
    return rows


def _cmd_report(args):
    out = _out_dir(args)
    fmt = args.format
    if args.kind == "distribution":
        if args.annotations is None:
            raise CliError(EXIT_USAGE, "usage", "report --kind distribution needs --annotations")
        _require_files(args.annotations)
        annotations = dict_mod.read_annotations(args.annotations)
        rows = report_mod.attribute_distribution(annotations, scope=args.scope)
        columns = report_mod.DISTRIBUTION_COLUMNS
    elif args.kind == "bins":
        if args.cas is None:
            raise CliError(EXIT_USAGE, "usage", "report --kind bins needs --cas")
        _require_files(args.cas)
        scores = cas_mod.read_cas_scores(args.cas)
        rows = _binning_rows_for(scores, args.per_class)
        columns = report_mod.BINNING_COLUMNS
    elif args.kind == "partition":
        if args.cas is None:
            raise CliError(EXIT_USAGE, "usage", "report --kind partition needs --cas")
        _require_files(args.cas)
        scores = cas_mod.read_cas_scores(args.cas)
        partition = report_mod.partition_by_cas(scores)
        rows = report_mod.partition_rows(partition, scores)
        columns = report_mod.PARTITION_COLUMNS
    else:
        if args.before is None or args.after is None:
            raise CliError(EXIT_USAGE, "usage", "report --kind compare needs --before and --after")
        _require_files(args.before, args.after)
        before, fp_before = cas_mod.read_statistics(args.before)
        after, fp_after = cas_mod.read_statistics(args.after)
        record = report_mod.compare_cas(before, after, fp_before, fp_after)
        rows = report_mod.compare_rows(record)
        columns = report_mod.COMPARE_COLUMNS
    path = out / f"{args.kind}.{fmt}"
    report_mod.write_report(path, fmt, columns, rows)
    print(f"report {args.kind} ({fmt}) -> {path}")
    return EXIT_OK


# --------------------------------------------------------------------- sweep

def _parse_sweep_grid(text):
    """Parse "start:stop:step" into exact decimal grid values, inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"--b must look like start:stop:step, got {text!r}")
    try:
        start, stop, step = (Decimal(part) for part in parts)
    except InvalidOperation:
        raise ValidationError(f"--b has non-numeric parts: {text!r}") from None
    if step <= 0:
        raise ValidationError("--b step must be positive")
    if stop < start:
        raise ValidationError("--b stop must be >= start")
    if start <= 0:
        raise ValidationError("--b powers must be positive")
    values = []
    k = 0
    while True:
        value = start + k * step
        if value > stop:
            break
        values.append(value)
        k += 1
        if k > 10000:
            raise ValidationError("--b grid has more than 10000 points")
    return values


def _cmd_sweep(args):
    _require_files(args.cas)
    grid = _parse_sweep_grid(args.b)
    scores = cas_mod.read_cas_scores(args.cas)
    out = _out_dir(args)
    written = []
    schedules = []
    for value in grid:
        schedule = sampling.compute_schedule(scores, power=float(value), seed=args.seed)
        # normalize() trims trailing zeros so 0.60 and 0.6 name the same file
        label = format(value.normalize(), "f")
        schedules.append((schedule, out / f"schedule_b{label}.json"))
    for schedule, path in schedules:
        sampling.save_schedule(schedule, path)
        written.append(path.name)
    print(f"sweep: {len(written)} schedules -> {out}")
    for name in written:
        print(f"  {name}")
    return EXIT_OK


# ------------------------------------------------------------------ pipeline

_PIPELINE_DEFAULTS = {
    "taxonomy": None,
    "text_embeddings": None,
    "reference_images": None,
    "images": None,
    "manifest": None,
    "image_root": None,
    "scope": cas_mod.SCOPE_PER_CLASS,
    "power": sampling.DEFAULT_POWER,
    "alpha": aug.DEFAULT_ALPHA,
    "decay": aug.DEFAULT_DECAY,
    "method": aug.METHOD_CUTMIX,
    "batch": 16,
    "sample_count": None,
    "pair_offset": None,
    "seed": 0,
}

_PIPELINE_REQUIRED = ("text_embeddings", "reference_images", "images", "manifest")


def _merge_pipeline_config(args):
    """flags > config file > defaults; returns a plain namespace."""
    merged = dict(_PIPELINE_DEFAULTS)
    if args.config is not None:
        _require_files(args.config)
        with open(args.config, "r", encoding="utf-8") as handle:
            try:
                loaded = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ValidationError(f"{args.config}: config must be a JSON object")
        unknown = set(loaded) - set(_PIPELINE_DEFAULTS)
        if unknown:
            raise ValidationError(f"{args.config}: unknown config keys {sorted(unknown)}")
        merged.update(loaded)
    for key in _PIPELINE_DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    missing = [key for key in _PIPELINE_REQUIRED if merged[key] is None]
    if missing:
        flags = ", ".join("--" + key.replace("_", "-") for key in missing)
        raise CliError(EXIT_USAGE, "usage", f"pipeline needs {flags} (flag or config file)")
    if merged["scope"] not in (cas_mod.SCOPE_PER_CLASS, cas_mod.SCOPE_GLOBAL):
        raise ValidationError(f"unknown scope {merged['scope']!r}")
    if merged["method"] not in aug.METHODS:
        raise ValidationError(f"unknown method {merged['method']!r}")
    for key in ("power", "alpha", "decay"):
        value = merged[key]
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
            raise ValidationError(f"{key} must be a positive number, got {value!r}")
    for key in ("batch", "seed"):
        if not isinstance(merged[key], int) or isinstance(merged[key], bool):
            raise ValidationError(f"{key} must be an integer, got {merged[key]!r}")
    return argparse.Namespace(**merged)


def _cmd_pipeline(args):
    config = _merge_pipeline_config(args)
    out = _out_dir(args)
    stage = "setup"
    try:
        _require_files(
            config.text_embeddings, config.reference_images, config.images, config.manifest
        )
        taxonomy = _load_taxonomy_arg(config.taxonomy)
        fingerprint = taxonomy.fingerprint()

        stage = "build-dict"
        text = read_embeddings(config.text_embeddings)
        refs = read_embeddings(config.reference_images)
        built = dict_mod.build_dictionary(text, refs, taxonomy)
        dict_mod.save_dictionary(built, out / "dictionary.case", out / "dictionary.json")

        stage = "annotate"
        images = read_embeddings(config.images)
        manifest = read_manifest(config.manifest)
        annotated = dict_mod.annotate_dataset(built, images, manifest)
        dict_mod.write_annotations(annotated, out / "annotations.jsonl")

        stage = "cas"
        table = cas_mod.build_frequency_table(annotated, scope=config.scope)
        scores = cas_mod.cas_of(annotated, table)
        statistics = cas_mod.cas_statistics(scores)
        cas_mod.write_cas_scores(scores, out / "cas.jsonl")
        cas_mod.write_statistics(
            statistics, out / "stats.json", taxonomy_fingerprint=fingerprint
        )

        stage = "weights"
        schedule = sampling.compute_schedule(
            scores, power=config.power, seed=config.seed
        )
        sampling.save_schedule(schedule, out / "schedule.json")

        stage = "sample"
        count = config.sample_count if config.sample_count is not None else len(scores)
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise ValidationError(f"sample_count must be a positive integer, got {count!r}")
        indices = sampling.draw(schedule, count)
        sampled_ids = [schedule.image_ids[k] for k in indices]
        payload = "\n".join(sampled_ids)
        atomic_write_text(out / "samples.txt", payload + "\n" if payload else payload)
        score_of = {score.image_id: score for score in scores}
        sampled_stats = cas_mod.cas_statistics([score_of[i] for i in sampled_ids])
        cas_mod.write_statistics(
            sampled_stats, out / "sampled_stats.json", taxonomy_fingerprint=fingerprint
        )

        stage = "augment"
        augment_args = argparse.Namespace(
            batch=config.batch,
            method=config.method,
            alpha=config.alpha,
            decay=config.decay,
            image_root=config.image_root,
            pair_offset=config.pair_offset,
        )
        manifest_dir = Path(config.manifest).resolve().parent
        _run_augment_batch(schedule, manifest, manifest_dir, augment_args, out, config.seed)

        stage = "report"
        distribution = report_mod.attribute_distribution(annotated, scope=config.scope)
        report_mod.write_report(
            out / "distribution.json", "json", report_mod.DISTRIBUTION_COLUMNS, distribution
        )
        partition = report_mod.partition_by_cas(scores)
        report_mod.write_report(
            out / "partition.json", "json",
            report_mod.PARTITION_COLUMNS, report_mod.partition_rows(partition, scores),
        )
        report_mod.write_report(
            out / "bins.json", "json",
            report_mod.BINNING_COLUMNS, report_mod.binning_rows(report_mod.bin_cas(scores)),
        )
        record = report_mod.compare_cas(statistics, sampled_stats, fingerprint, fingerprint)
        report_mod.write_report(
            out / "compare.json", "json",
            report_mod.COMPARE_COLUMNS, report_mod.compare_rows(record),
        )

        stage = "summary"
        summary = {
            "images": len(scores),
            "taxonomy_fingerprint": fingerprint,
            "cas_before": {"mean": statistics.mean, "std": statistics.std, "n": statistics.n},
            "cas_after": {
                "mean": sampled_stats.mean, "std": sampled_stats.std, "n": sampled_stats.n,
            },
            "delta": {
                "mean": sampled_stats.mean - statistics.mean,
                "std": sampled_stats.std - statistics.std,
            },
            "artifacts": [
                "dictionary.case", "dictionary.json", "annotations.jsonl",
                "cas.jsonl", "stats.json", "schedule.json", "samples.txt",
                "sampled_stats.json", "mixes", "plan.jsonl", "distribution.json",
                "partition.json", "bins.json", "compare.json", "summary.json",
            ],
        }
        atomic_write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    except CliError as exc:
        exc.stage = exc.stage or stage
        raise
    except Exception as exc:
        raise _wrap_error(exc, stage) from exc
    print(
        f"pipeline complete: {len(scores)} images, "
        f"std {statistics.std:.4f} -> {sampled_stats.std:.4f} (sampled) in {out}"
    )
    return EXIT_OK


# ---------------------------------------------------------------- dispatcher

def _wrap_error(exc, stage=None):
    if isinstance(exc, CliError):
        return exc
    name = type(exc).__name__
    if isinstance(exc, (FileNotFoundError, IsADirectoryError, PermissionError, OSError)) and not isinstance(exc, CasToolkitError):
        return CliError(EXIT_IO, "io", str(exc), stage, original_type=name)
    if isinstance(exc, (CasToolkitError, ValueError)):
        return CliError(EXIT_INVALID, "validation", str(exc), stage, original_type=name)
    raise exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cas-toolkit",
        description="Attribute-imbalance analysis and scarcity-weighted augmentation sampling.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser(
        "build-dict", help="match attribute prompts to reference embeddings",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--taxonomy", help="taxonomy JSON (default: built-in taxonomy)")
    p.add_argument("--text-embeddings", required=True, help="CASE file of prompt embeddings")
    p.add_argument("--reference-images", required=True, help="CASE file of reference image embeddings")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_build_dict)

    p = sub.add_parser(
        "annotate", help="assign attributes to image embeddings",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--dictionary", required=True, help="dictionary keys CASE file")
    p.add_argument("--sidecar", help="dictionary sidecar JSON (default: keys path with .json)")
    p.add_argument("--images", required=True, help="CASE file of image embeddings")
    p.add_argument("--manifest", required=True, help="dataset manifest JSONL")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_annotate)

    p = sub.add_parser(
        "cas", help="compute scarcity scores from annotations",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--annotations", required=True, help="annotations JSONL")
    p.add_argument(
        "--scope", choices=[cas_mod.SCOPE_PER_CLASS, cas_mod.SCOPE_GLOBAL],
        default=cas_mod.SCOPE_PER_CLASS,
        help="frequency scope (default: per-class)",
    )
    p.add_argument("--taxonomy", help="taxonomy JSON; stamps its fingerprint into stats.json")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_cas)

    p = sub.add_parser(
        "weights", help="build a power-transformed sampling schedule",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--cas", required=True, help="CAS scores JSONL")
    p.add_argument("--power", type=float, default=sampling.DEFAULT_POWER,
                   help="power b applied to CAS (default: 1.2)")
    p.add_argument("--seed", type=_parse_seed, default=0, help="schedule seed (default: 0)")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_weights)

    p = sub.add_parser(
        "sample", help="draw from a schedule with replacement",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--schedule", required=True, help="schedule JSON")
    p.add_argument("--count", type=int, required=True, help="number of draws")
    p.add_argument("--seed", type=_parse_seed, help="override the schedule seed")
    p.add_argument("--emit", choices=["ids", "indices"], default="ids",
                   help="write image ids or row indices (default: ids)")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser(
        "augment", help="draw a batch, pair it, and write mixed images",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--schedule", required=True, help="schedule JSON")
    p.add_argument("--manifest", required=True, help="dataset manifest JSONL")
    p.add_argument("--image-root", help="base directory for manifest source paths "
                                        "(default: the manifest's directory)")
    p.add_argument("--method", choices=list(aug.METHODS), default=aug.METHOD_CUTMIX,
                   help="mask method (default: cutmix)")
    p.add_argument("--batch", type=int, default=16, help="batch size (default: 16)")
    p.add_argument("--alpha", type=float, default=aug.DEFAULT_ALPHA,
                   help="Beta(alpha, alpha) mixing parameter (default: 0.2)")
    p.add_argument("--decay", type=float, default=aug.DEFAULT_DECAY,
                   help="fmix spectrum decay (default: 3.0)")
    p.add_argument("--pair-offset", type=int,
                   help="pair k with (k + offset) mod batch (default: batch // 2)")
    p.add_argument("--seed", type=_parse_seed, help="override the schedule seed")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_augment)

    p = sub.add_parser(
        "report", help="emit distribution, bins, partition, or compare reports",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--kind", choices=["distribution", "bins", "partition", "compare"],
                   required=True)
    p.add_argument("--annotations", help="annotations JSONL (distribution)")
    p.add_argument("--cas", help="CAS scores JSONL (bins, partition)")
    p.add_argument("--before", help="statistics JSON (compare)")
    p.add_argument("--after", help="statistics JSON (compare)")
    p.add_argument(
        "--scope", choices=[cas_mod.SCOPE_PER_CLASS, cas_mod.SCOPE_GLOBAL],
        default=cas_mod.SCOPE_PER_CLASS,
        help="distribution scope (default: per-class)",
    )
    p.add_argument("--per-class", action="store_true",
                   help="bins: bin each class separately instead of dataset-wide")
    p.add_argument("--format", choices=["json", "csv"], default="json",
                   help="output format (default: json)")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser(
        "sweep", help="write one schedule per power on a start:stop:step grid",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--cas", required=True, help="CAS scores JSONL")
    p.add_argument("--b", required=True, help="power grid, e.g. 0.5:1.5:0.1 (inclusive)")
    p.add_argument("--seed", type=_parse_seed, default=0, help="seed for every schedule")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser(
        "pipeline", help="run build-dict through report in one invocation",
        epilog=EPILOG + "\nconfig precedence: flags > --config JSON > defaults\n",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", help="JSON config file with pipeline keys")
    p.add_argument("--taxonomy", help="taxonomy JSON (default: built-in taxonomy)")
    p.add_argument("--text-embeddings", help="CASE file of prompt embeddings")
    p.add_argument("--reference-images", help="CASE file of reference image embeddings")
    p.add_argument("--images", help="CASE file of dataset image embeddings")
    p.add_argument("--manifest", help="dataset manifest JSONL")
    p.add_argument("--image-root", help="base directory for manifest source paths")
    p.add_argument("--scope", choices=[cas_mod.SCOPE_PER_CLASS, cas_mod.SCOPE_GLOBAL])
    p.add_argument("--power", type=float, help="sampling power b (default: 1.2)")
    p.add_argument("--alpha", type=float, help="Beta mixing parameter (default: 0.2)")
    p.add_argument("--decay", type=float, help="fmix spectrum decay (default: 3.0)")
    p.add_argument("--method", choices=list(aug.METHODS), help="mask method (default: cutmix)")
    p.add_argument("--batch", type=int, help="augmentation batch size (default: 16)")
    p.add_argument("--sample-count", type=int,
                   help="resample size for the compare report (default: dataset size)")
    p.add_argument("--pair-offset", type=int, help="pairing offset (default: batch // 2)")
    p.add_argument("--seed", type=_parse_seed, help="master seed (default: 0)")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(handler=_cmd_pipeline)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        try:
            error = _wrap_error(exc)
        except Exception:
            raise exc
        payload = {"error": error.kind, "type": error.original_type, "message": str(exc)}
        if error.stage is not None:
            payload["stage"] = error.stage
        print(json.dumps(payload), file=sys.stderr)
        return error.code


if __name__ == "__main__":
    sys.exit(main())
