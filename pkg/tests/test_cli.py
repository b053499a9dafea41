"""CLI behavior: stage outputs, exit codes, error payloads, determinism."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from cas_toolkit import cli, sampling, store
from cas_toolkit.cas import read_cas_scores, read_statistics
from cas_toolkit.dictionary import load_dictionary, read_annotations


def run(args, capsys):
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def stderr_payload(err):
    lines = [line for line in err.strip().splitlines() if line]
    assert lines, "expected a JSON error line on stderr"
    return json.loads(lines[-1])


@pytest.fixture(scope="module")
def staged(fixture200_dir, tmp_path_factory):
    """Run the staged flow once; later tests reuse its outputs."""
    out = tmp_path_factory.mktemp("staged")
    base = fixture200_dir
    steps = [
        ["build-dict",
         "--taxonomy", str(base / "taxonomy.json"),
         "--text-embeddings", str(base / "text_embeddings.case"),
         "--reference-images", str(base / "reference_images.case"),
         "--out-dir", str(out)],
        ["annotate",
         "--dictionary", str(out / "dictionary.case"),
         "--images", str(base / "images.case"),
         "--manifest", str(base / "manifest.jsonl"),
         "--out-dir", str(out)],
        ["cas",
         "--annotations", str(out / "annotations.jsonl"),
         "--taxonomy", str(base / "taxonomy.json"),
         "--out-dir", str(out)],
        ["weights",
         "--cas", str(out / "cas.jsonl"),
         "--power", "1.2", "--seed", "7",
         "--out-dir", str(out)],
        ["sample",
         "--schedule", str(out / "schedule.json"),
         "--count", "50",
         "--out-dir", str(out)],
        ["augment",
         "--schedule", str(out / "schedule.json"),
         "--manifest", str(base / "manifest.jsonl"),
         "--batch", "8", "--method", "cutmix",
         "--out-dir", str(out)],
    ]
    for step in steps:
        code = cli.main(step)
        assert code == 0, step[0]
    return out


class TestStages:
    def test_dictionary_outputs(self, staged, fixture200):
        built = load_dictionary(staged / "dictionary.case", staged / "dictionary.json")
        assert built.taxonomy_fingerprint == fixture200.taxonomy.fingerprint()
        assert built.keys.count == 60

    def test_annotations_output(self, staged, fixture200):
        annotated = read_annotations(staged / "annotations.jsonl")
        assert len(annotated) == 200
        for image in annotated:
            assert image.attributes == fixture200.planted[image.image_id]

    def test_cas_outputs(self, staged, fixture200):
        scores = read_cas_scores(staged / "cas.jsonl")
        assert len(scores) == 200
        stats, fingerprint = read_statistics(staged / "stats.json")
        assert stats.n == 200
        assert fingerprint == fixture200.taxonomy.fingerprint()

    def test_schedule_output(self, staged):
        schedule = sampling.load_schedule(staged / "schedule.json")
        assert len(schedule) == 200
        assert schedule.power == 1.2 and schedule.seed == 7

    def test_samples_output(self, staged):
        lines = (staged / "samples.txt").read_text().splitlines()
        assert len(lines) == 50
        schedule = sampling.load_schedule(staged / "schedule.json")
        assert lines == sampling.draw_ids(schedule, 50)

    def test_augment_outputs(self, staged):
        plan_lines = (staged / "plan.jsonl").read_text().splitlines()
        assert len(plan_lines) == 8
        mixes = sorted((staged / "mixes").glob("mix_*.png"))
        assert len(mixes) == 8
        for line in plan_lines:
            row = json.loads(line)
            assert set(row) >= {"pair", "method", "lambda", "lambda_eff", "seed"}
            assert row["method"] == "cutmix"
            assert "box" in row
            assert 0.0 <= row["lambda_eff"] <= 1.0

    def test_sample_emit_indices(self, staged, tmp_path, capsys):
        code, _, _ = run(
            ["sample", "--schedule", str(staged / "schedule.json"),
             "--count", "20", "--emit", "indices", "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        lines = (tmp_path / "samples.txt").read_text().splitlines()
        schedule = sampling.load_schedule(staged / "schedule.json")
        assert [int(line) for line in lines] == sampling.draw(schedule, 20)

    def test_sample_seed_override(self, staged, tmp_path, capsys):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        for out, seed in ((a_dir, "1"), (b_dir, "2")):
            code, _, _ = run(
                ["sample", "--schedule", str(staged / "schedule.json"),
                 "--count", "30", "--seed", seed, "--out-dir", str(out)],
                capsys,
            )
            assert code == 0
        assert (a_dir / "samples.txt").read_text() != (b_dir / "samples.txt").read_text()


class TestReports:
    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_partition(self, staged, tmp_path, capsys, fmt):
        code, _, _ = run(
            ["report", "--kind", "partition", "--cas", str(staged / "cas.jsonl"),
             "--format", fmt, "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        path = tmp_path / f"partition.{fmt}"
        assert path.is_file()
        if fmt == "json":
            rows = json.loads(path.read_text())["rows"]
            assert len(rows) == 200
            assert sum(1 for r in rows if r["subset"] == "high") == 80

    def test_bins_dataset_wide(self, staged, tmp_path, capsys):
        code, _, _ = run(
            ["report", "--kind", "bins", "--cas", str(staged / "cas.jsonl"),
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        rows = json.loads((tmp_path / "bins.json").read_text())["rows"]
        assert len(rows) == 10
        assert sum(row["count"] for row in rows) == 200

    def test_bins_per_class(self, staged, tmp_path, capsys):
        code, _, _ = run(
            ["report", "--kind", "bins", "--cas", str(staged / "cas.jsonl"),
             "--per-class", "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        rows = json.loads((tmp_path / "bins.json").read_text())["rows"]
        assert len(rows) == 50  # 5 classes x 10 bins
        assert {row["class"] for row in rows} == {f"class_{k}" for k in range(5)}

    def test_distribution(self, staged, tmp_path, capsys):
        code, _, _ = run(
            ["report", "--kind", "distribution",
             "--annotations", str(staged / "annotations.jsonl"),
             "--format", "csv", "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        lines = (tmp_path / "distribution.csv").read_text().splitlines()
        assert lines[0] == "scope,primary,secondary,count"

    def test_compare(self, staged, tmp_path, capsys):
        code, _, _ = run(
            ["report", "--kind", "compare",
             "--before", str(staged / "stats.json"),
             "--after", str(staged / "stats.json"),
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        rows = json.loads((tmp_path / "compare.json").read_text())["rows"]
        assert [row["which"] for row in rows] == ["before", "after", "delta"]
        assert rows[2]["mean"] == 0.0

    def test_missing_kind_flag_is_usage_error(self, staged, tmp_path, capsys):
        code, _, err = run(
            ["report", "--kind", "partition", "--out-dir", str(tmp_path)], capsys
        )
        assert code == 2
        assert stderr_payload(err)["error"] == "usage"


class TestSweep:
    def test_eleven_files(self, staged, tmp_path, capsys):
        code, out, _ = run(
            ["sweep", "--cas", str(staged / "cas.jsonl"), "--b", "0.5:1.5:0.1",
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        files = sorted(tmp_path.glob("schedule_b*.json"))
        assert len(files) == 11
        names = {path.name for path in files}
        assert "schedule_b0.5.json" in names
        assert "schedule_b1.5.json" in names
        # exact decimal grid: no 1.0000000000000002 artifacts
        assert "schedule_b1.json" in names
        for path in files:
            sampling.load_schedule(path)

    def test_single_point_grid(self, staged, tmp_path, capsys):
        code, _, _ = run(
            ["sweep", "--cas", str(staged / "cas.jsonl"), "--b", "1.2:1.2:0.1",
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        assert [path.name for path in sorted(tmp_path.glob("*.json"))] == [
            "schedule_b1.2.json"
        ]

    def test_bad_grid_is_validation_error(self, staged, tmp_path, capsys):
        code, _, err = run(
            ["sweep", "--cas", str(staged / "cas.jsonl"), "--b", "1.5:0.5:0.1",
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 4
        assert stderr_payload(err)["error"] == "validation"

    def test_nonpositive_power_grid_rejected(self, staged, tmp_path, capsys):
        code, _, err = run(
            ["sweep", "--cas", str(staged / "cas.jsonl"), "--b", "0:1:0.5",
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 4


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_missing_required_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["weights"])
        assert excinfo.value.code == 2

    def test_missing_input_file(self, tmp_path, capsys):
        code, _, err = run(
            ["weights", "--cas", str(tmp_path / "absent.jsonl"),
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 3
        payload = stderr_payload(err)
        assert payload["error"] == "io"
        assert "absent.jsonl" in payload["message"]

    def test_malformed_input_file(self, tmp_path, capsys):
        bad = tmp_path / "cas.jsonl"
        bad.write_text("not json at all\n")
        code, _, err = run(
            ["weights", "--cas", str(bad), "--out-dir", str(tmp_path)], capsys
        )
        assert code == 4
        payload = stderr_payload(err)
        assert payload["error"] == "validation"
        assert payload["type"]

    def test_invalid_parameter_value(self, staged, tmp_path, capsys):
        code, _, err = run(
            ["weights", "--cas", str(staged / "cas.jsonl"), "--power", "0",
             "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 4
        assert "power" in stderr_payload(err)["message"]

    def test_failure_leaves_no_partial_outputs(self, tmp_path, capsys):
        bad = tmp_path / "annotations.jsonl"
        bad.write_text('{"image_id": "a"}\n')
        out = tmp_path / "out"
        code, _, _ = run(
            ["cas", "--annotations", str(bad), "--out-dir", str(out)], capsys
        )
        assert code == 4
        assert not (out / "cas.jsonl").exists()
        assert not (out / "stats.json").exists()

    def test_corrupt_case_file(self, tmp_path, capsys):
        bad = tmp_path / "text.case"
        bad.write_bytes(b"CASEgarbage")
        code, _, err = run(
            ["build-dict", "--text-embeddings", str(bad),
             "--reference-images", str(bad), "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 4
        assert stderr_payload(err)["error"] == "validation"

    def test_help_documents_exit_codes(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["--help"])
        assert excinfo.value.code == 0
        out = capsys.readouterr().out
        for marker in ("exit codes", "0", "2", "3", "4"):
            assert marker in out


class TestPipeline:
    def base_args(self, fixture200_dir, out):
        base = fixture200_dir
        return [
            "pipeline",
            "--taxonomy", str(base / "taxonomy.json"),
            "--text-embeddings", str(base / "text_embeddings.case"),
            "--reference-images", str(base / "reference_images.case"),
            "--images", str(base / "images.case"),
            "--manifest", str(base / "manifest.jsonl"),
            "--batch", "6",
            "--sample-count", "80",
            "--seed", "3",
            "--out-dir", str(out),
        ]

    def test_end_to_end(self, fixture200_dir, tmp_path, capsys):
        out = tmp_path / "run"
        code, stdout, _ = run(self.base_args(fixture200_dir, out), capsys)
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["images"] == 200
        for name in summary["artifacts"]:
            assert (out / name).exists(), name
        assert "pipeline complete" in stdout

    def test_rerun_is_byte_identical(self, fixture200_dir, tmp_path, capsys):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run(self.base_args(fixture200_dir, out_a), capsys)[0] == 0
        assert run(self.base_args(fixture200_dir, out_b), capsys)[0] == 0
        files_a = sorted(
            path.relative_to(out_a) for path in out_a.rglob("*") if path.is_file()
        )
        files_b = sorted(
            path.relative_to(out_b) for path in out_b.rglob("*") if path.is_file()
        )
        assert files_a == files_b
        for rel in files_a:
            assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes(), rel

    def test_config_file_and_flag_precedence(self, fixture200_dir, tmp_path, capsys):
        base = fixture200_dir
        config = {
            "taxonomy": str(base / "taxonomy.json"),
            "text_embeddings": str(base / "text_embeddings.case"),
            "reference_images": str(base / "reference_images.case"),
            "images": str(base / "images.case"),
            "manifest": str(base / "manifest.jsonl"),
            "power": 0.7,
            "batch": 4,
            "seed": 9,
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        out = tmp_path / "out"
        # --power on the command line beats the config file's 0.7
        code, _, _ = run(
            ["pipeline", "--config", str(config_path), "--power", "2.0",
             "--sample-count", "40", "--out-dir", str(out)],
            capsys,
        )
        assert code == 0
        schedule = sampling.load_schedule(out / "schedule.json")
        assert schedule.power == 2.0
        assert schedule.seed == 9  # config beats the default 0
        plan_lines = (out / "plan.jsonl").read_text().splitlines()
        assert len(plan_lines) == 4

    def test_missing_required_inputs_is_usage_error(self, tmp_path, capsys):
        code, _, err = run(["pipeline", "--out-dir", str(tmp_path)], capsys)
        assert code == 2
        payload = stderr_payload(err)
        assert payload["error"] == "usage"
        assert "--text-embeddings" in payload["message"]

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text('{"surprise": 1}')
        code, _, err = run(
            ["pipeline", "--config", str(config_path), "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 4
        assert "surprise" in stderr_payload(err)["message"]

    def test_stage_name_in_errors(self, fixture200_dir, tmp_path, capsys):
        # corrupt images file: the failure must name the annotate stage
        base = fixture200_dir
        bad_images = tmp_path / "images.case"
        bad_images.write_bytes((base / "images.case").read_bytes()[:40])
        out = tmp_path / "out"
        args = [
            "pipeline",
            "--taxonomy", str(base / "taxonomy.json"),
            "--text-embeddings", str(base / "text_embeddings.case"),
            "--reference-images", str(base / "reference_images.case"),
            "--images", str(bad_images),
            "--manifest", str(base / "manifest.jsonl"),
            "--out-dir", str(out),
        ]
        code, _, err = run(args, capsys)
        assert code == 4
        assert stderr_payload(err)["stage"] == "annotate"

    def test_outputs_confined_to_out_dir(self, fixture200_dir, tmp_path, capsys):
        out = tmp_path / "only_here"
        before = set(Path(tmp_path).iterdir())
        code, _, _ = run(self.base_args(fixture200_dir, out), capsys)
        assert code == 0
        after = set(Path(tmp_path).iterdir())
        assert after - before == {out}


class TestAugmentOptions:
    def test_fmix_plan_has_no_box(self, staged, fixture200_dir, tmp_path, capsys):
        code, _, _ = run(
            ["augment", "--schedule", str(staged / "schedule.json"),
             "--manifest", str(fixture200_dir / "manifest.jsonl"),
             "--batch", "4", "--method", "fmix", "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 0
        rows = [json.loads(line) for line in (tmp_path / "plan.jsonl").read_text().splitlines()]
        assert all("box" not in row for row in rows)
        assert all(row["method"] == "fmix" for row in rows)

    def test_pair_offset_flag(self, staged, fixture200_dir, tmp_path, capsys):
        code, _, err = run(
            ["augment", "--schedule", str(staged / "schedule.json"),
             "--manifest", str(fixture200_dir / "manifest.jsonl"),
             "--batch", "4", "--pair-offset", "9", "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 4
        assert "offset" in stderr_payload(err)["message"]

    def test_batch_of_one_rejected(self, staged, fixture200_dir, tmp_path, capsys):
        code, _, err = run(
            ["augment", "--schedule", str(staged / "schedule.json"),
             "--manifest", str(fixture200_dir / "manifest.jsonl"),
             "--batch", "1", "--out-dir", str(tmp_path)],
            capsys,
        )
        assert code == 4

    def test_missing_image_file(self, staged, fixture200_dir, tmp_path, capsys):
        # point image-root somewhere empty: the manifest paths cannot resolve
        code, _, err = run(
            ["augment", "--schedule", str(staged / "schedule.json"),
             "--manifest", str(fixture200_dir / "manifest.jsonl"),
             "--image-root", str(tmp_path), "--batch", "4",
             "--out-dir", str(tmp_path / "out")],
            capsys,
        )
        assert code == 3
        assert stderr_payload(err)["error"] == "io"


def test_seed_parses_hex(staged, tmp_path, capsys):
    code = cli.main(
        ["sample", "--schedule", str(staged / "schedule.json"),
         "--count", "5", "--seed", "0x10", "--out-dir", str(tmp_path / "hex")]
    )
    capsys.readouterr()
    assert code == 0
    code = cli.main(
        ["sample", "--schedule", str(staged / "schedule.json"),
         "--count", "5", "--seed", "16", "--out-dir", str(tmp_path / "dec")]
    )
    capsys.readouterr()
    assert code == 0
    assert (tmp_path / "hex" / "samples.txt").read_text() == (
        tmp_path / "dec" / "samples.txt"
    ).read_text()


def test_console_script_entry_point():
    import importlib.metadata

    entry_points = importlib.metadata.entry_points()
    scripts = entry_points.select(group="console_scripts", name="cas-toolkit")
    assert [ep.value for ep in scripts] == ["cas_toolkit.cli:main"]
