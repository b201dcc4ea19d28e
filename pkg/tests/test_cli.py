"""Command-line surface: formats, exit codes, determinism, schema."""

import csv
import io
import json

import pytest
import yaml
from click.testing import CliRunner

from trainlim.cli import main
from trainlim.hwspec import cluster_to_doc, preset, preset_names, save_cluster_spec
from trainlim.records import CSV_COLUMNS

GOLDEN_SIM = ["simulate", "--preset", "dgx-a100", "--d-model", "1024",
              "--d-ff", "4096", "--layers", "4", "--batch", "4096",
              "--dp", "2", "--pp", "2", "--microbatches", "4",
              "--schedule", "naive"]


def run(*args, code=0):
    result = CliRunner().invoke(main, list(args))
    assert result.exit_code == code, result.output
    return result


def run_json(*args):
    return json.loads(run(*args, "--format", "structured").stdout)


def test_presets_lists_all():
    out = run("presets").stdout.split()
    assert out == list(preset_names())
    assert "dgx-h100" in out


def test_presets_dumps_yaml_body():
    doc = yaml.safe_load(run("presets", "dgx-a100").stdout)
    assert doc == cluster_to_doc(preset("dgx-a100"))


def test_closed_form_human_row():
    out = run("closed-form", "--preset", "dgx-h100").stdout
    assert "26400" in out
    assert "591" in out
    assert "1.917e+28" in out


def test_closed_form_sparsity_divides_compute():
    dense = run_json("closed-form", "--preset", "dgx-h100")
    moe = run_json("closed-form", "--preset", "dgx-h100", "--sparsity", "4")
    assert moe["t_critical_bandwidth_flop"] == pytest.approx(
        dense["t_critical_bandwidth_flop"] / 4)
    assert moe["t_limit_flop"] == pytest.approx(dense["t_limit_flop"] / 4)


def test_closed_form_alpha_flag():
    adj = run_json("closed-form", "--preset", "dgx-h100", "--alpha", "0.2")
    assert adj["t_critical_bandwidth_flop"] == pytest.approx(3.065e31, rel=0.005)


def test_closed_form_spec_file_matches_preset(tmp_path):
    path = tmp_path / "h100.yaml"
    save_cluster_spec(preset("dgx-h100"), path)
    a = run("closed-form", "--preset", "dgx-h100", "--format", "structured")
    b = run("closed-form", "--spec", str(path), "--format", "structured")
    assert a.stdout == b.stdout


def test_simulate_golden_case():
    rec = run_json(*GOLDEN_SIM)["record"]
    assert rec["n_gpu"] == 4
    assert rec["t_step_s"] == pytest.approx(0.0011410804669439998, rel=1e-12)
    assert rec["t_matmul_s"] == pytest.approx(0.0009056643735552, rel=1e-12)
    assert rec["bubble_fraction"] == pytest.approx(0.2)
    assert rec["schedule"] == "naive"


def test_simulate_single_gpu_all_ones():
    rec = run_json("simulate", "--preset", "dgx-a100", "--d-model", "512",
                   "--d-ff", "2048", "--layers", "2", "--batch", "1024")["record"]
    assert rec["n_gpu"] == 1
    assert rec["log_fractions"] == {k: 0.0 for k in
                                    ("dp", "tp_ff", "tp_model", "pp", "ep")}


def test_searched_never_slower_than_pinned():
    pinned = run_json(*GOLDEN_SIM)["record"]
    searched = run_json("search", "--preset", "dgx-a100", "--d-model", "1024",
                        "--d-ff", "4096", "--layers", "4", "--batch", "4096",
                        "--n-gpu", "4")["record"]
    assert searched["t_step_s"] <= pinned["t_step_s"]


def test_search_min_cluster_mode():
    rec = run_json("search", "--preset", "h100-infinite-network-ll",
                   "--d-model", "1024", "--d-ff", "4096", "--layers", "4",
                   "--batch", "4096", "--duration", "1e6")["record"]
    assert rec["n_gpu"] >= 1
    assert rec["status"] == "ok"


def test_search_min_cluster_infeasible_exits_3():
    result = CliRunner().invoke(main, [
        "search", "--preset", "dgx1-v100", "--t-flop", "3e31",
        "--duration", "7889400"])
    assert result.exit_code == 3
    assert "infeasible" in result.stderr


def test_infeasible_pinned_config_exits_3():
    result = CliRunner().invoke(main, [
        "simulate", "--preset", "dgx-a100", "--d-model", "1024", "--d-ff",
        "4096", "--layers", "4", "--batch", "4096", "--dp", "3"])
    assert result.exit_code == 3
    assert "nanobatch-integral" in result.stderr


def test_usage_errors_exit_2():
    assert CliRunner().invoke(main, ["closed-form"]).exit_code == 2
    assert CliRunner().invoke(
        main, ["closed-form", "--preset", "nosuch"]).exit_code == 2
    assert CliRunner().invoke(
        main, ["sweep", "--preset", "dgx-h100", "--t-min", "1e27"]).exit_code == 2
    assert CliRunner().invoke(main, [
        "simulate", "--preset", "dgx-a100", "--d-model", "512"]).exit_code == 2


SWEEP_ARGS = ["sweep", "--preset", "dgx-h100", "--t-min", "1e27",
              "--t-max", "1e28", "--per-decade", "2"]


def test_sweep_csv_schema_and_rows():
    result = run(*SWEEP_ARGS, "--format", "csv")
    rows = list(csv.reader(io.StringIO(result.stdout)))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + 3  # header + 1e27, 10^27.5, 1e28
    for row in rows[1:]:
        assert len(row) == len(CSV_COLUMNS)
        assert float(row[0]) > 0
    assert "linear-scaling endpoint" in result.stderr


def test_sweep_failure_rows_keep_t_and_blank_the_rest():
    result = run("sweep", "--preset", "dgx-h100", "--t-min", "1e31",
                 "--t-max", "1e31", "--per-decade", "1", "--format", "csv")
    rows = list(csv.reader(io.StringIO(result.stdout)))
    assert len(rows) == 2
    assert float(rows[1][0]) == 1e31
    assert all(cell == "" for cell in rows[1][1:])


def test_sweep_structured_fractions_sum_to_one():
    doc = run_json(*SWEEP_ARGS)
    assert doc["schema_version"] == "trainlim-1"
    assert doc["kind"] == "sweep"
    assert len(doc["records"]) == 3
    for rec in doc["records"]:
        assert rec["status"] == "ok"
        fracs = rec["log_fractions"]
        if rec["n_gpu"] > 1:
            assert sum(fracs.values()) == pytest.approx(1.0, abs=1e-9)
        else:
            assert all(v == 0.0 for v in fracs.values())


def test_sweep_byte_determinism():
    a = run(*SWEEP_ARGS, "--format", "structured").stdout
    b = run(*SWEEP_ARGS, "--format", "structured").stdout
    assert a == b
    assert json.loads(a)  # well-formed


def test_single_point_sweep_equals_search():
    swept = run_json("sweep", "--preset", "dgx-h100", "--t-min", "3e27",
                     "--t-max", "3e27", "--per-decade", "7")["records"][0]
    searched = run_json("search", "--preset", "dgx-h100",
                        "--t-flop", "3e27")["record"]
    for key, value in searched.items():
        if key in ("message", "t_flop"):
            continue
        assert swept[key] == value, key
    assert swept["t_flop"] == 3e27  # the requested budget
    # search reports the synthesized shape's realized compute, within the
    # shape solver's snap tolerance of the request
    assert searched["t_flop"] == pytest.approx(3e27, rel=0.05)


def test_endpoint_detection_line():
    result = run("sweep", "--preset", "dgx-h100", "--t-min", "1e28",
                 "--t-max", "1e29", "--per-decade", "2")
    assert "linear-scaling endpoint: T=" in result.stdout
