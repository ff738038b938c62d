import io

import numpy as np
import pytest

from src.data.features import load_features
from src.entities.model import build_model
from src.ui.command_manager import CommandManager, build_parser
from src.utils.checkpoint import load_checkpoint
from src.utils.constants import BANK_SIZES
from tests.conftest import tiny_config


def run(*argv):
    out = io.StringIO()
    code = CommandManager(stdout=out).run([str(a) for a in argv])
    return code, out.getvalue()


@pytest.fixture
def workspace(tmp_path):
    """A tiny configuration file and a feature file generated from it"""
    config_path = tmp_path / "tiny.cfg"
    tiny_config().save(config_path)
    data = tmp_path / "data" / "tiny.urmf"
    code, _ = run("gen-data", "--config", config_path, "--out", data)
    assert code == 0
    return tmp_path, config_path, data


def _train(workspace, strategy, out_name, *extra):
    root, config_path, data = workspace
    out = root / out_name
    code, text = run("train", "--config", config_path, "--data", data, "--strategy", strategy,
                     "--out", out, *extra)
    assert code == 0, text
    return out


class TestGenData:
    def test_writes_a_readable_file(self, workspace):
        _, _, data = workspace
        segments = load_features(data)
        assert len(segments) == 16
        assert segments[0].frames.shape == (16, 4, 8)

    def test_same_seed_same_bytes(self, workspace):
        root, config_path, data = workspace
        again = root / "again.urmf"
        assert run("gen-data", "--config", config_path, "--out", again)[0] == 0
        assert again.read_bytes() == data.read_bytes()
        assert again.with_suffix(".csv").read_text() == data.with_suffix(".csv").read_text()

    def test_configuration_errors_exit_with_usage(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("model.depth = 3\n", encoding="utf-8")
        assert run("gen-data", "--config", bad, "--out", tmp_path / "x.urmf")[0] == 2
        assert run("gen-data", "--no-such-flag")[0] == 2
        assert run("gen-data", "--seed", -1, "--out", tmp_path / "neg.urmf")[0] == 2
        assert not (tmp_path / "neg.urmf").exists()
        assert run()[0] == 2

    def test_missing_config_file_is_a_runtime_error(self, tmp_path):
        assert run("gen-data", "--config", tmp_path / "absent.cfg")[0] == 1


class TestTrain:
    @pytest.mark.parametrize("strategy", ["implicit", "tb", "ctp"])
    def test_smoke(self, workspace, strategy):
        out = _train(workspace, strategy, f"run_{strategy}")
        assert (out / "checkpoint.urm").exists()
        assert (out / "checkpoint_epoch001.urm").exists()
        assert "Training on 13 segments" in (out / "run.log").read_text()
        assert (out / "report.csv").read_text().startswith("interval,step,metric,value")
        log = (out / "train.log").read_text().splitlines()
        assert log[0].startswith("0,0,")
        assert any(line.startswith("eval,") for line in log)
        checkpoint = load_checkpoint(out / "checkpoint.urm")
        assert checkpoint.config.edges.strategy == strategy
        assert checkpoint.step == 2

    def test_zero_rate_keeps_the_initial_parameters(self, workspace):
        out = _train(workspace, "tb", "zero", "--lr", 0)
        checkpoint = load_checkpoint(out / "checkpoint.urm")
        initial = build_model(checkpoint.config).named_parameters()
        for name, values in checkpoint.parameters.items():
            np.testing.assert_array_equal(values, initial[name].data)

    def test_deterministic_runs_write_identical_checkpoints(self, workspace):
        out = _train(workspace, "ctp", "det", "--deterministic")
        first = (out / "checkpoint.urm").read_bytes()
        _train(workspace, "ctp", "det", "--deterministic")
        assert (out / "checkpoint.urm").read_bytes() == first

    def test_resume_from_a_checkpoint(self, workspace):
        out = _train(workspace, "implicit", "first")
        resumed = _train(workspace, "implicit", "second", "--checkpoint", out / "checkpoint.urm",
                         "--epochs", 2)
        assert load_checkpoint(resumed / "checkpoint.urm").step == 4
        assert (resumed / "checkpoint_epoch002.urm").exists()
        assert not (resumed / "checkpoint_epoch001.urm").exists()
        assert (resumed / "train.log").read_text().startswith("1,2,")

    def test_bad_strategy_is_a_usage_error(self, workspace):
        _, config_path, _ = workspace
        assert run("train", "--config", config_path, "--strategy", "dense")[0] == 2


class TestEval:
    def test_report_is_repeatable(self, workspace):
        out = _train(workspace, "tb", "eval_run")
        checkpoint = out / "checkpoint.urm"
        code, first = run("eval", "--checkpoint", checkpoint, "--deterministic")
        assert code == 0
        _, second = run("eval", "--checkpoint", checkpoint, "--deterministic")
        assert first == second
        rows = [line for line in first.splitlines() if line[:1].isdigit() and "," not in line]
        assert len(rows) == 8
        csv_rows = [line for line in first.splitlines() if line.startswith("1,10,")]
        assert len(csv_rows) == 9

    def test_writes_csv(self, workspace):
        out = _train(workspace, "implicit", "eval_csv")
        report = out / "eval.csv"
        assert run("eval", "--checkpoint", out / "checkpoint.urm", "--out", report)[0] == 0
        lines = report.read_text().splitlines()
        assert lines[0] == "interval,step,metric,value"
        assert lines[-3:] == ["k,,verb,3", "k,,noun,2", "k,,action,5"]

    def test_missing_checkpoint(self, tmp_path):
        assert run("eval", "--checkpoint", tmp_path / "none.urm")[0] == 1


class TestSweep:
    def test_bank_sizes(self, workspace):
        root, config_path, data = workspace
        out = root / "sweep_tb"
        code, text = run("sweep", "--config", config_path, "--data", data, "--bank-sizes", "1,4",
                         "--out", out)
        assert code == 0, text
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "key,value,parameters,steps,final_loss,metric,score"
        rows = [line.split(",") for line in lines[1:]]
        assert [row[:2] for row in rows] == [["edges.bank_size", "1"], ["edges.bank_size", "4"]]
        assert int(rows[1][2]) > int(rows[0][2])
        assert all(row[5] == "action_top5" and 0.0 <= float(row[6]) <= 1.0 for row in rows)
        assert load_checkpoint(out / "bank_size_4.urm").config.edges.bank_size == 4
        assert load_checkpoint(out / "bank_size_1.urm").step == 2
        assert text.splitlines()[0].startswith("bank_size")

    def test_class_token_variants(self, workspace):
        root, config_path, data = workspace
        out = root / "sweep_ctp"
        assert run("sweep", "--config", config_path, "--data", data, "--variants", "global,vna",
                   "--out", out)[0] == 0
        checkpoint = load_checkpoint(out / "ctp_variant_vna.urm")
        assert checkpoint.config.edges.strategy == "ctp"
        assert (out / "ctp_variant_global.urm").exists()

    def test_default_values_cover_the_bank_sizes(self):
        args = build_parser().parse_args(["sweep"])
        assert args.bank_sizes == list(BANK_SIZES)
        assert args.variants is None

    def test_invalid_values_fail_before_training(self, workspace):
        root, config_path, data = workspace
        out = root / "sweep_bad"
        assert run("sweep", "--config", config_path, "--data", data, "--bank-sizes", "4,0",
                   "--out", out)[0] == 2
        assert not (out / "bank_size_4.urm").exists()
        assert run("sweep", "--config", config_path, "--variants", "dense")[0] == 2
        assert run("sweep", "--config", config_path, "--bank-sizes", "x")[0] == 2
        assert run("sweep", "--config", config_path, "--bank-sizes", "4",
                   "--variants", "vn")[0] == 2


class TestGradcheck:
    def test_implicit_passes(self):
        code, text = run("gradcheck", "--strategy", "implicit")
        assert code == 0
        lines = text.splitlines()
        assert lines[0] == "strategy,group,max_rel_error"
        assert any(line.startswith("implicit,cell.msg_block,") for line in lines)
        assert lines[-1].startswith("PASS")

    @pytest.mark.slow
    @pytest.mark.parametrize("strategy", ["tb", "ctp"])
    def test_explicit_strategies_pass(self, strategy):
        code, text = run("gradcheck", "--strategy", strategy)
        assert code == 0
        assert any(line.startswith(f"{strategy},edges.") for line in text.splitlines())


def _minor_ratio(matrix):
    singular = np.linalg.svd(matrix, compute_uv=False)
    return singular[1] / singular[0]


class TestInspect:
    def test_implicit_checkpoint_has_no_edges(self, workspace, capsys):
        out = _train(workspace, "implicit", "insp_implicit")
        code, _ = run("inspect", "--checkpoint", out / "checkpoint.urm")
        assert code == 1
        assert "no explicit edges" in capsys.readouterr().err

    def test_single_template_is_constant(self, workspace):
        root, config_path, data = workspace
        config = tiny_config("tb", **{"edges.bank_size": 1})
        single = root / "single.cfg"
        config.save(single)
        out = root / "insp_single"
        assert run("train", "--config", single, "--data", data, "--out", out)[0] == 0
        dump = root / "dump_single"
        assert run("inspect", "--checkpoint", out / "checkpoint.urm", "--out", dump)[0] == 0
        first = np.loadtxt(dump / "step00_adjacency.csv", delimiter=",")
        assert first.shape == (4, 4)
        for step in range(1, 14):
            np.testing.assert_array_equal(np.loadtxt(dump / f"step{step:02d}_adjacency.csv", delimiter=","),
                                          first)

    def test_template_selector_rows(self, workspace):
        out = _train(workspace, "tb", "insp_tb")
        dump = out / "dump"
        code, text = run("inspect", "--checkpoint", out / "checkpoint.urm", "--out", dump)
        assert code == 0
        selector = np.loadtxt(dump / "step05_selector.csv", delimiter=",")
        assert selector.shape == (4,)
        assert selector.sum() == pytest.approx(1.0, abs=1e-6)
        softmax = np.loadtxt(dump / "step05_adjacency_softmax.csv", delimiter=",")
        np.testing.assert_allclose(softmax.sum(axis=1), 1.0, atol=1e-6)

    def test_class_token_adjacency_is_rank_one(self, workspace):
        out = _train(workspace, "ctp", "insp_ctp")
        dump = out / "dump"
        assert run("inspect", "--checkpoint", out / "checkpoint.urm", "--out", dump,
                   "--segment", "syn-000003")[0] == 0
        for step in (0, 7, 13):
            adjacency = np.loadtxt(dump / f"step{step:02d}_adjacency.csv", delimiter=",")
            assert _minor_ratio(adjacency) < 1e-5
        assert (dump / "step03_token_verb.csv").exists()
        assert (dump / "step03_token_noun.csv").exists()

    def test_unknown_segment(self, workspace):
        out = _train(workspace, "ctp", "insp_missing")
        assert run("inspect", "--checkpoint", out / "checkpoint.urm", "--segment", "nope",
                   "--out", out / "dump")[0] == 1
