import pytest

from housemove import cli, storage
from housemove.verify import TestReport

SMALL = """
[corridor]
lower = constant 0
upper = constant 1

[grid]
n_steps = 16

[schedule]
levels = 2

[sampling]
paths = 60

[density]
paths = 80
nodes = 6
replicates = 2

[run]
seed = 5
output = {out}
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL.format(out=tmp_path / "out"))
    return path


def _report(name, passed, asserted=True):
    return TestReport(name, {"stat": 0.5}, {"limit": 0.1}, passed, {"paths": 10}, seed=5, asserted=asserted)


def test_parser_requires_a_command():
    parser = cli.build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args([])
    args = parser.parse_args(["density", "--config", "x.ini", "--target", "q_up", "--t", "0.5"])
    assert (args.command, args.target, args.t) == ("density", "q_up", 0.5)
    with pytest.raises(SystemExit):
        parser.parse_args(["density", "--config", "x.ini", "--target", "nope"])


def test_sample_writes_paths_weights_and_diagnostics(config, tmp_path, capsys):
    assert cli.main(["sample", "--config", str(config)]) == cli.EXIT_OK
    out = tmp_path / "out"
    paths = storage.read_csv(out / "paths.csv")
    weights = storage.read_csv(out / "weights.csv")
    assert set(paths.columns) == {"path_id", "t", "value", "log_weight"}
    assert len(paths) == len(weights) * 17
    assert set(weights.columns) >= {"path_id", "log_weight"}
    assert storage.read_header(out / "weights.csv")["seed"] == "5"
    assert "config_hash" in (out / "diagnostics.txt").read_text()
    assert "house_moving paths" in capsys.readouterr().out


def test_seed_override_reaches_the_outputs(config, tmp_path):
    assert cli.main(["sample", "--config", str(config), "--seed", "9"]) == cli.EXIT_OK
    assert storage.read_header(tmp_path / "out" / "paths.csv")["seed"] == "9"


def test_density_writes_estimate(config, tmp_path):
    assert cli.main(["density", "--config", str(config), "--target", "q_up", "--t", "0.5"]) == cli.EXIT_OK
    frame = storage.read_csv(tmp_path / "out" / "density_q_up.csv")
    assert list(frame.columns) == ["y", "value", "std_err"]
    assert len(frame) == 6
    assert (frame["value"] >= 0.0).all()


def test_density_p_needs_a_transition(config):
    assert cli.main(["density", "--config", str(config), "--target", "p"]) == cli.EXIT_CONFIG


def test_transform_writes_lamperti_table(tmp_path, capsys):
    path = tmp_path / "sde.ini"
    path.write_text(
        f"[corridor]\nlower = constant 0\nupper = constant 1\n\n"
        f"[sde]\nnu = 0 -1\nsigma = 2\nrange = -1 1\n\n[run]\noutput = {tmp_path}\n"
    )
    assert cli.main(["transform", "--config", str(path)]) == cli.EXIT_OK
    frame = storage.read_csv(tmp_path / "lamperti.csv")
    assert frame["L"].iloc[-1] == pytest.approx(0.5)
    assert frame["mu"].iloc[-1] == pytest.approx(-0.5)
    assert "max |L^-1(L(y)) - y|" in capsys.readouterr().out


def test_transform_without_sde_is_a_config_error(config):
    assert cli.main(["transform", "--config", str(config)]) == cli.EXIT_CONFIG


@pytest.mark.parametrize(
    "text",
    [
        "[corridor]\nlower = constant 0\n",
        "[corridor]\nlower = constant 0\nupper = constant 1\n[grid]\nn_steps = 15\n",
        "[corridor]\nlower = constant 0\nupper = constant 1\n[sde]\nsigma = 0 1\nrange = -1 1\n",
    ],
)
def test_bad_configs_exit_with_config_code(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    assert cli.main(["sample", "--config", str(path)]) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(["sample", "--config", str(tmp_path / "none.ini")]) == cli.EXIT_CONFIG


def test_unknown_suite_is_a_config_error(config):
    assert cli.main(["verify", "--config", str(config), "--suite", "bogus"]) == cli.EXIT_CONFIG


def test_verify_exit_status_follows_asserted_failures(config, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_suite", lambda builder, names, options: [_report("a", True), _report("b", False, asserted=False)])
    assert cli.main(["verify", "--config", str(config), "--suite", "reversal"]) == cli.EXIT_OK
    assert cli.main(["report", str(tmp_path / "out")]) == cli.EXIT_OK

    monkeypatch.setattr(cli, "run_suite", lambda builder, names, options: [_report("a", True), _report("b", False)])
    assert cli.main(["verify", "--config", str(config), "--suite", "reversal"]) == cli.EXIT_FAILURE
    assert "failed: b" in capsys.readouterr().out
    assert cli.main(["report", str(tmp_path / "out")]) == cli.EXIT_FAILURE
    frame = storage.read_csv(tmp_path / "out" / "report.csv")
    assert list(frame["verdict"]) == ["pass", "fail"]


def test_report_without_results(tmp_path):
    assert cli.main(["report", str(tmp_path)]) == cli.EXIT_CONFIG


def test_unexpected_errors_exit_with_internal_code(config, monkeypatch):
    def boom(cfg):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "cmd_sample", boom)
    assert cli.main(["sample", "--config", str(config)]) == cli.EXIT_INTERNAL
