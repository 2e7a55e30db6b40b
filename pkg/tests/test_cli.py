import json

import pytest

from navmem.cli import build_parser, config_from_args, main
from navmem.spatial import IOSample, save_ios


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "corpus"
    assert main(["synth", "--out", str(out), "--episodes", "6", "--seed", "1", "--scenes-count", "2"]) == 0
    return out


def run_flags(corpus, *extra):
    return ["--scenes", str(corpus / "scenes"), "--episodes", str(corpus / "episodes.json"),
            "--parallelism", "1", *extra]


def test_eval_oracle(corpus, tmp_path, capsys):
    out = tmp_path / "eval"
    assert main(["eval", *run_flags(corpus, "--planner", "oracle", "--output-dir", str(out))]) == 0
    assert "SR 100.0" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    assert report["count"] == 6 and report["aggregates"]["spl"] == 1.0
    assert len(list((out / "traces").glob("*.jsonl"))) == 6


def test_run_single_episode_prints_trace(corpus, capsys):
    assert main(["run", *run_flags(corpus, "--planner", "oracle", "--episode-id", "ep0001")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert json.loads(lines[0])["episode_id"] == "ep0001"
    assert json.loads(lines[-1])["kind"] == "result"


def test_refine_and_slice(corpus, tmp_path, capsys):
    out = tmp_path / "refine"
    assert main(["refine", *run_flags(corpus, "--planner", "random", "--output-dir", str(out)),
                 "--rounds", "3"]) == 0
    assert capsys.readouterr().out.count("round ") == 3
    assert main(["slice", "--report", str(out / "report_round3.json"), "--min-steps", "0",
                 "--output-dir", str(out)]) == 0
    assert (out / "report_steps_gt0.json").exists()
    assert main(["slice", "--report", str(out / "report_round3.json"), "--min-steps", "1000"]) == 0
    assert "no episodes" in capsys.readouterr().out


def test_replay_and_prune_sim(corpus, tmp_path, capsys):
    out = tmp_path / "eval"
    main(["eval", *run_flags(corpus, "--planner", "random", "--output-dir", str(out), "--stop-weight", "0.05")])
    script = tmp_path / "script.json"
    script.write_text(json.dumps(["stop"]))
    assert main(["eval", *run_flags(corpus, "--planner", "replay", "--script", str(script))]) == 0
    assert "SR 0.0" in capsys.readouterr().out
    trace = next((out / "traces").glob("*.jsonl"))
    scene_id = json.loads(trace.read_text().splitlines()[0])["scene_id"]
    assert main(["prune-sim", "--scene", str(corpus / "scenes" / f"{scene_id}.json"), "--trace", str(trace),
                 "--t-start", "2"]) == 0
    assert capsys.readouterr().out.startswith("t=  1")


def test_ios_eval(tmp_path, capsys):
    save_ios([IOSample("x", ("chair", "table"), ("lamp",))], tmp_path / "truth.json")
    save_ios([IOSample("x", ("chair",), ("lamp",))], tmp_path / "pred.json")
    assert main(["ios-eval", "--pred", str(tmp_path / "pred.json"), "--truth", str(tmp_path / "truth.json")]) == 0
    got = json.loads(capsys.readouterr().out)
    assert got["F1IO"] == 1.0 and got["count"] == 1


def test_flags_override_config(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("seed = 3\nplanner = random\nt_start = 30\n")
    args = build_parser().parse_args(["eval", "--config", str(cfg_file), "--seed", "9", "--no-pruning"])
    cfg = config_from_args(args)
    assert (cfg.seed, cfg.planner, cfg.prune.t_start, cfg.pruning) == (9, "random", 30, False)


def test_missing_inputs():
    with pytest.raises(SystemExit):
        main(["eval", "--planner", "oracle"])
