"""CLI: the full subcommand flow in-process, exit codes, resume semantics."""
import json

import pytest
import yaml
from click.testing import CliRunner

from currigen.agents import render_prompt
from currigen.backends import fingerprint
from currigen.cli import main
from currigen.dataset import ProblemPool, SubjectCategory, load_pool, save_pool
from currigen.synthetic import make_synthetic_corpus

import dataclasses


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path):
    """Corpus file plus a YAML config for a small deterministic run."""
    corpus = make_synthetic_corpus({s: 8 for s in SubjectCategory}, rng_seed=7)
    corpus_path = tmp_path / "corpus.jsonl"
    save_pool(corpus, corpus_path)
    config = {
        "run_dir": str(tmp_path / "run"),
        "corpus_path": str(corpus_path),
        "rounds": 2,
        "rng_seed": 3,
        "quota": {"Prealgebra": 4, "Geometry": 3, "Algebra": 2},
        "student": {"capability": 2.0},
    }
    config_path = tmp_path / "run.yaml"
    config_path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return tmp_path, config_path, config


def dir_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestBasics:
    def test_version(self, runner):
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "currigen" in result.output

    def test_help_lists_subcommands(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for name in ("seed", "tag", "eval", "generate", "evolve",
                     "run", "simulate", "report", "serve"):
            assert name in result.output

    def test_serve_help(self, runner):
        result = runner.invoke(main, ["serve", "--help"])
        assert result.exit_code == 0
        assert "--port" in result.output


class TestFlow:
    def test_seed_run_resume_report(self, runner, workspace):
        tmp_path, config_path, config = workspace

        result = runner.invoke(main, ["seed", "--config", str(config_path)])
        assert result.exit_code == 0, result.output + result.stderr
        body = json.loads(result.output)
        assert body["val_size"] == 9
        assert (tmp_path / "run" / "round_0" / "state.json").is_file()

        result = runner.invoke(main, ["eval", "--config", str(config_path)])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.output)["round"] == 0

        result = runner.invoke(main, ["run", "--config", str(config_path)])
        assert result.exit_code == 0, result.stderr
        assert "round  hard  easy" in result.output
        summary = json.loads(result.output[result.output.index("{"):])
        assert summary["round"] == 2
        assert summary["rounds_executed"] == 2

        # extending a finished run demands an explicit --resume
        result = runner.invoke(main, ["run", "--config", str(config_path)])
        assert result.exit_code == 2
        assert "error (validation):" in result.stderr
        assert "--resume" in result.stderr

        result = runner.invoke(
            main, ["run", "--config", str(config_path), "--resume", "--rounds", "3"]
        )
        assert result.exit_code == 0, result.stderr
        summary = json.loads(result.output[result.output.index("{"):])
        assert summary["round"] == 3
        assert summary["rounds_executed"] == 1

        result = runner.invoke(main, ["report", "--run-dir", config["run_dir"]])
        assert result.exit_code == 0, result.stderr
        assert result.output.startswith("round")
        assert "report files:" in result.output
        assert (tmp_path / "run" / "report" / "rounds.csv").is_file()

    def test_resume_reproduces_straight_run_bytes(self, runner, workspace):
        tmp_path, config_path, config = workspace

        def drive(run_dir, *commands):
            for args in commands:
                result = runner.invoke(
                    main,
                    [*args, "--config", str(config_path), "--run-dir", str(run_dir)],
                )
                assert result.exit_code == 0, result.stderr

        straight = tmp_path / "straight"
        drive(straight, ["seed"], ["run", "--rounds", "2"])
        stepped = tmp_path / "stepped"
        drive(
            stepped,
            ["seed"],
            ["run", "--rounds", "1"],
            ["run", "--rounds", "2", "--resume"],
        )
        for round_name in ("round_0", "round_1", "round_2"):
            assert dir_bytes(straight / round_name) == dir_bytes(
                stepped / round_name
            ), round_name

    def test_seed_flag_changes_the_sample(self, runner, workspace):
        tmp_path, config_path, _ = workspace
        for seed, name in ((3, "a"), (4, "b")):
            result = runner.invoke(main, [
                "seed", "--config", str(config_path),
                "--run-dir", str(tmp_path / name), "--seed", str(seed),
            ])
            assert result.exit_code == 0, result.stderr
        val_a = (tmp_path / "a" / "round_0" / "val.jsonl").read_bytes()
        val_b = (tmp_path / "b" / "round_0" / "val.jsonl").read_bytes()
        assert val_a != val_b

    def test_generate_and_evolve(self, runner, workspace):
        tmp_path, config_path, _ = workspace
        assert runner.invoke(
            main, ["seed", "--config", str(config_path)]
        ).exit_code == 0
        result = runner.invoke(main, ["generate", "--config", str(config_path)])
        assert result.exit_code == 0, result.stderr
        body = json.loads(result.output)
        assert body["remedy_size"] == 2 * body["hard_size"]
        result = runner.invoke(main, ["evolve", "--config", str(config_path)])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.output)["round"] == 1

    def test_tag_files(self, runner, workspace, tmp_path):
        _, config_path, _ = workspace
        corpus = make_synthetic_corpus({SubjectCategory.GEOMETRY: 4}, rng_seed=1)
        bare = ProblemPool("bare", [
            dataclasses.replace(p, level=None, subject=None) for p in corpus
        ])
        pool_path = tmp_path / "bare.jsonl"
        save_pool(bare, pool_path)
        out_path = tmp_path / "tagged.jsonl"
        result = runner.invoke(main, [
            "tag", "--config", str(config_path), str(pool_path), str(out_path),
        ])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.output)["total"] == 4
        assert all(p.is_tagged for p in load_pool(out_path))

    def test_simulate(self, runner, tmp_path):
        config_path = tmp_path / "sim.yaml"
        config_path.write_text(yaml.safe_dump({
            "run_dir": str(tmp_path / "sim"),
            "pacing": {
                "max_rounds": 40, "target": 3.0, "trials": 4,
                "policies": ["bidirectional", "static"],
            },
        }), encoding="utf-8")
        result = runner.invoke(
            main, ["simulate", "--config", str(config_path), "--trials", "2"]
        )
        assert result.exit_code == 0, result.stderr
        assert "policy" in result.output and "mean_rounds" in result.output
        assert "bidirectional" in result.output
        assert (tmp_path / "sim" / "pacing" / "summary.json").is_file()
        summary = json.loads(
            (tmp_path / "sim" / "pacing" / "summary.json").read_text()
        )
        assert summary["trials"] == 2


class TestExitCodes:
    def test_validation_is_2(self, runner, tmp_path):
        result = runner.invoke(main, ["seed", "--run-dir", str(tmp_path / "x")])
        assert result.exit_code == 2
        assert "error (validation):" in result.stderr

    def test_io_is_3(self, runner, tmp_path):
        result = runner.invoke(main, ["eval", "--run-dir", str(tmp_path / "void")])
        assert result.exit_code == 3
        assert "error (io):" in result.stderr
        assert "seed the run first" in result.stderr

    def _one_bare_problem(self, tmp_path):
        corpus = make_synthetic_corpus({SubjectCategory.ALGEBRA: 1}, rng_seed=2)
        problem = dataclasses.replace(next(iter(corpus)), level=None)
        save_pool(ProblemPool("bare", [problem]), tmp_path / "one.jsonl")
        return problem

    def _scripted_config(self, tmp_path, script: dict) -> str:
        script_path = tmp_path / "script.json"
        script_path.write_text(json.dumps(script), encoding="utf-8")
        config_path = tmp_path / "scripted.yaml"
        config_path.write_text(yaml.safe_dump({
            "run_dir": str(tmp_path / "run"),
            "generator": {"kind": "scripted", "script_path": str(script_path)},
        }), encoding="utf-8")
        return str(config_path)

    def test_backend_is_4(self, runner, tmp_path):
        self._one_bare_problem(tmp_path)
        config_path = self._scripted_config(tmp_path, {})
        result = runner.invoke(main, [
            "tag", "--config", config_path,
            str(tmp_path / "one.jsonl"), str(tmp_path / "out.jsonl"),
        ])
        assert result.exit_code == 4
        assert "error (backend):" in result.stderr

    def test_parse_is_5(self, runner, tmp_path):
        problem = self._one_bare_problem(tmp_path)
        prompt = render_prompt("difficulty_tag", instruction=problem.query)
        config_path = self._scripted_config(
            tmp_path, {fingerprint("difficulty_tag", prompt): "Level: soup"}
        )
        result = runner.invoke(main, [
            "tag", "--config", config_path,
            str(tmp_path / "one.jsonl"), str(tmp_path / "out.jsonl"),
        ])
        assert result.exit_code == 5
        assert "error (parse):" in result.stderr
