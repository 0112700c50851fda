#!/usr/bin/env python3
"""
Tests for the rank-lab command line: output routing and exit codes
"""

import pytest
import ujson

from src.core.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, build_parser, main, resolve_config
from src.core.config import RunConfig
from src.core.logging_config import configure_logging
from src.handlers.experiments import CSV_HEADER, read_sweep_csv

SMALL = ['--seed', '3', '--layers', '2', '--seq-len', '3', '--dim', '3', '--log-level', 'WARNING']


@pytest.fixture(autouse=True)
def restore_logging():
    """main() binds logging to the captured stderr; rebind after each test"""
    yield
    configure_logging("WARNING", "text")


@pytest.mark.cli
class TestSweepCommands:
    """CSV to stdout or --out"""

    def test_sweep_to_stdout(self, capsys):
        assert main(['sweep', *SMALL, '--lambda=0,1']) == EXIT_OK
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 1 + 2 * 3

    def test_sweep_to_file(self, out_dir, capsys):
        path = out_dir / "sweep.csv"
        assert main(['sweep', *SMALL, '--lambda=-1.5', '--out', str(path)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        rows = read_sweep_csv(str(path))
        assert [row.layer for row in rows] == [0, 1, 2]

    def test_ablate_skip(self, capsys):
        assert main(['ablate', *SMALL, '--grid', 'skip', '--block', 'lti', '--lambda=2']) == EXIT_OK
        run_ids = {line.split(",")[0] for line in capsys.readouterr().out.splitlines()[1:]}
        assert run_ids == {"lti:lambda=0.0:ln=on", "lti:lambda=0.0:ln=off",
                           "lti:lambda=2.0:ln=on", "lti:lambda=2.0:ln=off"}

    def test_gating_ablation_needs_selective(self):
        assert main(['ablate', *SMALL, '--grid', 'gating', '--block', 'attention']) == EXIT_CONFIG

    def test_score(self, out_dir, capsys):
        path = out_dir / "sweep.csv"
        main(['sweep', *SMALL, '--lambda=0', '--out', str(path)])
        capsys.readouterr()
        assert main(['score', str(path), '--rate', '0.5', '--log-level', 'WARNING']) == EXIT_OK
        assert "selective:lambda=0.0" in capsys.readouterr().out

    def test_score_missing_file(self, out_dir):
        assert main(['score', str(out_dir / "absent.csv"), '--log-level', 'WARNING']) == EXIT_FAILED


@pytest.mark.cli
class TestReportCommands:
    """Text to stdout; with --out, text plus a JSON sibling"""

    def test_bounds_stdout(self, capsys):
        code = main(['bounds', '--rate', '0.25', '--c-m', '2', '--lambda', '3',
                     '--layers', '1', '--seq-len', '4', '--log-level', 'WARNING'])
        assert code == EXIT_OK
        assert "lambda_threshold: 2" in capsys.readouterr().out

    def test_bounds_out(self, out_dir, capsys):
        path = out_dir / "bounds.txt"
        code = main(['bounds', '--rate', '1', '--c-m', '2', '--lambda', '3',
                     '--layers', '4', '--log-level', 'WARNING', '--out', str(path)])
        assert code == EXIT_OK
        assert capsys.readouterr().out == ""
        assert "Infeasible" in path.read_text(encoding='utf-8')
        data = ujson.loads((out_dir / "bounds.json").read_text(encoding='utf-8'))
        assert data['lambda_threshold'] == "Infeasible"

    def test_counterexample(self, capsys):
        code = main(['counterexample', '--system', 'sys2', '--lambda=-3', '--layers', '50',
                     '--log-level', 'WARNING'])
        assert code == EXIT_OK
        assert "verdict: no-collapse" in capsys.readouterr().out

    def test_counterexample_singular(self):
        assert main(['counterexample', '--system', 'sys1', '--lambda=-1',
                     '--log-level', 'WARNING']) == EXIT_CONFIG

    def test_counterexample_needs_one_lambda(self):
        assert main(['counterexample', '--system', 'sys1', '--lambda=0,1',
                     '--log-level', 'WARNING']) == EXIT_CONFIG

    def test_verify_passes(self, capsys):
        assert main(['verify', '--suite', 'lti', '--trials', '2', '--log-level', 'WARNING']) == EXIT_OK
        assert capsys.readouterr().out.startswith("[PASS] suite=lti")

    def test_verify_negative_control(self, capsys):
        code = main(['verify', '--suite', 'thm1', '--trials', '2', '--inject-infeasible',
                     '--log-level', 'WARNING'])
        assert code == EXIT_FAILED
        assert "replay with" in capsys.readouterr().out


@pytest.mark.cli
@pytest.mark.config
class TestConfigResolution:
    """Bad configuration exits with status 2"""

    def test_negative_layers(self):
        assert main(['sweep', '--layers', '-1', '--log-level', 'WARNING']) == EXIT_CONFIG

    def test_unknown_json_key(self, out_dir):
        path = out_dir / "config.json"
        path.write_text('{"bogus": 1}', encoding='utf-8')
        assert main(['sweep', '--config', str(path), '--log-level', 'WARNING']) == EXIT_CONFIG

    def test_invalid_json(self, out_dir):
        path = out_dir / "config.json"
        path.write_text('{"seed": ', encoding='utf-8')
        assert main(['sweep', '--config', str(path), '--log-level', 'WARNING']) == EXIT_CONFIG

    def test_bad_lambda_list(self):
        assert main(['sweep', '--lambda', 'zero', '--log-level', 'WARNING']) == EXIT_CONFIG

    def test_flags_override_file(self, out_dir):
        path = out_dir / "config.json"
        path.write_text('{"seed": 5, "n": 6, "layernorm": "off"}', encoding='utf-8')
        args = build_parser().parse_args(['sweep', '--config', str(path), '--seq-len', '4'])
        cfg = resolve_config(args, base=RunConfig())
        assert (cfg.seed, cfg.n, cfg.layernorm) == (5, 4, False)

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(['counterexample', '--lambda', '0'])
        assert exc.value.code == 2
