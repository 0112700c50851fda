#!/usr/bin/env python3
"""
Tests for the bound and counterexample reports and their JSON siblings
"""

import math

import numpy as np
import pytest
import ujson

from src.core.bounds import BoundConstants
from src.core.oracles import CounterexampleSpec, CounterexampleSystem
from src.handlers.reports import (
    format_bound_report,
    format_counterexample,
    json_sibling,
    run_bound_report,
    run_counterexample,
    sanitize,
    to_json,
    write_report,
)


@pytest.mark.unit
class TestJson:
    """Sanitizing and writing report data"""

    def test_sanitize_non_finite(self):
        data = sanitize({'a': math.inf, 'b': -math.inf, 'c': math.nan, 'd': 1.5})
        assert data == {'a': "inf", 'b': "-inf", 'c': "nan", 'd': 1.5}

    def test_sanitize_numpy(self):
        data = sanitize({'x': np.float64(0.5), 'n': np.int64(3), 'ok': np.bool_(True),
                         'v': np.array([1.0, np.inf])})
        assert data == {'x': 0.5, 'n': 3, 'ok': True, 'v': [1.0, "inf"]}
        assert type(data['n']) is int and type(data['ok']) is bool

    def test_sorted_keys(self):
        text = to_json({'b': 1, 'a': 2})
        assert text.index('"a"') < text.index('"b"')
        assert ujson.loads(text) == {'a': 2, 'b': 1}

    @pytest.mark.parametrize("path, expected", [
        ("out/report.txt", "out/report.json"),
        ("report", "report.json"),
        ("report.json", "report.json.report.json"),
    ])
    def test_json_sibling(self, path, expected):
        assert str(json_sibling(path)) == expected

    def test_write_report(self, out_dir):
        path = out_dir / "bounds.txt"
        write_report("hello\n", {'value': math.inf}, str(path))
        assert path.read_text(encoding='utf-8') == "hello\n"
        assert ujson.loads((out_dir / "bounds.json").read_text(encoding='utf-8')) == {'value': "inf"}

    def test_write_report_without_path(self, out_dir):
        write_report("hello\n", {}, None)
        assert list(out_dir.iterdir()) == []


@pytest.mark.bounds
class TestBoundReport:
    """Lower-bound quantities for a lambda list"""

    def test_feasible(self):
        data = run_bound_report(BoundConstants(c=1.0, s=1.0, c_m=2.0, n=4, a=0.25), [3.0, 1.0], 1)
        assert data['lambda_threshold'] == pytest.approx(2.0)
        assert data['envelope_endpoint'] == pytest.approx(0.25)
        first, second = data['reports']
        assert first['feasible'] and not second['feasible']
        assert first['input_floor_b'] == pytest.approx(69.81818, abs=1e-5)
        text = format_bound_report(data)
        assert "lambda_threshold: 2" in text
        assert "69.8182" in text

    def test_infeasible(self):
        data = run_bound_report(BoundConstants(c=1.0, s=1.0, c_m=2.0, n=4, a=1.0), [3.0], 4)
        assert data['lambda_threshold'] == "Infeasible"
        text = format_bound_report(data)
        assert "lambda_threshold: Infeasible" in text
        assert "n/a" in text

    def test_pure(self):
        constants = BoundConstants(c=1.0, s=1.0, c_m=2.0, n=4, a=0.25)
        assert to_json(run_bound_report(constants, [3.0], 2)) == to_json(run_bound_report(constants, [3.0], 2))


@pytest.mark.oracle
class TestCounterexampleReport:
    """Closed form, simulator and verdict in one record"""

    def test_sys1_collapses(self):
        data = run_counterexample(CounterexampleSpec(CounterexampleSystem.SYS1, 0.0), 50)
        assert data['verdict'] == "collapse"
        assert data['max_deviation'] < 1e-10
        assert len(data['simulated_mu']) == len(data['closed_form_mu']) == 51
        assert data['alpha'][0] == 1.0
        assert data['closed_form_mu'] == data['literal_mu']
        assert data['effective_rank_final'] == pytest.approx(1.0, abs=1e-3)

    def test_sys2_does_not_collapse(self):
        data = run_counterexample(CounterexampleSpec(CounterexampleSystem.SYS2, -3.0), 50)
        assert data['verdict'] == "no-collapse"
        assert data['mu_final'] == pytest.approx(1.0, abs=1e-6)
        assert 'alpha' not in data
        assert data['effective_rank_final'] == pytest.approx(2.0, abs=1e-6)

    def test_format(self):
        data = run_counterexample(CounterexampleSpec(CounterexampleSystem.SYS2, 0.0), 3)
        lines = format_counterexample(data).splitlines()
        assert lines[0] == "Counterexample sys2 lambda=0 K=3"
        assert lines[1].startswith("verdict: ")
        assert lines[3].startswith("effective rank of Y(K): ")
        assert len(lines) == 6 + 4

    def test_json_serializable(self):
        data = run_counterexample(CounterexampleSpec(CounterexampleSystem.SYS1, -3.0), 5)
        assert ujson.loads(to_json(data))['system'] == "sys1"
