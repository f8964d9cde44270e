import json
import csv

import jsonschema
import numpy as np
import pytest

from pstrata import NumericalError, ObservedCounts, observed_distribution
from pstrata.cli import (
    CliInputError,
    counts_to_csv,
    main,
    parse_counts_csv,
)

SCHEMA_PATH = "schema/result.json"


@pytest.fixture(scope="module")
def schema():
    with open(SCHEMA_PATH) as fh:
        return json.load(fh)


@pytest.fixture()
def counts_csv(tmp_path, three_trial_conditional):
    counts = ObservedCounts(np.round(three_trial_conditional * 1000).astype(int))
    path = tmp_path / "counts.csv"
    counts_to_csv(counts, path)
    return path


def _load(path, schema):
    with open(path) as fh:
        payload = json.load(fh)
    jsonschema.validate(payload, schema)
    return payload


class TestParseCountsCsv:
    def test_eight_row_file(self, tmp_path):
        path = tmp_path / "c.csv"
        rows = ["trial,z,s,y,count"]
        value = 1
        for z in (0, 1):
            for s in (0, 1):
                for y in (0, 1):
                    rows.append(f"1,{z},{s},{y},{value}")
                    value += 1
        path.write_text("\n".join(rows) + "\n")
        counts = parse_counts_csv(path)
        assert counts.total == 36
        assert counts.n_trials == 1

    def test_missing_header(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("1,0,0,0,5\n")
        with pytest.raises(CliInputError, match="line 1"):
            parse_counts_csv(path)

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("trial,z,s,y,count\n1,0,0,0,5\n1,0,x,1,2\n")
        with pytest.raises(CliInputError, match="line 3"):
            parse_counts_csv(path)

    def test_duplicate_rows_summed_with_warning(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("trial,z,s,y,count\n1,0,0,0,5\n1,0,0,0,7\n1,1,1,1,1\n")
        with pytest.warns(RuntimeWarning, match="duplicate"):
            counts = parse_counts_csv(path)
        assert counts.counts[0, 0, 0, 0] == 12

    def test_gap_in_trial_labels(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("trial,z,s,y,count\n1,0,0,0,5\n1,1,1,1,5\n3,0,0,0,5\n3,1,0,0,5\n")
        with pytest.raises(CliInputError, match=r"missing \[2\]"):
            parse_counts_csv(path)

    def test_crlf_and_roundtrip(self, tmp_path, counts_csv, three_trial_conditional):
        text = counts_csv.read_text().replace("\n", "\r\n")
        crlf = tmp_path / "crlf.csv"
        crlf.write_text(text)
        counts = parse_counts_csv(crlf)
        dist = observed_distribution(counts)
        expected = ObservedCounts(np.round(three_trial_conditional * 1000).astype(int))
        np.testing.assert_array_equal(counts.counts, expected.counts)
        # the x1000 table reproduces the population conditionals exactly
        arm = three_trial_conditional.sum(axis=(1, 2))
        np.testing.assert_allclose(
            dist.omega, three_trial_conditional / arm[:, None, None, :], atol=1e-12
        )


class TestFitCommand:
    def test_em_fit_writes_valid_json(self, tmp_path, counts_csv, schema):
        out = tmp_path / "fit.json"
        code = main([
            "fit", "-i", str(counts_csv), "-o", str(out), "--seed", "3",
            "--method", "em", "--model", "nonmonotone", "--n-starts", "4",
        ])
        assert code == 0
        payload = _load(out, schema)
        assert payload["command"] == "fit"
        assert payload["seed"] == 3
        delta = payload["results"]["parameters"]["delta"]
        assert delta["z1"]["ss"] == pytest.approx(0.8, abs=0.05)

    def test_gibbs_fit_with_csv_mirror(self, tmp_path, counts_csv, schema):
        out = tmp_path / "gibbs.json"
        code = main([
            "fit", "-i", str(counts_csv), "-o", str(out), "--seed", "4",
            "--method", "gibbs", "--model", "nonmonotone",
            "--iterations", "600", "--burnin", "200",
        ])
        assert code == 0
        payload = _load(out, schema)
        assert "ace[ssbar]" in payload["results"]["summary"]
        mirror = tmp_path / "gibbs.csv"
        assert mirror.exists()
        with open(mirror) as fh:
            header = next(csv.reader(fh))
        assert header[0] == "name"

    def test_determinism_modulo_timestamp(self, tmp_path, counts_csv):
        out = tmp_path / "same.json"
        outs = []
        for _ in range(2):
            main([
                "fit", "-i", str(counts_csv), "-o", str(out), "--seed", "5",
                "--method", "gibbs", "--model", "monotone",
                "--iterations", "400", "--burnin", "100",
            ])
            payload = json.loads(out.read_text())
            payload.pop("timestamp")
            outs.append(json.dumps(payload, sort_keys=True))
        assert outs[0] == outs[1]

    def test_conflicting_flags_rejected(self, tmp_path, counts_csv):
        code = main([
            "fit", "-i", str(counts_csv), "-o", str(tmp_path / "x.json"), "--seed", "1",
            "--method", "em", "--model", "monotone", "--iterations", "100",
        ])
        assert code == 2

    def test_missing_input_is_input_error(self, tmp_path):
        code = main([
            "fit", "-i", str(tmp_path / "nope.csv"), "--seed", "1",
            "--method", "em", "--model", "monotone",
        ])
        assert code == 2


class TestOtherCommands:
    def test_bounds(self, tmp_path, counts_csv, schema):
        out = tmp_path / "bounds.json"
        code = main([
            "bounds", "-i", str(counts_csv), "-o", str(out), "--seed", "6",
            "--model", "nonmonotone", "--bootstrap", "50",
        ])
        assert code == 0
        payload = _load(out, schema)
        assert set(payload["results"]["trials"]) == {"1", "2", "3"}
        assert (tmp_path / "bounds.csv").exists()

    def test_check_identifiable_case(self, tmp_path, counts_csv, schema):
        out = tmp_path / "check.json"
        code = main([
            "check", "-i", str(counts_csv), "-o", str(out), "--seed", "7",
            "--model", "nonmonotone", "--n-starts", "4",
        ])
        assert code == 0
        payload = _load(out, schema)
        ident = payload["results"]["identifiability"]
        assert ident["n_params"] == 22
        assert payload["results"]["gof"]["df"] == 1

    def test_check_untestable_two_trials(self, tmp_path, schema):
        path = tmp_path / "two.csv"
        rows = ["trial,z,s,y,count"]
        gen = np.random.default_rng(0)
        for trial in (1, 2):
            for z in (0, 1):
                for s in (0, 1):
                    for y in (0, 1):
                        rows.append(f"{trial},{z},{s},{y},{gen.integers(5, 40)}")
        path.write_text("\n".join(rows) + "\n")
        out = tmp_path / "check2.json"
        code = main([
            "check", "-i", str(path), "-o", str(out), "--seed", "8",
            "--model", "nonmonotone", "--n-starts", "2",
        ])
        assert code == 0
        payload = _load(out, schema)
        assert "untestable" in payload["results"]["gof"]
        assert "3" in payload["results"]["gof"]["untestable"]
        assert not payload["results"]["identifiability"]["trial_count_ok"]

    def test_sensitivity(self, tmp_path, counts_csv, schema):
        out = tmp_path / "sens.json"
        code = main([
            "sensitivity", "-i", str(counts_csv), "-o", str(out), "--seed", "9",
            "--sigma", "0.2", "--iterations", "400", "--burnin", "100",
        ])
        assert code == 0
        payload = _load(out, schema)
        assert "0.2" in payload["results"]["sigmas"]
        assert (tmp_path / "sens.csv").exists()

    def test_simulate(self, tmp_path, schema):
        out = tmp_path / "sim.json"
        code = main([
            "simulate", "-o", str(out), "--seed", "10",
            "--scenario", "monotone-3", "--replicates", "2",
            "--n-per-trial", "120", "--n-starts", "2",
            "--iterations", "400", "--burnin", "100",
        ])
        assert code == 0
        payload = _load(out, schema)
        assert payload["results"]["n_replicates"] == 2
        assert (tmp_path / "sim.replicates.csv").exists()

    def test_simulate_unknown_scenario(self, tmp_path):
        code = main([
            "simulate", "-o", str(tmp_path / "x.json"), "--seed", "1",
            "--scenario", "no-such", "--replicates", "1",
        ])
        assert code == 2

    def test_predict_monotone(self, tmp_path, schema):
        out = tmp_path / "pred.json"
        code = main([
            "predict", "-o", str(out), "--model", "monotone",
            "--ace-s", "0.2", "--ace-ssbar", "0.5",
        ])
        assert code == 0
        payload = _load(out, schema)
        assert payload["results"]["ace_y"] == pytest.approx(0.10)
        assert payload["results"]["sign"] == "positive"

    def test_predict_nonmonotone_bounds(self, tmp_path, schema):
        out = tmp_path / "pred2.json"
        code = main([
            "predict", "-o", str(out), "--model", "nonmonotone",
            "--ace-s", "0.2", "--ace-ssbar", "0.5", "--ace-sbars", "-0.4",
        ])
        assert code == 0
        payload = _load(out, schema)
        lo, hi = payload["results"]["ace_y_bounds"]
        assert (lo, hi) == (pytest.approx(0.10), pytest.approx(0.14))

    def test_predict_requires_sbars_without_monotonicity(self, tmp_path):
        code = main([
            "predict", "-o", str(tmp_path / "x.json"), "--model", "nonmonotone",
            "--ace-s", "0.2", "--ace-ssbar", "0.5",
        ])
        assert code == 2

    def test_evaluate(self, tmp_path, counts_csv, schema):
        out = tmp_path / "ev.json"
        code = main([
            "evaluate", "-i", str(counts_csv), "-o", str(out), "--seed", "11",
            "--model", "nonmonotone", "--iterations", "600", "--burnin", "200",
        ])
        assert code == 0
        payload = _load(out, schema)
        verdict = payload["results"]["verdict"]
        assert set(verdict["sufficiency"]) == {"ssbar", "sbars"}

    def test_tabulate_roundtrip(self, tmp_path):
        units = tmp_path / "units.csv"
        rows = ["trial,z,s,y"] + ["1,1,1,1"] * 3 + ["1,0,0,0"] * 2 + ["2,1,0,1", "2,0,1,0"]
        units.write_text("\n".join(rows) + "\n")
        out = tmp_path / "counts.csv"
        assert main(["tabulate", "-i", str(units), "-o", str(out)]) == 0
        counts = parse_counts_csv(out)
        assert counts.counts[1, 1, 1, 0] == 3
        assert counts.counts[0, 0, 0, 0] == 2
        assert counts.total == 7

    def test_numerical_failure_exit_code(self, monkeypatch, tmp_path, counts_csv):
        import pstrata.cli as cli_mod

        def boom(*args, **kwargs):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(cli_mod, "run_em", boom)
        code = main([
            "fit", "-i", str(counts_csv), "-o", str(tmp_path / "x.json"),
            "--seed", "1", "--method", "em", "--model", "monotone",
        ])
        assert code == 3
