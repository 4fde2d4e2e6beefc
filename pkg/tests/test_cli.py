import json
from dataclasses import replace

import numpy as np
import pytest

from proxycov import (
    PanelDims,
    aggregate_unit_data,
    naive_covariance,
    ols_weights,
    scenario_preset,
    simulate_panel,
    within_noise,
)
from proxycov.cli import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from proxycov.io import write_matrix, write_scenario, write_units


def desk_panel(k=30, n=20, g=2, rep=0, preset="appendix-figure-setup"):
    sc = replace(scenario_preset(preset), dims=PanelDims(k, g, n))
    return simulate_panel(sc, rep)


@pytest.fixture()
def units_file(tmp_path):
    units, _ = desk_panel()
    p = tmp_path / "units.csv"
    write_units(p, units)
    return p


@pytest.fixture()
def omega_file(tmp_path):
    p = tmp_path / "omega.csv"
    write_matrix(p, np.array([[1.0, 0.4], [0.4, 1.0]]), ("Y", "S1"))
    return p


def run(capsys, argv):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def strip_timestamp(text):
    return "\n".join(
        line
        for line in text.splitlines()
        if '"created_at"' not in line and not line.startswith("generated:")
    )


class TestScenariosCommand:
    def test_lists_presets(self, capsys):
        rc, out, _ = run(capsys, ["scenarios"])
        assert rc == EXIT_OK
        for name in ("appendix-figure-setup", "appendix-no-direct", "appendix-direct"):
            assert name in out

    def test_json_format(self, capsys):
        rc, out, _ = run(capsys, ["scenarios", "--format", "json"])
        assert rc == EXIT_OK
        rows = json.loads(out)
        assert {r["name"] for r in rows} == {
            "appendix-direct",
            "appendix-figure-setup",
            "appendix-no-direct",
        }


class TestAggregateCommand:
    def test_aggregate_then_estimate(self, capsys, tmp_path, units_file):
        aggs = tmp_path / "aggs.csv"
        rc, out, _ = run(capsys, ["aggregate", str(units_file), "--out", str(aggs)])
        assert rc == EXIT_OK
        assert "30 experiments" in out
        assert aggs.exists()

    def test_bad_row_exits_validation(self, capsys, tmp_path):
        p = tmp_path / "units.csv"
        p.write_text("experiment_id,arm,m\ne,0,1\ne,1,1\ne,2,1\n")
        rc, _, err = run(capsys, ["aggregate", str(p), "--out", str(tmp_path / "a.csv")])
        assert rc == EXIT_VALIDATION
        assert "line 4" in err


class TestEstimateCommand:
    def test_report_structure(self, capsys, units_file):
        rc, out, _ = run(capsys, ["estimate", str(units_file), "--method", "naive"])
        assert rc == EXIT_OK
        doc = json.loads(out)
        assert doc["command"] == "estimate"
        assert doc["metric_names"] == ["Y", "S1"]
        assert doc["covariance"]["provenance"] == "naive"
        assert doc["weights"]["estimand"] == "ols"
        assert doc["input"]["digest"].startswith("sha256:")
        assert len(doc["interpretation"]) == 4
        assert doc["diagnostics"]["indefinite"] in (True, False)

    def test_matches_library_result(self, capsys, units_file):
        rc, out, _ = run(capsys, ["estimate", str(units_file), "--method", "naive"])
        units, _ = desk_panel()
        expect = ols_weights(naive_covariance(aggregate_unit_data(units))).weights
        got = np.array(json.loads(out)["weights"]["values"])
        assert np.abs(got - expect).max() < 1e-12

    def test_unit_and_aggregate_paths_agree(self, capsys, tmp_path, units_file, omega_file):
        aggs = tmp_path / "aggs.csv"
        assert main(["aggregate", str(units_file), "--out", str(aggs)]) == EXIT_OK
        capsys.readouterr()
        for method, extra in [
            ("naive", []),
            ("jackknife", []),
            ("tc", ["--omega", str(omega_file)]),
            ("tc", ["--omega", "within"]),
            ("limlk", ["--omega", str(omega_file)]),
        ]:
            rc1, o1, _ = run(capsys, ["estimate", str(units_file), "--method", method] + extra)
            rc2, o2, _ = run(capsys, ["estimate", str(aggs), "--method", method] + extra)
            assert (rc1, rc2) == (EXIT_OK, EXIT_OK)
            w1 = np.array(json.loads(o1)["weights"]["values"])
            w2 = np.array(json.loads(o2)["weights"]["values"])
            assert np.abs(w1 - w2).max() < 1e-10, method

    def test_kclass_equals_tc_with_within_noise(self, capsys, units_file):
        rc1, o1, _ = run(capsys, ["estimate", str(units_file), "--method", "kclass"])
        rc2, o2, _ = run(
            capsys, ["estimate", str(units_file), "--method", "tc", "--omega", "within"]
        )
        assert (rc1, rc2) == (EXIT_OK, EXIT_OK)
        w1 = np.array(json.loads(o1)["weights"]["values"])
        w2 = np.array(json.loads(o2)["weights"]["values"])
        assert np.abs(w1 - w2).max() < 1e-10
        d1 = json.loads(o1)["diagnostics"]
        assert d1["k"] == pytest.approx(1 + 4 / 20)

    def test_kclass_needs_units(self, capsys, tmp_path, units_file):
        aggs = tmp_path / "aggs.csv"
        main(["aggregate", str(units_file), "--out", str(aggs)])
        capsys.readouterr()
        rc, _, err = run(capsys, ["estimate", str(aggs), "--method", "kclass"])
        assert rc == EXIT_VALIDATION
        assert "unit-level" in err

    def test_naive_with_omega_warns(self, capsys, units_file, omega_file):
        rc, out, err = run(
            capsys,
            ["estimate", str(units_file), "--method", "naive", "--omega", str(omega_file)],
        )
        assert rc == EXIT_OK
        assert "ignores --omega" in err

    def test_missing_omega_is_validation_error(self, capsys, units_file):
        for method in ("tc", "limlk"):
            rc, _, err = run(capsys, ["estimate", str(units_file), "--method", method])
            assert rc == EXIT_VALIDATION
            assert "--omega" in err

    def test_non_spd_omega_is_validation_error(self, capsys, tmp_path, units_file):
        bad = tmp_path / "bad_omega.csv"
        write_matrix(bad, np.array([[1.0, 2.0], [2.0, 1.0]]), ("Y", "S1"))
        rc, _, err = run(
            capsys,
            ["estimate", str(units_file), "--method", "limlk", "--omega", str(bad)],
        )
        assert rc == EXIT_VALIDATION

    def test_omega_names_permuted_to_data_order(self, capsys, tmp_path, units_file):
        fwd = tmp_path / "omega_fwd.csv"
        rev = tmp_path / "omega_rev.csv"
        omega = np.array([[1.0, 0.4], [0.4, 2.0]])
        write_matrix(fwd, omega, ("Y", "S1"))
        write_matrix(rev, omega[::-1, ::-1], ("S1", "Y"))
        _, o1, _ = run(
            capsys, ["estimate", str(units_file), "--method", "tc", "--omega", str(fwd)]
        )
        _, o2, _ = run(
            capsys, ["estimate", str(units_file), "--method", "tc", "--omega", str(rev)]
        )
        assert json.loads(o1)["weights"]["values"] == json.loads(o2)["weights"]["values"]
        mismatched = tmp_path / "omega_other.csv"
        write_matrix(mismatched, omega, ("Y", "S9"))
        rc, _, err = run(
            capsys,
            ["estimate", str(units_file), "--method", "tc", "--omega", str(mismatched)],
        )
        assert rc == EXIT_VALIDATION
        assert "S9" in err

    def test_primary_metric_reordering(self, capsys, tmp_path):
        units, _ = desk_panel()
        swapped = tmp_path / "swapped.csv"
        # write with S1 first; --primary-metric Y must undo the swap
        from proxycov.aggregates import UnitData

        write_units(
            swapped,
            UnitData(
                units.experiment_ids,
                units.arms,
                units.metrics[:, ::-1],
                metric_names=("S1", "Y"),
            ),
        )
        plain = tmp_path / "plain.csv"
        write_units(plain, units)
        _, o1, _ = run(capsys, ["estimate", str(plain), "--method", "naive"])
        _, o2, _ = run(
            capsys,
            ["estimate", str(swapped), "--method", "naive", "--primary-metric", "Y"],
        )
        d1, d2 = json.loads(o1), json.loads(o2)
        assert d2["metric_names"] == ["Y", "S1"]
        assert d1["weights"]["values"] == d2["weights"]["values"]
        rc, _, err = run(
            capsys,
            ["estimate", str(plain), "--method", "naive", "--primary-metric", "Z"],
        )
        assert rc == EXIT_VALIDATION

    def test_kclass_primary_metric(self, capsys, tmp_path):
        units, _ = desk_panel()
        swapped = tmp_path / "swapped.csv"
        from proxycov.aggregates import UnitData

        write_units(
            swapped,
            UnitData(
                units.experiment_ids,
                units.arms,
                units.metrics[:, ::-1],
                metric_names=("S1", "Y"),
            ),
        )
        plain = tmp_path / "plain.csv"
        write_units(plain, units)
        _, o1, _ = run(capsys, ["estimate", str(plain), "--method", "kclass"])
        _, o2, _ = run(
            capsys,
            ["estimate", str(swapped), "--method", "kclass", "--primary-metric", "Y"],
        )
        assert json.loads(o1)["weights"]["values"] == json.loads(o2)["weights"]["values"]

    def test_n_override_scales_correction(self, capsys, units_file, omega_file):
        base = ["estimate", str(units_file), "--method", "tc", "--omega", str(omega_file)]
        _, o1, _ = run(capsys, base)
        rc, o2, _ = run(capsys, base + ["--n", "50"])
        assert rc == EXIT_OK
        d1, d2 = json.loads(o1), json.loads(o2)
        assert d1["diagnostics"]["n"] == 20
        assert d2["diagnostics"]["n"] == 50
        assert d1["weights"]["values"] != d2["weights"]["values"]
        rc, _, _ = run(capsys, base + ["--n", "1"])
        assert rc == EXIT_VALIDATION

    def test_varying_n_rejected_except_jackknife(self, capsys, tmp_path, omega_file):
        p = tmp_path / "varying.csv"
        rng = np.random.default_rng(0)
        lines = ["experiment_id,arm,Y,S1"]
        for t, n in enumerate([4, 6, 8]):
            for i in range(n):
                arm = 1 if i >= n // 2 else 0
                y, s = rng.normal(size=2)
                lines.append(f"e{t},{arm},{y},{s}")
        p.write_text("\n".join(lines) + "\n")
        aggs = tmp_path / "aggs.csv"
        # unit ingestion rejects varying n, so build the aggregate file directly
        from proxycov.io import ingest_units, write_aggregates

        res = ingest_units(p, require_uniform=False)
        write_aggregates(aggs, res.aggregates, res.metric_names)
        for extra in ([], ["--n", "6"]):
            rc, _, err = run(
                capsys,
                ["estimate", str(aggs), "--method", "tc", "--omega", str(omega_file)]
                + extra,
            )
            assert rc == EXIT_VALIDATION
            assert "unequal unit counts" in err
        rc, out, _ = run(capsys, ["estimate", str(aggs), "--method", "jackknife"])
        assert rc == EXIT_OK
        assert json.loads(out)["covariance"]["provenance"] == "jackknife"

    def test_numerical_failure_exit_code(self, capsys, tmp_path):
        # two experiments, three metrics: the centered covariance is rank
        # one and the plain regression matrix is singular
        sc = replace(scenario_preset("appendix-no-direct"), dims=PanelDims(2, 3, 6))
        units, _ = simulate_panel(sc, 0)
        p = tmp_path / "units.csv"
        write_units(p, units)
        rc, _, err = run(capsys, ["estimate", str(p), "--method", "naive"])
        assert rc == EXIT_NUMERICAL
        assert "singular" in err

    def test_missing_file_exit_code(self, capsys, tmp_path):
        rc, _, err = run(
            capsys, ["estimate", str(tmp_path / "nope.csv"), "--method", "naive"]
        )
        assert rc == EXIT_IO

    def test_out_file_matches_stdout(self, capsys, tmp_path, units_file):
        report = tmp_path / "report.json"
        rc, out, _ = run(
            capsys,
            ["estimate", str(units_file), "--method", "naive", "--out", str(report)],
        )
        assert rc == EXIT_OK
        assert report.read_text() == out

    def test_deterministic_output(self, capsys, units_file):
        _, o1, _ = run(capsys, ["estimate", str(units_file), "--method", "jackknife"])
        _, o2, _ = run(capsys, ["estimate", str(units_file), "--method", "jackknife"])
        assert strip_timestamp(o1) == strip_timestamp(o2)

    def test_text_format(self, capsys, units_file):
        rc, out, _ = run(
            capsys, ["estimate", str(units_file), "--method", "naive", "--format", "text"]
        )
        assert rc == EXIT_OK
        assert out.startswith("proxycov")
        assert "weights (ols):" in out


class TestSimulateCommand:
    def test_preset_run_writes_tables(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        rc, out, _ = run(
            capsys,
            [
                "simulate",
                "--scenario", "appendix-figure-setup",
                "--replications", "12",
                "--seed", "99",
                "--out", "run",
            ],
        )
        assert rc == EXIT_OK
        doc = json.loads(out)
        assert set(doc["extras"]["summaries"]) == {"naive", "jackknife", "limlk", "tc"}
        for s in doc["extras"]["summaries"].values():
            assert s["replications_used"] == 12
        for suffix in (".summary.csv", ".draws.csv", ".scatter.csv", ".slopes.csv",
                       ".report.json"):
            assert (tmp_path / f"run{suffix}").exists(), suffix
        scatter = (tmp_path / "run.scatter.csv").read_text().splitlines()
        assert scatter[0] == (
            "experiment,effect_Y,effect_S1,whitened_effect_Y,whitened_effect_S1"
        )
        assert len(scatter) == 1 + 500
        draws = (tmp_path / "run.draws.csv").read_text().splitlines()
        assert len(draws) == 1 + 12 * 4

    def test_worker_count_invisible_in_outputs(self, capsys, tmp_path, monkeypatch):
        d1 = tmp_path / "a"
        d2 = tmp_path / "b"
        d1.mkdir()
        d2.mkdir()
        argv = [
            "simulate", "--scenario", "appendix-figure-setup",
            "--replications", "10", "--seed", "7", "--out", "run",
        ]
        monkeypatch.chdir(d1)
        _, o1, _ = run(capsys, argv + ["--workers", "1"])
        monkeypatch.chdir(d2)
        _, o2, _ = run(capsys, argv + ["--workers", "8"])
        assert strip_timestamp(o1) == strip_timestamp(o2)
        for suffix in (".summary.csv", ".draws.csv", ".scatter.csv", ".slopes.csv"):
            assert (d1 / f"run{suffix}").read_bytes() == (d2 / f"run{suffix}").read_bytes()

    def test_scenario_file(self, capsys, tmp_path):
        sc = replace(
            scenario_preset("appendix-figure-setup"),
            dims=PanelDims(10, 2, 10),
            replications=3,
        )
        p = tmp_path / "scen.json"
        write_scenario(p, sc)
        rc, out, _ = run(capsys, ["simulate", "--scenario", str(p)])
        assert rc == EXIT_OK
        doc = json.loads(out)
        assert doc["extras"]["scenario"]["num_experiments"] == 10

    def test_unknown_scenario(self, capsys):
        rc, _, err = run(capsys, ["simulate", "--scenario", "appendix-nothing"])
        assert rc == EXIT_VALIDATION
        assert "appendix-figure-setup" in err

    def test_unknown_estimator(self, capsys):
        rc, _, err = run(
            capsys,
            ["simulate", "--scenario", "appendix-figure-setup",
             "--replications", "2", "--estimators", "naive,ridge"],
        )
        assert rc == EXIT_VALIDATION

    def test_full_scale_on_file_rejected(self, capsys, tmp_path):
        sc = replace(scenario_preset("appendix-figure-setup"), dims=PanelDims(4, 2, 10))
        p = tmp_path / "scen.json"
        write_scenario(p, sc)
        rc, _, err = run(capsys, ["simulate", "--scenario", str(p), "--full-scale"])
        assert rc == EXIT_VALIDATION

    def test_reference_slopes_in_report(self, capsys):
        rc, out, _ = run(
            capsys,
            ["simulate", "--scenario", "appendix-figure-setup", "--replications", "2"],
        )
        slopes = json.loads(out)["extras"]["reference_slopes"]
        assert slopes["n"] == 100
        # the whitened comparison reproduces the within-run analysis gap
        gap = abs(slopes["whitened_ols_plim"][0] - slopes["whitened_ols_target"][0])
        assert abs(gap - 0.5721771024364685) < 1e-9
        assert (
            abs(slopes["tls_plim"][0] - slopes["tls_target"][0]) < 1e-10
        )
