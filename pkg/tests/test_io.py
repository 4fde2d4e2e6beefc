import json
from dataclasses import replace

import numpy as np
import pytest

from proxycov import (
    DimensionError,
    NoiseModel,
    PanelDims,
    SchemaError,
    UnsupportedDesignError,
    ValidationError,
    aggregate_unit_data,
    aggregate_units,
    jackknife_covariance,
    naive_covariance,
    ols_weights,
    scenario_preset,
    simulate_panel,
)
from proxycov.io import (
    ReportDocument,
    RunConfig,
    default_metric_names,
    file_digest,
    fmt_float,
    ingest_aggregates,
    ingest_units,
    read_matrix,
    read_report,
    read_scenario,
    read_units,
    render_report,
    reorder_metrics,
    scenario_from_dict,
    scenario_to_dict,
    sniff_table_kind,
    write_aggregates,
    write_matrix,
    write_report,
    write_scenario,
    write_units,
)
from proxycov.types import CovEstimate, ProxyWeights


def small_panel(k=12, n=20, g=2, rep=0):
    sc = replace(
        scenario_preset("appendix-figure-setup"),
        dims=PanelDims(k, g, n),
    )
    return simulate_panel(sc, rep)[0]


class TestUnitFiles:
    def test_tiny_file_round_trip(self, tmp_path):
        p = tmp_path / "units.csv"
        p.write_text(
            "experiment_id,arm,conv\n"
            "exp1,0,1\n"
            "exp1,0,1\n"
            "exp1,1,3\n"
            "exp1,1,5\n"
        )
        res = ingest_units(p)
        assert res.num_experiments == 1
        assert res.num_rows == 4
        assert res.metric_names == ("conv",)
        assert res.aggregates[0].effect_estimate == pytest.approx([3.0])

    def test_bad_arm_names_line(self, tmp_path):
        p = tmp_path / "units.csv"
        rows = ["experiment_id,arm,conv"] + ["e,0,1", "e,1,1"] * 2 + ["e,2,9"]
        p.write_text("\n".join(rows) + "\n")
        with pytest.raises(SchemaError) as err:
            ingest_units(p)
        assert err.value.line == 6
        assert "line 6" in str(err.value)

    def test_non_numeric_names_line_and_column(self, tmp_path):
        p = tmp_path / "units.csv"
        p.write_text(
            "experiment_id,arm,clicks,views\n"
            "e,0,1,2\n"
            "e,1,oops,2\n"
        )
        with pytest.raises(SchemaError) as err:
            ingest_units(p)
        assert err.value.line == 3
        assert err.value.column == "clicks"

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "units.csv"
        p.write_text("experiment_id,arm,m\ne,0,1\ne,1\n")
        with pytest.raises(SchemaError) as err:
            ingest_units(p)
        assert err.value.line == 3

    def test_header_required(self, tmp_path):
        p = tmp_path / "units.csv"
        p.write_text("id,arm,m\ne,0,1\n")
        with pytest.raises(SchemaError):
            ingest_units(p)
        (tmp_path / "empty.csv").write_text("")
        with pytest.raises(SchemaError):
            ingest_units(tmp_path / "empty.csv")

    def test_uniform_design_enforced_by_default(self, tmp_path):
        p = tmp_path / "units.csv"
        p.write_text(
            "experiment_id,arm,m\n"
            "a,0,1\na,0,2\na,1,3\n"  # unbalanced arms
        )
        with pytest.raises(UnsupportedDesignError):
            ingest_units(p)
        q = tmp_path / "units2.csv"
        q.write_text(
            "experiment_id,arm,m\n"
            "a,0,1\na,1,2\n"
            "b,0,1\nb,0,2\nb,1,3\nb,1,4\n"  # different n
        )
        with pytest.raises(UnsupportedDesignError):
            ingest_units(q)
        res = ingest_units(q, require_uniform=False)
        assert res.units_per_experiment is None
        assert {a.num_units for a in res.aggregates} == {2, 4}

    def test_large_file_matches_in_memory_aggregation(self, tmp_path):
        sc = replace(
            scenario_preset("appendix-figure-setup"), dims=PanelDims(500, 2, 2000)
        )
        units, _ = simulate_panel(sc, 0)
        p = tmp_path / "big.csv"
        write_units(p, units)
        res = ingest_units(p)
        assert res.num_rows == 1_000_000
        mem = aggregate_unit_data(units)
        assert (
            np.abs(
                naive_covariance(res.aggregates).matrix - naive_covariance(mem).matrix
            ).max()
            < 1e-10
        )
        assert (
            np.abs(
                jackknife_covariance(res.aggregates).matrix
                - jackknife_covariance(mem).matrix
            ).max()
            < 1e-10
        )

    def test_read_units_round_trip(self, tmp_path):
        units = small_panel()
        p = tmp_path / "units.csv"
        write_units(p, units)
        back = read_units(p)
        assert np.array_equal(back.metrics, units.metrics)
        assert np.array_equal(back.arms, units.arms)
        assert back.metric_names == ("Y", "S1")

    def test_digest_stable(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("experiment_id,arm,m\ne,0,1\ne,1,2\n")
        d1 = file_digest(p)
        d2 = file_digest(p)
        assert d1 == d2
        assert d1.startswith("sha256:")


class TestAggregateFiles:
    def test_export_import_identical_estimators(self, tmp_path):
        for rep in range(5):
            units = small_panel(rep=rep)
            aggs = aggregate_unit_data(units)
            p = tmp_path / f"aggs{rep}.csv"
            write_aggregates(p, aggs, ("Y", "S1"))
            back = ingest_aggregates(p)
            assert back.metric_names == ("Y", "S1")
            w1 = ols_weights(naive_covariance(aggs)).weights
            w2 = ols_weights(naive_covariance(back.aggregates)).weights
            assert np.abs(w1 - w2).max() < 1e-10
            j1 = jackknife_covariance(aggs).matrix
            j2 = jackknife_covariance(back.aggregates).matrix
            assert np.abs(j1 - j2).max() < 1e-10

    def test_missing_cross_column_named(self, tmp_path):
        units = small_panel(g=2)
        aggs = aggregate_unit_data(units)
        p = tmp_path / "aggs.csv"
        write_aggregates(p, aggs, ("Y", "S1"))
        lines = p.read_text().splitlines()
        cols = lines[0].split(",")
        drop = cols.index("cross_Y_S1")
        trimmed = [",".join(c for i, c in enumerate(line.split(",")) if i != drop)
                   for line in lines]
        q = tmp_path / "trimmed.csv"
        q.write_text("\n".join(trimmed) + "\n")
        with pytest.raises(SchemaError) as err:
            ingest_aggregates(q)
        assert err.value.column == "cross_Y_S1"
        assert "cross_Y_S1" in str(err.value)

    def test_single_experiment_refused_downstream(self, tmp_path):
        units = small_panel(k=1)
        p = tmp_path / "aggs.csv"
        write_aggregates(p, aggregate_unit_data(units), ("Y", "S1"))
        back = ingest_aggregates(p)
        assert back.num_experiments == 1
        with pytest.raises(DimensionError):
            naive_covariance(back.aggregates)

    def test_missing_arm_row(self, tmp_path):
        units = small_panel(k=2)
        aggs = aggregate_unit_data(units)
        p = tmp_path / "aggs.csv"
        write_aggregates(p, aggs, ("Y", "S1"))
        lines = p.read_text().splitlines()
        q = tmp_path / "partial.csv"
        q.write_text("\n".join(lines[:-1]) + "\n")  # drop one treatment row
        with pytest.raises(UnsupportedDesignError):
            ingest_aggregates(q)

    def test_non_psd_cross_warns_but_loads(self, tmp_path):
        p = tmp_path / "aggs.csv"
        p.write_text(
            "experiment_id,arm,count,sum_Y,sum_S,cross_Y_Y,cross_Y_S,cross_S_S\n"
            "e,0,2,1,1,1,5,1\n"  # off-diagonal 5 >> diagonal: not PSD
            "e,1,2,2,2,3,1,3\n"
        )
        with pytest.warns(RuntimeWarning, match="positive semidefinite"):
            res = ingest_aggregates(p)
        assert res.num_experiments == 1

    def test_sharded_rows_merge(self, tmp_path):
        p = tmp_path / "aggs.csv"
        p.write_text(
            "experiment_id,arm,count,sum_Y,sum_S,cross_Y_Y,cross_Y_S,cross_S_S\n"
            "e,0,1,1,1,1,1,1\n"
            "e,1,2,2,2,3,1,3\n"
            "e,0,1,1,1,1,1,1\n"  # second shard of the control cell
        )
        res = ingest_aggregates(p)
        cell = res.aggregates[0].control
        assert cell.count == 2
        assert np.allclose(cell.metric_sum, [2, 2])

    def test_count_and_numeric_validation(self, tmp_path):
        head = "experiment_id,arm,count,sum_Y,sum_S,cross_Y_Y,cross_Y_S,cross_S_S\n"
        p = tmp_path / "bad1.csv"
        p.write_text(head + "e,0,0,1,1,1,1,1\ne,1,2,2,2,3,1,3\n")
        with pytest.raises(SchemaError) as err:
            ingest_aggregates(p)
        assert err.value.line == 2
        q = tmp_path / "bad2.csv"
        q.write_text(head + "e,0,2,xx,1,1,1,1\n")
        with pytest.raises(SchemaError):
            ingest_aggregates(q)

    def test_sniff(self, tmp_path):
        units = small_panel(k=3)
        up = tmp_path / "u.csv"
        ap = tmp_path / "a.csv"
        write_units(up, units)
        write_aggregates(ap, aggregate_unit_data(units), ("Y", "S1"))
        assert sniff_table_kind(up) == "units"
        assert sniff_table_kind(ap) == "aggregates"
        bad = tmp_path / "b.csv"
        bad.write_text("foo,bar\n1,2\n")
        with pytest.raises(SchemaError):
            sniff_table_kind(bad)


class TestMetricReorder:
    def test_primary_metric_moves_first(self, tmp_path):
        rng = np.random.default_rng(5)
        records = []
        for t in range(6):
            for arm in (0, 1):
                for _ in range(4):
                    records.append((t, arm, rng.normal(size=3)))
        aggs = aggregate_units(records)
        from proxycov.io import IngestResult

        res = IngestResult(tuple(aggs), ("clicks", "revenue", "time"), 48, "units")
        swapped = reorder_metrics(res, "revenue")
        assert swapped.metric_names == ("revenue", "clicks", "time")
        orig = naive_covariance(res.aggregates).matrix
        new = naive_covariance(swapped.aggregates).matrix
        perm = [1, 0, 2]
        assert np.allclose(new, orig[np.ix_(perm, perm)], atol=0)
        assert reorder_metrics(res, "clicks") is res
        with pytest.raises(ValidationError):
            reorder_metrics(res, "sessions")


class TestMatrixFiles:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3))
        m = a @ a.T
        p = tmp_path / "m.csv"
        write_matrix(p, m, ("Y", "S1", "S2"))
        back, names = read_matrix(p)
        assert np.array_equal(back, m)
        assert names == ("Y", "S1", "S2")

    def test_shape_validation(self, tmp_path):
        with pytest.raises(ValidationError):
            write_matrix(tmp_path / "m.csv", np.ones((2, 3)))
        p = tmp_path / "bad.csv"
        p.write_text("Y,S\n1,2\n")
        with pytest.raises(SchemaError):
            read_matrix(p)
        q = tmp_path / "ragged.csv"
        q.write_text("Y,S\n1,2\n3\n")
        with pytest.raises(SchemaError):
            read_matrix(q)


class TestScenarioFiles:
    def test_round_trip(self, tmp_path):
        sc = scenario_preset("appendix-direct")
        p = tmp_path / "scen.json"
        write_scenario(p, sc)
        back = read_scenario(p)
        assert back.kind == sc.kind
        assert back.dims == sc.dims
        assert np.array_equal(back.effect_cov, sc.effect_cov)
        assert np.array_equal(back.noise.omega, sc.noise.omega)
        assert np.array_equal(back.beta, sc.beta)
        assert back.seed == sc.seed and back.replications == sc.replications

    def test_dict_validation(self):
        sc = scenario_preset("appendix-figure-setup")
        d = scenario_to_dict(sc)
        d["typo_field"] = 1
        with pytest.raises(ValidationError):
            scenario_from_dict(d)
        d2 = scenario_to_dict(sc)
        del d2["effect_cov"]
        with pytest.raises(ValidationError):
            scenario_from_dict(d2)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "scen.json"
        p.write_text("{not json")
        with pytest.raises(SchemaError):
            read_scenario(p)
        q = tmp_path / "list.json"
        q.write_text("[1, 2]")
        with pytest.raises(SchemaError):
            read_scenario(q)


class TestReportDocument:
    def make_doc(self):
        cov = CovEstimate(
            np.array([[0.04, 0.015], [0.015, 0.041]]),
            provenance="tc",
            metric_names=("Y", "S1"),
        )
        weights = ProxyWeights(
            weights=np.array([0.375]),
            estimand="tls",
            kappa=5.357142857142857e-4,
            residual_norm=1e-18,
            gamma_y=0.7,
            extra={"n": 100},
        )
        return ReportDocument.build(
            command="estimate",
            config={"method": "tc", "fmt": "json"},
            input_info={"path": "units.csv", "rows": 400},
            metric_names=("Y", "S1"),
            covariance=cov,
            weights=weights,
            diagnostics={"indefinite": False, "eigenvalues": [0.02, 0.06], "nanval": float("nan")},
            method="tc",
        )

    def test_json_round_trip_lossless(self, tmp_path):
        doc = self.make_doc()
        p = tmp_path / "report.json"
        text = write_report(p, doc, "json")
        assert p.read_text() == text
        back = read_report(p)
        assert back.to_dict() == doc.to_dict()
        # a second serialization is byte-identical
        assert render_report(back, "json") == text

    def test_full_precision_floats(self):
        doc = self.make_doc()
        d = doc.to_dict()
        assert d["weights"]["kappa"] == 5.357142857142857e-4
        assert d["diagnostics"]["nanval"] is None  # json has no nan
        assert json.loads(render_report(doc, "json"))["covariance"]["matrix"][0][1] == 0.015

    def test_text_rendering(self):
        doc = self.make_doc()
        text = render_report(doc, "text")
        assert "weights (tls)" in text
        assert "S1: 0.375" in text
        assert fmt_float(0.04) in text
        assert "interpretation:" in text
        # the causal caveat is part of every report
        assert "not a causal decomposition" in text
        with pytest.raises(ValidationError):
            render_report(doc, "yaml")

    def test_interpretation_mentions_direct_effect_limits(self):
        doc = self.make_doc()
        joined = " ".join(doc.interpretation)
        assert "direct" in joined
        assert "proxy" in joined


class TestRunConfig:
    def test_method_omega_requirements(self):
        with pytest.raises(ValidationError):
            RunConfig(command="estimate", method="tc")
        with pytest.raises(ValidationError):
            RunConfig(command="estimate", method="limlk")
        RunConfig(command="estimate", method="naive")
        RunConfig(command="estimate", method="tc", omega_source="within")

    def test_field_validation(self):
        with pytest.raises(ValidationError):
            RunConfig(command="estimate", method="ridge", omega_source="within")
        with pytest.raises(ValidationError):
            RunConfig(command="simulate", fmt="xml")
        with pytest.raises(ValidationError):
            RunConfig(command="simulate", replications=0)

    def test_echo_drops_unset(self):
        cfg = RunConfig(command="estimate", method="naive", input_path="a.csv")
        echo = cfg.echo()
        assert echo["method"] == "naive"
        assert "omega_source" not in echo
        assert "scenario" not in echo


def test_default_metric_names():
    assert default_metric_names(3) == ("Y", "S1", "S2")
