import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from sfas.cli import main as cli_main
from sfas.estimators import EstimatorSettings
from sfas.coupling import CouplingModel
from sfas.geometry import ArrayConfig, SourceTruth
from sfas.harness import (
    Campaign,
    ScenarioFileError,
    dump_scenario,
    load_file,
    load_scenario,
    run_campaign,
    run_single_shot,
    validate_scenario,
)
from sfas.simulate import Scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def small_scenario(**kw):
    defaults = dict(
        sources=(
            SourceTruth.from_degrees(-20.66, 4000.0),
            SourceTruth.from_degrees(10.77, 5000.0),
        ),
        snapshots=200,
        snr_db=10.0,
        seed=99,
    )
    defaults.update(kw)
    return Scenario(**defaults)


def read_csv(path):
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = cells
            else:
                rows.append(dict(zip(header, cells)))
    return rows


class TestScenarioFiles:
    def test_minimal_defaults(self, tmp_path):
        path = tmp_path / "minimal.yaml"
        path.write_text("seed: 7\nsources:\n  - {angle_deg: 10.0, range: 100.0}\n")
        scenario = load_scenario(path)
        assert isinstance(scenario, Scenario)
        assert scenario.config_compressed.scale == 0.2
        assert scenario.config_extended.scale == 2.0
        assert scenario.snapshots == 500
        assert scenario.seed == 7

    def test_minimal_campaign_defaults(self, tmp_path):
        path = tmp_path / "camp.yaml"
        path.write_text(
            "seed: 7\nsources:\n  - {angle_deg: 10.0, range: 100.0}\n"
            "campaign: {sweep: snr_db, values: [0.0, 10.0]}\n"
        )
        campaign = load_scenario(path)
        assert isinstance(campaign, Campaign)
        assert campaign.trials == 1000
        assert campaign.estimators == ("two_stage",)

    def test_malformed_angle_names_invariant(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("seed: 1\nsources:\n  - {angle_deg: 95.0, range: 100.0}\n")
        with pytest.raises(ScenarioFileError, match="angle"):
            load_scenario(path)

    def test_all_violations_reported(self, tmp_path):
        path = tmp_path / "bad2.yaml"
        path.write_text(
            "seed: 1\nsnapshots: 0\n"
            "array: {scale_compressed: 1.5, scale_extended: 0.5}\n"
            "sources:\n  - {angle_deg: 10.0, range: 100.0}\n"
        )
        with pytest.raises(ScenarioFileError) as exc:
            load_scenario(path)
        message = str(exc.value)
        for fragment in ("compressed scale", "extended scale", "snapshots"):
            assert fragment in message

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "extra.yaml"
        path.write_text(
            "seed: 1\nbogus: 3\nsources:\n  - {angle_deg: 1.0, range: 100.0}\n"
        )
        with pytest.raises(ScenarioFileError, match="bogus"):
            load_scenario(path)

    def test_parse_error_has_location(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("seed: [unclosed\n")
        with pytest.raises(ScenarioFileError, match="line"):
            load_scenario(path)

    @pytest.mark.parametrize("name", sorted(p.name for p in SCENARIO_DIR.glob("*.yaml")))
    def test_shipped_files_round_trip(self, tmp_path, name):
        first = load_file(SCENARIO_DIR / name)
        out = tmp_path / name
        if first[2] is not None:
            dump_scenario(first[2], out)
        else:
            dump_scenario(first[0], out, settings=first[1])
        second = load_file(out)
        assert first == second

    def test_campaign_invariants(self):
        scen = small_scenario()
        with pytest.raises(ScenarioFileError, match="increasing"):
            Campaign(scenario=scen, sweep="snr_db", values=(5.0, 1.0))
        with pytest.raises(ScenarioFileError, match="estimator"):
            Campaign(scenario=scen, sweep="snr_db", values=(0.0,), estimators=("nope",))
        with pytest.raises(ScenarioFileError, match="trials"):
            Campaign(scenario=scen, sweep="snr_db", values=(0.0,), trials=0)


class TestSingleShot:
    def test_trivial_scenario_bundle_shape(self, tmp_path):
        scen = Scenario(
            sources=(SourceTruth.from_degrees(10.0, 30.0),),
            snapshots=100,
            snr_db=20.0,
            seed=5,
        )
        bundle = run_single_shot(scen, out_dir=tmp_path / "out")
        assert len(bundle.range_spectra) == 1
        assert len(bundle.refine_spectra) == 1
        assert bundle.estimate is not None
        record = json.loads((tmp_path / "out" / "estimate.json").read_text())
        assert len(record["estimate"]["sources"]) == 1
        assert record["config"]["seed"] == 5

    def test_mixed_scene_refined_angles_tight(self, mixed_scenario):
        bundle = run_single_shot(mixed_scenario)
        assert bundle.estimate is not None
        truth = np.array([-40.0, -20.0, 10.0, 30.0])
        from sfas.estimators import pair_estimates

        errors = pair_estimates(bundle.estimate.refined_angles_deg, truth).angle_errors
        assert np.max(np.abs(errors)) <= 0.1

    def test_rerun_is_byte_identical(self, tmp_path, mixed_scenario):
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_single_shot(mixed_scenario, out_dir=a)
        run_single_shot(mixed_scenario, out_dir=b)
        files = sorted(p.name for p in a.iterdir())
        assert files == sorted(p.name for p in b.iterdir())
        for name in files:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_estimator_failure_recorded_not_raised(self, tmp_path):
        # co-located noiseless sources leave a rank-one covariance: the
        # two-source subspace split is degenerate and must be reported as
        # a captured error, never an exception
        scen = Scenario(
            sources=(
                SourceTruth.from_degrees(10.0, 3000.0),
                SourceTruth.from_degrees(10.0, 3000.0),
            ),
            snapshots=20,
            snr_db=float("inf"),
            seed=11,
        )
        bundle = run_single_shot(scen, out_dir=tmp_path / "out")
        assert bundle.errors  # degeneracy captured, no exception
        assert bundle.estimate is None


class TestCampaign:
    def test_single_trial_rmse_equals_error(self):
        scen = small_scenario()
        camp = Campaign(scenario=scen, sweep="none", trials=1)
        record = run_campaign(camp)[0]
        # with one trial the pooled RMSE is the RMS of that trial's errors
        assert record.trials_total == 1
        assert record.trials_failed == 0
        assert record.aar_angle_rmse_pooled == pytest.approx(
            math.sqrt(float(np.mean(record.aar_angle_rmse**2)))
        )

    def test_exclusion_accounting_and_dump_consistency(self, tmp_path):
        scen = small_scenario(snr_db=0.0)
        camp = Campaign(
            scenario=scen,
            sweep="snr_db",
            values=(0.0, 10.0),
            trials=8,
            estimators=("two_stage", "baseline_ff_music"),
        )
        out = tmp_path / "camp"
        records = run_campaign(camp, out_dir=out)
        rows = read_csv(out / "rmse.csv")
        errors = read_csv(out / "trial_errors.csv")
        for rec in records:
            sub = [
                r for r in errors
                if r["estimator"] == rec.estimator
                and float(r["sweep_value"]) == rec.sweep_value
            ]
            failed = {r["trial"] for r in sub if r["failed"] == "true"}
            succeeded = {r["trial"] for r in sub if r["failed"] == "false"}
            assert len(failed) + len(succeeded) == rec.trials_total
            assert len(failed) == rec.trials_failed
            # recompute pooled AAR RMSE from the dump
            sq = [
                float(r["aar_angle_error_deg"]) ** 2
                for r in sub
                if r["failed"] == "false"
            ]
            if sq:
                recomputed = math.sqrt(sum(sq) / len(sq))
                assert recomputed == pytest.approx(rec.aar_angle_rmse_pooled, rel=1e-12)
        pooled = [
            r for r in rows
            if r["source"] == "pooled" and r["metric"] == "aar_angle_rmse_deg"
        ]
        assert len(pooled) == 4  # 2 sweep values x 2 estimators

    def test_oracle_estimator_path(self):
        # exhaustive-search estimator wired through the campaign registry
        scen = Scenario(
            sources=(SourceTruth.from_degrees(10.0, 100.0),),
            config_compressed=ArrayConfig(8, 0.5, 0.2),
            config_extended=ArrayConfig(8, 0.5, 2.0),
            snapshots=64,
            snr_db=20.0,
            seed=3,
        )
        camp = Campaign(
            scenario=scen, sweep="none", trials=2, estimators=("oracle_2d",)
        )
        record = run_campaign(camp)[0]
        assert record.estimator == "oracle_2d"
        assert record.trials_failed == 0
        assert record.aar_angle_rmse_pooled <= 0.1
        assert record.acc_angle_rmse is None

    def test_coupled_scenario_single_shot_uses_robust_spectrum(self):
        scen = Scenario(
            sources=(
                SourceTruth.from_degrees(-20.66, 30.0),
                SourceTruth.from_degrees(10.77, 200.0),
            ),
            coupling_extended=CouplingModel(0.3, 1.0, 0.0, band=2, symmetric=True),
            snapshots=200,
            snr_db=float("inf"),
            seed=13,
        )
        bundle = run_single_shot(scen)
        from sfas.estimators import pair_estimates

        errors = pair_estimates(
            bundle.estimate.refined_angles_deg, [-20.66, 10.77]
        ).angle_errors
        # rank-reduction refinement is selected automatically and removes
        # the coupling bias to below the finest grid step
        assert np.max(np.abs(errors)) <= EstimatorSettings().pass2_angle_step_deg

    def test_crb_overlay_rows_present(self, tmp_path):
        scen = small_scenario()
        camp = Campaign(scenario=scen, sweep="snr_db", values=(0.0,), trials=2)
        out = tmp_path / "camp"
        run_campaign(camp, out_dir=out)
        rows = read_csv(out / "rmse.csv")
        crb_rows = [r for r in rows if r["estimator"] == "crb"]
        metrics = {r["metric"] for r in crb_rows}
        assert "crb1_angle_rmse_deg" in metrics
        assert "crb2_angle_rmse_deg" in metrics

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        scen = small_scenario()
        camp = Campaign(scenario=scen, sweep="snr_db", values=(5.0, 15.0), trials=4)
        out1 = tmp_path / "one"
        out4 = tmp_path / "four"
        run_campaign(camp, out_dir=out1, threads=1)
        run_campaign(camp, out_dir=out4, threads=4)
        assert (out1 / "rmse.csv").read_bytes() == (out4 / "rmse.csv").read_bytes()
        assert (out1 / "trial_errors.csv").read_bytes() == (out4 / "trial_errors.csv").read_bytes()

    def test_metadata_header_embeds_config(self, tmp_path):
        scen = small_scenario()
        camp = Campaign(scenario=scen, sweep="none", trials=1)
        out = tmp_path / "camp"
        run_campaign(camp, out_dir=out)
        head = (out / "rmse.csv").read_text().splitlines()[:2]
        assert head[0].startswith("# version: sfas")
        blob = json.loads(head[1].removeprefix("# config: "))
        assert blob["seed"] == scen.seed


class TestValidateSuite:
    def test_default_scenario_passes(self, mixed_scenario):
        checks = validate_scenario(mixed_scenario)
        assert checks
        assert all(ok for _, ok, _ in checks)


class TestCli:
    def test_validate_verb(self, capsys):
        rc = cli_main(["validate", str(SCENARIO_DIR / "single_shot_mixed.yaml")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_single_shot_verb(self, tmp_path, capsys):
        path = tmp_path / "scen.yaml"
        path.write_text(
            "seed: 3\nsnapshots: 100\nsnr_db: 20.0\n"
            "sources:\n  - {angle_deg: 10.0, range: 30.0}\n"
        )
        rc = cli_main(["single-shot", str(path), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "stage1_proposed.csv").exists()
        assert "source" in capsys.readouterr().out

    def test_campaign_verb_with_overrides(self, tmp_path, capsys):
        path = tmp_path / "camp.yaml"
        path.write_text(
            "seed: 3\nsnapshots: 100\n"
            "sources:\n  - {angle_deg: 10.0, range: 4000.0}\n"
            "campaign: {sweep: snr_db, values: [10.0], trials: 50}\n"
        )
        rc = cli_main(
            ["campaign", str(path), "--out", str(tmp_path / "out"), "--trials", "2"]
        )
        assert rc == 0
        rows = read_csv(tmp_path / "out" / "rmse.csv")
        trials_rows = [r for r in rows if r["metric"] == "trials_total"]
        assert trials_rows and all(r["value"] == "2" for r in trials_rows)

    def test_crb_verb(self, tmp_path):
        rc = cli_main(
            [
                "crb",
                str(SCENARIO_DIR / "campaign_near_field_snr.yaml"),
                "--out",
                str(tmp_path / "bounds"),
            ]
        )
        assert rc == 0
        rows = read_csv(tmp_path / "bounds" / "crb.csv")
        assert {r["metric"] for r in rows} >= {
            "crb1_angle_rmse_deg",
            "crb2_angle_rmse_deg",
            "crb1_range_rmse_wl",
            "crb2_range_rmse_wl",
        }

    def test_bad_file_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("sources:\n  - {angle_deg: 95.0, range: 100.0}\n")
        rc = cli_main(["validate", str(path)])
        assert rc == 2
        assert "error" in capsys.readouterr().err
