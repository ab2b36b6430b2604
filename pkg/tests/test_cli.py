import json

import numpy as np
import pytest

from vbodmr import cli
from vbodmr.cli import IngestError, SchemaError, ingest_csv, validate_config
from vbodmr.spectrum import SpectrumModel, default_grid, mixture_spectrum


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def write_curve_csv(tmp_path, name="measured.csv", rows=801, with_sigma=False):
    model = SpectrumModel(
        f_center=2308.0, contrast=0.11, linewidth=51.0, a14=43.0, a15=64.0, p15=1.0
    )
    grid = default_grid(2308.0, points=rows)
    curve = mixture_spectrum(model, grid)
    path = tmp_path / name
    header = "frequency_mhz,ratio,sigma" if with_sigma else "frequency_mhz,ratio"
    lines = [header]
    for f, v in zip(curve.frequencies, curve.values):
        lines.append(f"{float(f)!r},{float(v)!r}" + (",0.002" if with_sigma else ""))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# --- ingestion -----------------------------------------------------------------

def test_ingest_well_formed(tmp_path):
    path = write_curve_csv(tmp_path, rows=801)
    meas = ingest_csv(path)
    assert meas.n_samples == 801
    assert meas.metadata["rows"] == 801
    assert meas.sigmas is None


def test_ingest_with_sigma_column(tmp_path):
    path = write_curve_csv(tmp_path, rows=101, with_sigma=True)
    meas = ingest_csv(path)
    assert meas.sigmas is not None
    assert np.all(meas.sigmas == 0.002)


def test_ingest_header_only_fails(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("frequency_mhz,ratio\n", encoding="utf-8")
    with pytest.raises(IngestError, match="insufficient samples"):
        ingest_csv(path)


def test_ingest_sorts_unsorted_rows(tmp_path):
    path = tmp_path / "unsorted.csv"
    rows = ["frequency_mhz,ratio"] + [f"{f},1.0" for f in (5, 3, 8, 1, 7, 2, 6, 4)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    meas = ingest_csv(path)
    assert np.array_equal(meas.frequencies, np.arange(1.0, 9.0))


def test_ingest_reports_malformed_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    rows = ["frequency_mhz,ratio"] + [f"{f},1.0" for f in range(8)]
    rows[4] = "3,not_a_number"  # header is line 1, so this is file line 5
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    with pytest.raises(IngestError, match=":5:"):
        ingest_csv(path)


def test_ingest_rejects_duplicates_and_bad_header(tmp_path):
    path = tmp_path / "dup.csv"
    rows = ["frequency_mhz,ratio"] + [f"{f},1.0" for f in (1, 2, 2, 3, 4, 5, 6, 7)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    with pytest.raises(IngestError, match="duplicate"):
        ingest_csv(path)
    path2 = tmp_path / "hdr.csv"
    path2.write_text("freq,ratio\n1,1\n", encoding="utf-8")
    with pytest.raises(IngestError, match="header"):
        ingest_csv(path2)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(IngestError, match="not found"):
        ingest_csv(tmp_path / "nope.csv")


# --- schema --------------------------------------------------------------------

def test_schema_rejects_unknown_keys_exhaustively():
    config = {
        "simulate": {
            "model": {
                "f_center_mhz": 2308.0,
                "contrast": 0.1,
                "linewidth_mhz": 50.0,
                "p15": 1.0,
                "typo_key": 1,
            },
            "bogus": True,
        },
        "mystery": 3,
    }
    with pytest.raises(SchemaError) as err:
        validate_config(config, "simulate")
    text = str(err.value)
    assert "mystery" in text and "bogus" in text and "typo_key" in text


def test_schema_requires_command_block():
    with pytest.raises(SchemaError, match="missing 'fit' block"):
        validate_config({"simulate": {}}, "fit")


def test_schema_type_checks():
    config = {
        "simulate": {
            "model": {
                "f_center_mhz": "not a number",
                "contrast": 0.1,
                "linewidth_mhz": 50.0,
                "p15": 1.0,
            }
        }
    }
    with pytest.raises(SchemaError, match="wrong type"):
        validate_config(config, "simulate")


# --- simulate ------------------------------------------------------------------

SIM_BLOCK = {
    "model": {
        "f_center_mhz": 2308.0,
        "contrast": 0.11,
        "linewidth_mhz": 51.0,
        "a15_mhz": -64.0,
        "p15": 1.0,
    },
    "noise_sigma": 0.002,
}


def test_simulate_deterministic_outputs(tmp_path):
    config = write_config(tmp_path, {"simulate": SIM_BLOCK, "seed": 42})
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli.main(["simulate", "--config", config, "--out", str(out1), "--quiet"]) == 0
    assert cli.main(["simulate", "--config", config, "--out", str(out2), "--quiet"]) == 0
    assert (out1 / "curve.csv").read_bytes() == (out2 / "curve.csv").read_bytes()
    assert (out1 / "simulate.json").read_bytes() == (out2 / "simulate.json").read_bytes()
    report = json.loads((out1 / "simulate.json").read_text())
    assert report["schema_version"] == "1"
    assert report["model"]["binomial_fractions"] == [0.0, 0.0, 0.0, 1.0]


def test_simulate_rejects_bad_p15(tmp_path, capsys):
    block = {"model": dict(SIM_BLOCK["model"], p15=1.5)}
    config = write_config(tmp_path, {"simulate": block})
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", config, "--out", str(out)]) == 1
    assert not out.exists()


def test_simulate_unknown_key_aborts_before_writing(tmp_path):
    config = write_config(tmp_path, {"simulate": dict(SIM_BLOCK, wrong=1)})
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", config, "--out", str(out)]) == 1
    assert not out.exists()


# --- fit -----------------------------------------------------------------------

def test_fit_round_trip_via_cli(tmp_path):
    sim_config = write_config(
        tmp_path, {"simulate": SIM_BLOCK, "seed": 7}, name="sim.json"
    )
    out = tmp_path / "sim_out"
    assert cli.main(["simulate", "--config", sim_config, "--out", str(out), "--quiet"]) == 0
    fit_config = write_config(
        tmp_path,
        {
            "fit": {
                "input_csv": str(out / "curve.csv"),
                "model": "physical",
                "p15": 1.0,
                "d_gs_mhz": 3466.0,
            }
        },
        name="fit.json",
    )
    fit_out = tmp_path / "fit_out"
    assert cli.main(["fit", "--config", fit_config, "--out", str(fit_out), "--quiet"]) == 0
    report = json.loads((fit_out / "fit.json").read_text())
    assert report["fit"]["converged"] is True
    assert report["fit"]["params"]["a15"]["value"] == pytest.approx(64.0, abs=2.0)
    assert report["derived"]["field_mt"] == pytest.approx((3466.0 - 2308.0) / 28.0, abs=0.2)


def test_fit_quartet_polarization_report(tmp_path):
    sim_block = {
        "model": dict(SIM_BLOCK["model"], polarization=0.16),
        "noise_sigma": 0.002,
    }
    sim_config = write_config(tmp_path, {"simulate": sim_block, "seed": 3}, name="s.json")
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", sim_config, "--out", str(out), "--quiet"]) == 0
    fit_config = write_config(
        tmp_path,
        {
            "fit": {
                "input_csv": str(out / "curve.csv"),
                "model": "free_lorentzians",
                "n_lines": 4,
                "polarization": True,
            }
        },
        name="f.json",
    )
    fit_out = tmp_path / "fout"
    assert cli.main(["fit", "--config", fit_config, "--out", str(fit_out), "--quiet"]) == 0
    report = json.loads((fit_out / "fit.json").read_text())
    assert "polarization" in report["derived"]
    assert report["derived"]["polarization"] == pytest.approx(0.16, abs=0.02)
    assert report["derived"]["m_tot_assignment"]


def test_simulate_strong_polarization_on_pure_sample(tmp_path):
    # representable on the quartet ladder even though it would not be on #0
    block = {"model": dict(SIM_BLOCK["model"], polarization=0.3)}
    config = write_config(tmp_path, {"simulate": block})
    out = tmp_path / "pol_out"
    assert cli.main(["simulate", "--config", config, "--out", str(out), "--quiet"]) == 0
    assert (out / "curve.csv").exists()


def test_fit_missing_input_exits_2_without_output(tmp_path):
    fit_config = write_config(
        tmp_path, {"fit": {"input_csv": str(tmp_path / "absent.csv"), "p15": 1.0}}
    )
    out = tmp_path / "never"
    assert cli.main(["fit", "--config", fit_config, "--out", str(out)]) == 2
    assert not out.exists()


def test_fit_nonconvergence_exits_3_with_partial_report(tmp_path, monkeypatch):
    from vbodmr.fit import FitResult

    def fake_fit(meas, init=None, p15_mode=("fixed", 0.0), **kwargs):
        return FitResult(
            names=("f_center",),
            values={"f_center": 0.0},
            sigmas={"f_center": 0.0},
            covariance=np.zeros((1, 1)),
            residual_norm=1.0,
            iterations=500,
            converged=False,
        )

    monkeypatch.setattr(cli.fitmod, "fit_physical", fake_fit)
    csv_path = write_curve_csv(tmp_path)
    fit_config = write_config(
        tmp_path, {"fit": {"input_csv": str(csv_path), "p15": 1.0}}
    )
    out = tmp_path / "partial"
    assert cli.main(["fit", "--config", fit_config, "--out", str(out), "--quiet"]) == 3
    report = json.loads((out / "fit.json").read_text())
    assert report["fit"]["converged"] is False


# --- other commands --------------------------------------------------------------

def test_sensitivity_command(tmp_path):
    model = {
        "f_center_mhz": 2308.0,
        "contrast": 0.1,
        "linewidth_mhz": 50.0,
        "a14_mhz": 43.0,
        "a15_mhz": 64.0,
    }
    config = write_config(
        tmp_path,
        {
            "sensitivity": {
                "model_a": dict(model, p15=1.0),
                "model_b": dict(model, p15=0.0),
                "normalization": "per_contrast",
            }
        },
    )
    out = tmp_path / "sens"
    assert cli.main(["sensitivity", "--config", config, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "sensitivity.json").read_text())
    gain = report["max_slope_a_per_mhz"] / report["max_slope_b_per_mhz"]
    assert gain == pytest.approx(1.8, abs=0.05)
    assert (out / "slope_a.csv").exists() and (out / "slope_b.csv").exists()
    header = (out / "slope_a.csv").read_text().splitlines()[0]
    assert header == "frequency_mhz,slope_per_mhz"


def test_polarization_command_with_areas(tmp_path):
    config = write_config(
        tmp_path,
        {
            "polarization": {
                "areas": {"-1.5": 1.0, "-0.5": 3.0, "0.5": 3.8, "1.5": 1.6},
                "m_max": 1.5,
            }
        },
    )
    out = tmp_path / "pol"
    assert cli.main(["polarization", "--config", config, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "polarization.json").read_text())
    assert report["polarization"] == pytest.approx(1.3 / 14.1, abs=1e-12)


def test_raman_command(tmp_path):
    config = write_config(
        tmp_path,
        {
            "raman": {
                "points": [
                    {"nitrogen_frac_15": 0.0},
                    {"nitrogen_frac_15": 0.6},
                    {"nitrogen_frac_15": 1.0, "boron_frac_10": 0.199},
                ]
            }
        },
    )
    out = tmp_path / "raman"
    assert cli.main(["raman", "--config", config, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "raman.json").read_text())
    shifts = [p["shift_cm1"] for p in report["points"]]
    assert shifts[0] == pytest.approx(1364.6, abs=0.1)
    assert shifts[2] == pytest.approx(1345.0, abs=0.1)
    assert shifts[0] > shifts[1] > shifts[2]


# --- validate ----------------------------------------------------------------------

def test_validate_default_passes(tmp_path):
    out = tmp_path / "val"
    assert cli.main(["validate", "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "validate.json").read_text())
    assert report["passed"] is True
    assert {g["name"] for g in report["groups"]} == {
        "eigensolver",
        "ladder",
        "oracle_equivalence",
        "slope_ratio",
    }


def test_validate_injected_wrong_ladder_fails(tmp_path):
    config = write_config(
        tmp_path,
        {"validate": {"ladder_table": {"0": [1, 3, 6, 8, 6, 3, 1]}}},
    )
    out = tmp_path / "val"
    assert cli.main(["validate", "--config", config, "--out", str(out), "--quiet"]) == 1
    report = json.loads((out / "validate.json").read_text())
    ladder = next(g for g in report["groups"] if g["name"] == "ladder")
    assert ladder["passed"] is False
    assert ladder["mismatches"]


def test_validate_tightened_eigen_tolerance_reports_residual(tmp_path):
    config = write_config(tmp_path, {"validate": {"eigensolver_tolerance": 1e-15}})
    out = tmp_path / "val"
    assert cli.main(["validate", "--config", config, "--out", str(out), "--quiet"]) == 1
    report = json.loads((out / "validate.json").read_text())
    eig = next(g for g in report["groups"] if g["name"] == "eigensolver")
    assert eig["passed"] is False
    assert eig["measured_residual"] > 1e-15
    assert eig["tolerance"] == 1e-15


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as err:
        cli.main(["no_such_command"])
    assert err.value.code == 1
