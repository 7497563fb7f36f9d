from __future__ import annotations

import filecmp
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sea_impedance import cli
from sea_impedance.config import (
    bundled_config,
    format_config,
    format_controller,
    load_controller,
    parse_config,
    parse_controller,
    parse_weight,
    format_weight,
)
from sea_impedance.errors import ConfigError, DimensionMismatch
from sea_impedance.lti import Polynomial, RationalTransferFunction as TF
from sea_impedance.sea import DesiredImpedance, SeaParameters
from sea_impedance.synthesis import SynthesisBounds

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "sea_impedance" / "configs"
CASE_03 = CONFIG_DIR / "stiffness_0.3.ini"


def edited(tmp_path, pattern, replacement, name="edited.ini"):
    lines = CASE_03.read_text().splitlines()
    out = [replacement if ln.startswith(pattern) else ln for ln in lines]
    p = tmp_path / name
    p.write_text("\n".join(out) + "\n")
    return p


# --- configuration ---------------------------------------------------------


@pytest.mark.parametrize("name", ["defaults", "0.3", "0.6", "0.9", "general"])
def test_bundled_round_trip(name):
    cfg = bundled_config(name)
    assert parse_config(format_config(cfg)) == cfg


def test_defaults_are_the_platform_table():
    cfg = bundled_config("defaults")
    assert cfg.sea == SeaParameters()
    assert cfg.weights.W_u(0.0) == pytest.approx(1 / 44)


pos = st.floats(1e-4, 1e2, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(pos, pos, pos, pos, st.floats(1e-3, 1.0), pos, pos)
def test_random_config_round_trip(J, Ks, Kd, ge, eps, gu, cutoff):
    base = bundled_config("general")
    cfg = replace(
        base,
        sea=replace(base.sea, J_A=J, K_s=Ks),
        impedance=DesiredImpedance(base.impedance.M_d, base.impedance.B_d, Kd),
        bounds=SynthesisBounds(ge, gu),
        phi_filter=replace(base.phi_filter, cutoff=cutoff * 10),
    )
    cfg = replace(cfg, weights=replace(base.weights, epsilon=min(eps, 0.999), W_phi=cfg.phi_filter.tf()))
    assert parse_config(format_config(cfg)) == cfg


def test_rational_weight_syntax():
    w = parse_weight("[0.1, 0] / [1, 10]")
    assert w.numerator == Polynomial([0.0, 0.1]) and w.denominator == Polynomial([10.0, 1.0])
    assert parse_weight(format_weight(w)) == w
    assert parse_weight("1e-1") == TF.constant(0.1)


def test_missing_key_is_named(tmp_path):
    p = edited(tmp_path, "K_s", "")
    with pytest.raises(ConfigError) as exc:
        cli.load_config(p)
    assert exc.value.key == "K_s" and "K_s" in str(exc.value)


def test_unknown_key_has_line(tmp_path):
    p = edited(tmp_path, "K_pv", "K_pvv = 0.0457")
    with pytest.raises(ConfigError) as exc:
        cli.load_config(p)
    assert exc.value.key == "K_pvv" and exc.value.line == 8


def test_bad_value_and_unknown_section(tmp_path):
    with pytest.raises(ConfigError) as exc:
        cli.load_config(edited(tmp_path, "K_iv", "K_iv = fast"))
    assert exc.value.key == "K_iv"
    text = CASE_03.read_text() + "\n[extras]\nfoo = 1\n"
    with pytest.raises(ConfigError):
        parse_config(text)


def test_empty_duration_rejected(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(edited(tmp_path, "duration", "duration = 0"))


def test_invalid_physics_rejected(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(edited(tmp_path, "J_A", "J_A = -1"))


# --- controller files ------------------------------------------------------


def test_controller_round_trip_exact(bundled_cases):
    k = bundled_cases["0.3"].controller
    back = parse_controller(format_controller(k))
    for name in ("A_k", "B_k", "C_k", "D_k"):
        assert np.array_equal(getattr(back, name), getattr(k, name))


def test_controller_file_errors(bundled_cases):
    text = format_controller(bundled_cases["0.3"].controller)
    with pytest.raises(DimensionMismatch):
        parse_controller(text.replace("order 4", "order 3"))
    with pytest.raises(ConfigError):
        parse_controller("A_k 1 1\n-1\n")
    lines = text.splitlines()
    i = lines.index("B_k 4 2")
    lines[i + 1] = "1.0"
    with pytest.raises(ConfigError):
        parse_controller("\n".join(lines))


# --- commands --------------------------------------------------------------


def test_synth_simulate_bode_passivity(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["synth", "--config", str(CASE_03), "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert "pass = True" in report
    k = load_controller(out / "controller.txt")
    assert k.order == 4
    ctl = str(out / "controller.txt")
    assert cli.main(["simulate", "--config", str(CASE_03), "--controller", ctl, "--out", str(out)]) == 0
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == "time_s,phi_L_rad,tau_d_Nm,tau_L_Nm,e_Nm,omega_d_rad_s"
    printed = capsys.readouterr().out
    assert "max_abs_error" in printed and "max_abs_control" in printed and "max_abs_tau_d" in printed
    assert cli.main(["bode", "--config", str(CASE_03), "--controller", ctl, "--out", str(out)]) == 0
    for name in ("bode_Zd.csv", "bode_Za.csv", "bode_WphiZd.csv"):
        assert (out / name).read_text().splitlines()[0] == "omega_rad_s,mag_db,phase_deg"
    assert cli.main(["passivity", "--config", str(CASE_03), "--controller", ctl]) == 0
    assert not list(out.glob(".*.tmp"))


def test_synth_report_within_bounds(tmp_path):
    cli.main(["synth", "--config", str(CASE_03), "--out", str(tmp_path)])
    text = (tmp_path / "report.txt").read_text()
    hinf = float(text.split("hinf(w->e_w) = ")[1].split()[0])
    h2 = float(text.split("h2(w->u_w) = ")[1].split()[0])
    assert hinf <= 0.0580 and h2 <= 43.4


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["synth", "--config", str(edited(tmp_path, "gamma_e", "gamma_e = 1e-9")), "--out", str(tmp_path)]) == 1
    assert "Infeasible" in capsys.readouterr().out
    assert cli.main(["synth", "--config", str(edited(tmp_path, "K_s", ""))]) == 3
    assert "K_s" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 3


def test_simulate_dimension_mismatch(tmp_path):
    bad = tmp_path / "k.txt"
    bad.write_text("A_k 1 1\n-1.0\nB_k 1 3\n0 0 0\nC_k 1 1\n0\n")
    assert cli.main(["simulate", "--config", str(CASE_03), "--controller", str(bad), "--out", str(tmp_path)]) == 3


def test_passivity_exit_code_on_failure(tmp_path, bundled_cases):
    ctl = tmp_path / "k.txt"
    ctl.write_text(format_controller(bundled_cases["general"].controller))
    cfg = CONFIG_DIR / "general.ini"
    assert cli.main(["passivity", "--config", str(cfg), "--controller", str(ctl)]) == 2


def test_reproduce_subset_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["reproduce", "--cases", "0.6", "--out", str(a)]) == 0
    table = capsys.readouterr().out
    assert cli.main(["reproduce", "--cases", "0.6", "--out", str(b)]) == 0
    rows = [ln for ln in table.splitlines() if ln.startswith("0.6 ")]
    assert len(rows) == 1
    for name in ("trace.csv", "bode_Za.csv", "bode_Zd.csv", "controller.txt"):
        assert filecmp.cmp(a / "0.6" / name, b / "0.6" / name, shallow=False)


def test_reproduce_tightened_row_fails(tmp_path, capsys):
    code = cli.main(["reproduce", "--cases", "0.3,0.6", "--scale-bounds", "0.3=0.01", "--out", str(tmp_path)])
    assert code != 0
    out = capsys.readouterr().out
    row03 = next(ln for ln in out.splitlines() if ln.startswith("0.3 "))
    row06 = next(ln for ln in out.splitlines() if ln.startswith("0.6 "))
    assert "FAIL" in row03 and row06.rstrip().endswith("ok")


def test_reproduce_rejects_unknown_case():
    assert cli.main(["reproduce", "--cases", "0.5"]) == 3
