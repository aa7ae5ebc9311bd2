import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from dissonance.cli import main, parse_state, state_json
from dissonance.correlations import MdmsParams, mdms_state
from dissonance.exceptions import ContractError, ParseError
from dissonance.qmath import DensityMatrix
from dissonance.scenarios import (
    SCENARIO_DEFAULTS,
    ScenarioConfig,
    dissonance_peak,
    run_scenario,
    sweep_values,
    zero_eof_peak,
)

FAST_ANNEAL = ["--stages", "3", "--iters_per_stage", "2000", "--restarts", "2"]


def parse_csv(text: str):
    meta = [ln for ln in text.splitlines() if ln.startswith("# ")]
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("# "))
    rows = list(csv.reader(io.StringIO(body)))
    header, data = rows[0], np.array([[float(x) for x in r] for r in rows[1:]])
    return meta, header, data


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write_state(tmp_path, rho: DensityMatrix, name="state.json"):
    p = tmp_path / name
    p.write_text(state_json(rho))
    return str(p)


# --- scenarios --------------------------------------------------------------------


def test_lindblad_defaults(capsys):
    code, out, _ = run(["lindblad"], capsys)
    assert code == 0
    _, header, data = parse_csv(out)
    assert header[:5] == ["t", "p_1", "p_2", "p_3", "p_4"]
    assert data[0, 0] == 0 and data[-1, 0] == pytest.approx(10.0)
    last = dict(zip(header, data[-1]))
    assert last["discord"] == pytest.approx(1 / 3, abs=1e-4)
    assert last["classical"] == pytest.approx(5 / 3 - np.log2(3), abs=1e-4)
    assert last["concurrence"] == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(data[:, 1:5].sum(axis=1), 1.0, atol=1e-6)


def test_cavity_defaults(capsys):
    code, out, _ = run(["cavity"], capsys)
    meta, header, data = parse_csv(out)
    assert code == 0
    t = data[:, 0]
    i = int(np.argmin(np.abs(t - 0.75)))
    np.testing.assert_allclose(data[i, 1:4], [1 / 3] * 3, atol=0.02)
    col = {h: data[:, k] for k, h in enumerate(header)}
    k = int(dissonance_peak(col["discord"], col["concurrence"]))
    assert col["discord"][k] == pytest.approx(1 / 3, abs=3e-3)
    assert col["concurrence"][k] == 0.0
    assert any(m.startswith("# dissonance_peak: t=0.759") for m in meta)


def test_dicke_scenario(capsys):
    code, out, _ = run(["dicke"], capsys)
    meta, header, data = parse_csv(out)
    assert code == 0
    assert header[1:4] == ["p_ee_D0", "p_plus_D1", "p_gg_D2"]
    assert any(m.startswith("# omega12: 0.0946428571") for m in meta)


def test_sweep_single_point_equals_cavity_maximum(capsys):
    _, out, _ = run(["cavity"], capsys)
    _, header, data = parse_csv(out)
    col = {h: data[:, k] for k, h in enumerate(header)}
    k = int(dissonance_peak(col["discord"], col["concurrence"]))
    code, out, _ = run(["sweep", "--lo", "1.07", "--hi", "1.07", "--steps", "1"], capsys)
    assert code == 0
    _, header, data = parse_csv(out)
    assert header == ["delta", "max_discord", "t_at_max", "concurrence_at_max"]
    assert data.shape == (1, 4)
    assert data[0, 1] == pytest.approx(col["discord"][k], abs=1e-8)
    assert data[0, 2] == pytest.approx(col["t"][k])


def test_cavity_sweep_small(capsys):
    code, out, _ = run(["cavity-sweep", "--lo", "1.0", "--hi", "1.2", "--steps", "5"], capsys)
    assert code == 0
    _, _, data = parse_csv(out)
    np.testing.assert_allclose(data[:, 0], np.linspace(1.0, 1.2, 5))
    assert np.all(data[:, 1] > 0.33)
    assert np.all(data[:, 3] < 1e-3)


def test_mdms_sweep(capsys):
    code, out, _ = run(["sweep", "--target", "mdms", "--param", "epsilon", "--lo", "0", "--hi", "1", "--steps",
                        "101", "--m", "0.5"], capsys)
    assert code == 0
    _, header, data = parse_csv(out)
    assert header == ["epsilon", "mutual_information", "classical", "discord", "concurrence"]
    eps, conc = data[:, 0], data[:, 4]
    assert np.all(conc[eps <= 0.5] == 0)
    assert np.all(conc[eps > 0.5 + 1e-9] > 0)


def test_dicke_sweep_over_bath_size(capsys):
    code, out, _ = run(["sweep", "--target", "dicke", "--param", "N", "--lo", "11", "--hi", "13", "--steps", "3"],
                       capsys)
    assert code == 0
    _, header, data = parse_csv(out)
    assert header[0] == "N"
    np.testing.assert_array_equal(data[:, 0], [11, 12, 13])


def test_sweep_rejects_unknown_param(capsys):
    code, _, err = run(["sweep", "--target", "cavity", "--param", "N"], capsys)
    assert code == 2
    assert "cannot be swept" in err


def test_qutrit_family_small(capsys):
    code, out, _ = run(["qutrit-family", "--lo", "0.1", "--hi", "0.3", "--steps", "3", *FAST_ANNEAL], capsys)
    assert code == 0
    meta, header, data = parse_csv(out)
    assert header == ["epsilon", "mutual_information", "classical", "discord", "ppt_min_eigenvalue", "eof"]
    mid = dict(zip(header, data[1]))
    assert mid["eof"] < 5e-3
    assert mid["discord"] == pytest.approx(0.5924, abs=1e-3)
    assert np.isnan(data[0, 5])  # epsilon = 0.1 fails PPT screening
    assert data[0, 4] < -1e-6
    assert any("zero_eof_peak: epsilon=0.2" in m for m in meta)


def test_qutrit_cavity_small(capsys):
    code, out, _ = run(["qutrit-cavity", "--t_max", "1.0", "--coarse_dt", "0.25", "--fine_dt", "0.05",
                        "--refine_halfwidth", "0.1", *FAST_ANNEAL], capsys)
    assert code == 0
    meta, header, data = parse_csv(out)
    assert header[:6] == ["t", "p_D4", "p_D3", "p_D2", "p_D1", "p_D0"]
    np.testing.assert_allclose(data[:, 1:6].sum(axis=1), 1.0, atol=1e-6)
    assert np.all(np.diff(data[:, 0]) > 0)
    assert len(data) <= 200
    assert any(m.startswith("# evaluation_grid:") for m in meta)
    assert any(m.startswith("# dissonance_peak: t=") for m in meta)


# --- reproducibility and format -----------------------------------------------


def test_rerun_is_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "qutrit-family", "seed": 3,
                               "parameters": {"lo": 0.2, "hi": 0.2, "steps": 1, "stages": 2,
                                              "iters_per_stage": 500, "restarts": 2}}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["qutrit-family", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["qutrit-family", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    assert b"# seed: 3" in a.read_bytes()


def test_nine_significant_digits(capsys):
    _, out, _ = run(["lindblad", "--t_max", "1", "--dt", "0.5"], capsys)
    _, _, data = parse_csv(out)
    line = [ln for ln in out.splitlines() if ln.startswith("0.5,")][0]
    assert line.split(",")[1] == f"{data[1, 1]:.9g}"
    assert len(line.split(",")[1].replace("0.", "").lstrip("0")) <= 9


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "cavity", "parameters": {"delta": 0.5, "t_max": 0.5}}))
    _, out, _ = run(["cavity", "--config", str(cfg), "--delta", "0.7"], capsys)
    params = json.loads([m for m in out.splitlines() if m.startswith("# parameters:")][0][len("# parameters: "):])
    assert params["delta"] == 0.7 and params["t_max"] == 0.5


def test_config_unknown_keys_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "cavity", "extra": 1}))
    code, _, err = run(["cavity", "--config", str(cfg)], capsys)
    assert code == 2 and "extra" in err
    cfg.write_text(json.dumps({"scenario": "cavity", "parameters": {"detuning": 1}}))
    code, _, err = run(["cavity", "--config", str(cfg)], capsys)
    assert code == 2 and "detuning" in err


def test_config_parse_error_has_line(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{\n  "scenario": "cavity",\n  "parameters": {\n')
    code, _, err = run(["cavity", "--config", str(cfg)], capsys)
    assert code == 2 and "line 4" in err


def test_usage_errors(capsys):
    assert run(["nonsense"], capsys)[0] == 1
    assert run(["cavity", "--bogus", "1"], capsys)[0] == 1
    assert run(["cavity", "--delta"], capsys)[0] == 1
    assert run(["cavity", "--delta", "abc"], capsys)[0] == 1
    assert run(["measure"], capsys)[0] == 1
    assert run([], capsys)[0] == 1


def test_validation_error_exit_code(capsys):
    code, _, err = run(["cavity", "--dt", "-1"], capsys)
    assert code == 2 and "invalid input" in err


def test_unwritable_output(tmp_path, capsys):
    code, _, err = run(["lindblad", "--t_max", "0.1", "--out", str(tmp_path / "missing" / "x.csv")], capsys)
    assert code == 1 and "I/O" in err


def test_scenario_config_object():
    cfg = ScenarioConfig("cavity", {"delta": 0.0})
    assert cfg.parameters["n"] == 0
    with pytest.raises(ValueError):
        ScenarioConfig("cavity", {"nope": 1})
    table = run_scenario(cfg.with_parameters(t_max=0.1))
    assert table.columns[0] == "t"


def test_every_scenario_has_defaults():
    assert set(SCENARIO_DEFAULTS) == {"lindblad", "cavity", "cavity-sweep", "dicke", "qutrit-family",
                                      "qutrit-cavity", "sweep", "measure"}


def test_population_check():
    from dissonance.scenarios import Table

    with pytest.raises(ContractError):
        Table(["t", "p_a", "p_b"], np.array([[0.0, 0.6, 0.6]])).check_populations()


def test_peak_helpers():
    q = np.array([0.1, 0.3, 0.3, 0.9, 0.2])
    c = np.array([0.0, 0.0, 0.0, 0.5, 0.0])
    assert dissonance_peak(q, c) == 1
    assert dissonance_peak(q, np.ones(5)) == -1
    assert dissonance_peak(q, np.zeros(5)) == 3
    assert zero_eof_peak(q, np.array([0, 0, 0, np.nan, 0.0]), 5e-3) == 1
    np.testing.assert_array_equal(sweep_values(0.0, 1.0, 3), [0, 0.5, 1])
    np.testing.assert_array_equal(sweep_values(2.0, 2.0, 7), [2.0])


# --- measure ---------------------------------------------------------------------


def measure_output(out: str) -> dict:
    return dict(line.split(": ", 1) for line in out.strip().splitlines())


def test_measure_dissonant_state(tmp_path, capsys):
    path = write_state(tmp_path, mdms_state(MdmsParams(1 / 3, 0.5)))
    code, out, _ = run(["measure", path], capsys)
    assert code == 0
    d = measure_output(out)
    assert float(d["discord"]) == pytest.approx(0.333333, abs=1e-6)
    assert float(d["classical"]) == pytest.approx(0.081704, abs=1e-6)
    assert float(d["entanglement_concurrence"]) == pytest.approx(0.0, abs=1e-9)
    assert d["optimal_measurement"].startswith("sigma_z")


def test_measure_bell_and_mixed(tmp_path, capsys):
    bell = DensityMatrix.from_ket(np.array([1, 0, 0, 1]) / np.sqrt(2), (2, 2))
    _, out, _ = run(["measure", write_state(tmp_path, bell)], capsys)
    d = measure_output(out)
    vals = [float(d[k]) for k in ("mutual_information", "classical", "discord", "entanglement_concurrence")]
    assert vals == pytest.approx([2, 1, 1, 1], abs=1e-9)
    _, out, _ = run(["measure", write_state(tmp_path, DensityMatrix.maximally_mixed((2, 2)))], capsys)
    d = measure_output(out)
    vals = [float(d[k]) for k in ("mutual_information", "classical", "discord", "entanglement_concurrence")]
    assert vals == pytest.approx([0, 0, 0, 0], abs=1e-9)


def test_measure_qutrits_with_csv(tmp_path, capsys):
    from dissonance.dynamics import qutrit_family_state

    path = write_state(tmp_path, qutrit_family_state(0.2))
    out_csv = tmp_path / "m.csv"
    code, out, _ = run(["measure", path, "--out", str(out_csv), *FAST_ANNEAL], capsys)
    assert code == 0
    d = measure_output(out)
    assert float(d["discord"]) == pytest.approx(0.5924, abs=1e-3)
    assert float(d["entanglement_eof"]) < 5e-3
    assert out_csv.read_text().splitlines()[1].startswith("mutual_information,")


def test_measure_nested_matrix_layout(tmp_path):
    rho = mdms_state(MdmsParams(0.4, 0.3))
    flat = json.loads(state_json(rho))
    nested = {"dims": [2, 2], "matrix": [flat["matrix"][4 * i:4 * i + 4] for i in range(4)]}
    np.testing.assert_allclose(parse_state(json.dumps(nested)).matrix, rho.matrix)


@pytest.mark.parametrize(
    "doc,needle",
    [
        ('{"dims": [2, 2]}', "missing field 'matrix'"),
        ('{"dims": [2, 2], "matrix": [[1, 0]]}', "has 1 entries"),
        ('{"dims": [2, "x"], "matrix": []}', "'dims'"),
        ('{"dims": [1], "matrix": [[1, 0, 0]]}', "matrix[0]"),
        ('{"dims": [1], "matrix": [[1, 0]], "comment": 1}', "unknown field"),
        ('{"dims": [1],\n "matrix": [[1, 0]],,}', "line 2"),
    ],
)
def test_parse_errors_are_located(doc, needle):
    with pytest.raises(ParseError) as e:
        parse_state(doc, "s.json")
    assert needle in str(e.value)


def test_invalid_state_names_invariant(tmp_path, capsys):
    p = tmp_path / "bad.json"
    m = [[0.5, 0], [0.5, 0], [0, 0], [0.5, 0]]  # not Hermitian
    p.write_text(json.dumps({"dims": [2], "matrix": m}))
    code, _, err = run(["measure", str(p)], capsys)
    assert code == 2 and "Hermitian" in err
    p.write_text(json.dumps({"dims": [2], "matrix": [[0.7, 0], [0, 0], [0, 0], [0.7, 0]]}))
    code, _, err = run(["measure", str(p)], capsys)
    assert code == 2 and "trace" in err
    p.write_text(json.dumps({"dims": [2], "matrix": [[1.2, 0], [0, 0], [0, 0], [-0.2, 0]]}))
    code, _, err = run(["measure", str(p)], capsys)
    assert code == 2 and "eigenvalue" in err


def test_measure_missing_file(tmp_path, capsys):
    code, _, err = run(["measure", str(tmp_path / "none.json")], capsys)
    assert code == 1 and "I/O" in err


def test_measure_unsupported_dims(tmp_path, capsys):
    code, _, err = run(["measure", write_state(tmp_path, DensityMatrix.maximally_mixed((2, 3)))], capsys)
    assert code == 2 and "not supported" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dissonance", "lindblad", "--t_max", "0.05", "--dt", "0.05"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[-1].startswith("0.05,")
