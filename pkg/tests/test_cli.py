import json
import subprocess
import sys

import pytest

from spin1ent.cli import RunConfig, main


def run(*args):
    return main(list(args))


def data_rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def test_jeff_scaling(tmp_path):
    out = tmp_path / "s.csv"
    assert run("jeff-scaling", "--L", "2,4,6", "--backend", "full", "-o", str(out)) == 0
    header, rows = data_rows(out)
    assert header[:3] == ["L", "j_eff", "omega0"]
    assert [r[0] for r in rows] == ["2", "4", "6"]
    text = out.read_text()
    assert text.startswith("# spin1ent")
    assert "# fit:" in text


def test_jeff_surface_flags_out_of_window(tmp_path):
    out = tmp_path / "surf.csv"
    code = run("jeff-surface", "--L", "4", "--Ts", "0.05,0.1", "--thetas", "0.0,0.4", "-o", str(out))
    assert code == 0
    header, rows = data_rows(out)
    assert header == ["T", "theta", "j_eff", "validity"]
    assert len(rows) == 4
    flagged = [r for r in rows if r[1] == "0.4"]
    assert flagged and all(r[3] != "ok" for r in flagged)


def test_decoherence_and_teleport(tmp_path):
    d = tmp_path / "d.csv"
    t = tmp_path / "t.csv"
    common = ["--j-eff", "0.02", "--t-max", "5", "--n-t", "11"]
    assert run("decoherence", *common, "-o", str(d)) == 0
    assert run("teleport", *common, "-o", str(t)) == 0
    header, rows = data_rows(d)
    assert header[0] == "t" and "C_free_kraus" in header and len(rows) == 11
    assert "interacting_vs_free_sup_norm" in d.read_text()
    header, rows = data_rows(t)
    assert header == ["t", "F_formula", "F_quadrature", "F_paper_eq14", "above_two_thirds"]
    assert "t_star" in t.read_text()


def test_deterministic_output(tmp_path):
    # the output path is recorded in the header, so reuse it
    out = tmp_path / "a.csv"
    texts = []
    for _ in range(2):
        assert run("jeff-scaling", "--L", "2,4", "--seed", "3", "-o", str(out)) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_config_round_trip(tmp_path):
    cfg = RunConfig(command="jeff-scaling", L=[2, 4], J_p=0.05, seed=9)
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"L": [2, 4], "J_p": 0.05}))
    out = tmp_path / "o.csv"
    assert run("jeff-scaling", "--config", str(path), "--J-p", "0.07", "-o", str(out)) == 0
    meta = [ln for ln in out.read_text().splitlines() if ln.startswith("# config:")][0]
    stored = json.loads(meta.split(":", 1)[1])
    assert stored["L"] == [2, 4] and stored["J_p"] == 0.07


@pytest.mark.parametrize("args,code", [
    (["jeff-scaling", "--L", ""], 2),
    (["jeff-scaling", "--L", "x"], 2),
    (["no-such-command"], 2),
    (["jeff-scaling", "--L", "3"], 3),
    (["jeff-scaling", "--theta", "0.5"], 3),
    (["jeff-surface", "--Ts", "0,0.1", "--L", "2"], 3),
    (["decoherence", "--gamma", "-1"], 3),
])
def test_exit_codes(args, code, tmp_path):
    assert run(*args, "-o", str(tmp_path / "x.csv")) == code


def test_unknown_config_key(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"bogus": 1}))
    assert run("jeff-scaling", "--config", str(path)) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "spin1ent", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "spin1ent" in res.stdout
