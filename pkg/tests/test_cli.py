import json

import numpy as np
import pytest

from plapsys.cli import main


def _write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eigen_command(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    code, out, _ = _run(capsys, ["eigen", "--config", cfg])
    assert code == 0
    payload = json.loads(out)
    assert payload["command"] == "eigen"
    # the effective config is echoed back, defaults merged in
    assert payload["config"]["domain"]["resolution"] == 65
    assert payload["config"]["p"] == 2.0
    assert abs(payload["p"]["lambda"] / np.pi ** 2 - 1.0) < 1e-2
    assert "comparison" in payload


def test_torsion_command(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    code, out, _ = _run(capsys, ["torsion", "--config", cfg])
    assert code == 0
    payload = json.loads(out)
    c0, c1 = payload["p"]["c0"], payload["p"]["c1"]
    assert 0.0 < c0 < c1 < 1.0
    assert abs(payload["p"]["max"] - 0.125) < 1e-6


def test_calibrate_k_command(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    code, out, _ = _run(capsys, ["calibrate-k", "--config", cfg])
    assert code == 0
    payload = json.loads(out)
    assert payload["K_p"] == 2.0 * payload["K_p_estimate"]
    assert payload["K_p_estimate"] > 0.0
    assert "fixedpoint.K_p" in payload["note"]


def test_barriers_command_with_report_file(tmp_path, capsys):
    report = tmp_path / "report.json"
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    code, out, _ = _run(capsys, ["barriers", "--config", cfg,
                                 "--report", str(report)])
    assert code == 0
    assert out == ""  # report went to the file, not stdout
    payload = json.loads(report.read_text())
    assert payload["C"] == 16.0
    assert payload["certification"]["passed"] is True
    assert payload["search"]["passed"] is True


def test_solve_writes_fields_and_plot(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    fields = tmp_path / "fields.csv"
    plot = tmp_path / "plot.dat"
    report = tmp_path / "report.json"
    code, _, _ = _run(capsys, ["solve", "--config", cfg,
                               "--report", str(report),
                               "--fields", str(fields), "--plot", str(plot)])
    assert code == 0
    payload = json.loads(report.read_text())
    assert payload["verify"]["passed"] is True
    assert payload["solution"]["converged"] is True

    lines = fields.read_text().splitlines()
    header = lines[0].split(",")
    assert header == ["x", "d", "u", "v", "u_low", "u_up", "v_low", "v_up"]
    assert len(lines) == 1 + 65
    # rows are sorted by coordinate; endpoints are boundary rows with u = 0
    first = lines[1].split(",")
    last = lines[-1].split(",")
    assert float(first[0]) == 0.0 and float(last[0]) == 1.0
    assert float(first[2]) == 0.0 and float(last[2]) == 0.0
    xs = [float(l.split(",")[0]) for l in lines[1:]]
    assert xs == sorted(xs)

    plines = plot.read_text().splitlines()
    assert plines[0].startswith("# ")
    assert len(plines) == 1 + 65
    assert "," not in plines[1]
    assert len(plines[1].split()) == 8


def test_solve_verify_round_trip(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    fields = tmp_path / "fields.csv"
    solve_report = tmp_path / "solve.json"
    code, _, _ = _run(capsys, ["solve", "--config", cfg,
                               "--report", str(solve_report),
                               "--fields", str(fields)])
    assert code == 0
    before = fields.read_bytes()

    verify_report = tmp_path / "verify.json"
    code2, _, _ = _run(capsys, ["verify", "--config", cfg,
                                "--fields", str(fields),
                                "--report", str(verify_report)])
    assert code2 == 0
    # verify never rewrites the fields it was given
    assert fields.read_bytes() == before
    sv = json.loads(solve_report.read_text())["verify"]
    vv = json.loads(verify_report.read_text())["verify"]
    assert sv == vv


def test_verify_flags_nonsolution_fields(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    fields = tmp_path / "fields.csv"
    code, _, _ = _run(capsys, ["solve", "--config", cfg,
                               "--fields", str(fields),
                               "--report", str(tmp_path / "r.json")])
    assert code == 0
    # swap the solution columns for the lower barriers: same rectangle,
    # wrong residual
    lines = fields.read_text().splitlines()
    out = [lines[0]]
    for row in lines[1:]:
        c = row.split(",")
        c[2], c[3] = c[4], c[6]
        out.append(",".join(c))
    doctored = tmp_path / "doctored.csv"
    doctored.write_text("\n".join(out) + "\n")
    code2, _, err = _run(capsys, ["verify", "--config", cfg,
                                  "--fields", str(doctored),
                                  "--report", str(tmp_path / "v.json")])
    assert code2 == 2
    payload = json.loads((tmp_path / "v.json").read_text())
    assert payload["verify"]["residual"]["ok"] is False


def test_exit_3_on_outer_budget(tmp_path, capsys):
    cfg = _write_config(tmp_path, {
        "domain": {"resolution": 65},
        "spec_f": {"a1": 1e-3, "a2": 1e-3},
        "spec_g": {"a1": 1e-3, "a2": 1e-3},
        "fixedpoint": {"max_outer": 1},
    })
    code, _, err = _run(capsys, ["solve", "--config", cfg])
    assert code == 3
    assert "non-convergence" in err


def test_exit_1_on_hypothesis_violation(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"spec_f": {"alpha": -1.5}})
    code, _, err = _run(capsys, ["solve", "--config", cfg])
    assert code == 1
    assert "f.singular_exponent_above_-1" in err


def test_exit_1_on_broken_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"domain": {"resolution": 65,}}')
    code, _, err = _run(capsys, ["eigen", "--config", str(bad)])
    assert code == 1
    assert "line" in err


def test_exit_1_on_unknown_key(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"spec_f": {"alhpa": -0.25}})
    code, _, err = _run(capsys, ["eigen", "--config", cfg])
    assert code == 1
    assert "alhpa" in err and "known:" in err


def test_exit_1_on_missing_config_file(tmp_path, capsys):
    code, _, err = _run(capsys, ["eigen", "--config",
                                 str(tmp_path / "absent.json")])
    assert code == 1


def test_exit_1_on_bad_subcommand(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", "x.json"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc2:
        main([])
    assert exc2.value.code == 1
    capsys.readouterr()


def test_verify_requires_fields(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    code, _, err = _run(capsys, ["verify", "--config", cfg])
    assert code == 1
    assert "--fields" in err


def test_solve_reports_are_deterministic(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"domain": {"resolution": 65}})
    blobs = []
    for tag in ("a", "b"):
        report = tmp_path / f"report_{tag}.json"
        fields = tmp_path / f"fields_{tag}.csv"
        code, _, _ = _run(capsys, ["solve", "--config", cfg,
                                   "--report", str(report),
                                   "--fields", str(fields)])
        assert code == 0
        blobs.append((report.read_bytes(), fields.read_bytes()))
    assert blobs[0][0] == blobs[1][0]
    assert blobs[0][1] == blobs[1][1]


def test_config_output_block_used_when_flags_absent(tmp_path, capsys):
    report = tmp_path / "from_config.json"
    cfg = _write_config(tmp_path, {
        "domain": {"resolution": 65},
        "output": {"report": str(report)},
    })
    code, out, _ = _run(capsys, ["eigen", "--config", cfg])
    assert code == 0
    assert out == ""
    assert json.loads(report.read_text())["command"] == "eigen"
