import json
import shutil
import subprocess

import numpy as np
import pytest

from wordqfa.cli import EXIT_ANALYSIS, EXIT_CERTIFICATION, EXIT_OK, EXIT_USAGE, main
from wordqfa.dfr import Dfr
from wordqfa.machine import QcfaMachine


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def z_file(workdir):
    path = workdir / "z.json"
    assert main(["dfr", "build", "--family", "zalgebraic", "-o", str(path)]) == EXIT_OK
    assert main(["dfr", "certify", str(path)]) == EXIT_OK
    return path


@pytest.fixture(scope="module")
def zm_machine(workdir):
    dfr = workdir / "zm.json"
    machine = workdir / "zm_machine.json"
    assert main(["dfr", "build", "--family", "zm", "--m", "4", "-o", str(dfr)]) == EXIT_OK
    assert main(["dfr", "certify", str(dfr)]) == EXIT_OK
    assert main(["machine", "build", "--dfr", str(dfr), "--mode", "poly", "--eps", "0.5",
                 "-o", str(machine)]) == EXIT_OK
    return machine


def test_build_free_group_family(capsys, tmp_path):
    path = tmp_path / "f2.json"
    code, _, _ = run(capsys, "dfr", "build", "--family", "f2", "-o", path)
    assert code == EXIT_OK
    f = Dfr.from_json(json.loads(path.read_text()))
    s5 = np.sqrt(5)
    assert np.allclose(f.reps[0].images[0].to_numpy(), np.diag([2 + 1j, 2 - 1j]) / s5)
    assert np.allclose(f.reps[0].images[1].to_numpy(), np.array([[2, 1j], [1j, 2]]) / s5)


def test_certify_prints_gap_table(capsys, tmp_path):
    path = tmp_path / "f2.json"
    run(capsys, "dfr", "build", "--family", "f2", "-o", path)
    code, out, _ = run(capsys, "dfr", "certify", path, "--radius", 6, "--format", "json")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["elements"] == 1457
    assert [row["n"] for row in data["per_length"]] == list(range(1, 7))
    assert Dfr.from_json(json.loads(path.read_text())).certified


def test_invalid_modulus(capsys):
    code, _, err = run(capsys, "dfr", "build", "--family", "zm", "--m", 1)
    assert code == EXIT_USAGE and "m >= 2" in err


def test_certification_failure_exit_code(capsys, tmp_path):
    path = tmp_path / "bad.json"
    run(capsys, "dfr", "build", "--family", "zm", "--m", 3, "-o", path)
    data = json.loads(path.read_text())
    data["tau"] = {"kind": "Constant", "params": {"constant": 5.0}, "calibration": []}
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "dfr", "certify", path, "--radius", 3)
    assert code == EXIT_CERTIFICATION and err


def test_machine_build_requires_certified_dfr(capsys, tmp_path):
    path = tmp_path / "raw.json"
    run(capsys, "dfr", "build", "--family", "zalgebraic", "-o", path)
    code, _, _ = run(capsys, "machine", "build", "--dfr", path, "--mode", "poly", "--eps", 0.125)
    assert code == EXIT_USAGE


def test_machine_build_and_analyze(capsys, z_file, workdir):
    machine = workdir / "m.json"
    code, _, _ = run(capsys, "machine", "build", "--dfr", z_file, "--mode", "poly", "--eps",
                     0.125, "-o", machine)
    assert code == EXIT_OK
    QcfaMachine.from_json(json.loads(machine.read_text()))
    code, out, _ = run(capsys, "machine", "analyze", machine, "--word", "a", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out)["overall_reject"]["value"] >= 0.875


def test_machine_run_identity_word(capsys, zm_machine):
    code, out, _ = run(capsys, "machine", "run", zm_machine, "--word", "a,-a", "--trials",
                       100_000, "--seed", 7, "--format", "json")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["accept_freq"] == 1.0 and data["trials"] == 100_000 and data["seed"] == 7


def test_machine_run_is_seed_stable(capsys, zm_machine):
    outs = [run(capsys, "machine", "run", zm_machine, "--word", "a", "--trials", 2000, "--seed",
                3, "--format", "json")[1] for _ in range(2)]
    assert outs[0] == outs[1]


def test_csv_output(capsys, zm_machine):
    code, out, _ = run(capsys, "machine", "run", zm_machine, "--word", "a", "--trials", 100,
                       "--format", "csv")
    assert code == EXIT_OK and "accept_freq" in out.splitlines()[0]


def test_analysis_unavailable_exit_code(capsys, tmp_path):
    from wordqfa.linalg import MeasurementPartition
    from wordqfa.machine import LEFT, MachineBuilder, MeasureAction
    from wordqfa.groups import free_abelian_group
    b = MachineBuilder(free_abelian_group(1), 2)
    start = b.state("start")
    b.on(start, LEFT, MeasureAction(MeasurementPartition.standard(2), ((b.reject, 0), (b.accept, 0))))
    path = tmp_path / "custom.json"
    path.write_text(json.dumps(b.build(start, {"kind": "custom"}).to_json()))
    code, _, _ = run(capsys, "machine", "analyze", path, "--word", "a")
    assert code == EXIT_ANALYSIS


def test_profile_command(capsys, workdir, z_file):
    machine = workdir / "m2.json"
    run(capsys, "machine", "build", "--dfr", z_file, "--mode", "poly", "--eps", 0.125, "-o",
        machine)
    code, out, _ = run(capsys, "machine", "profile", machine, "--lengths", "10,20,40",
                       "--format", "json")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["lengths"] == [10, 20, 40] and data["method"] == "analytic"


def test_overgroup_machine_build(capsys, workdir, z_file):
    machine = workdir / "dinf.json"
    code, _, _ = run(capsys, "machine", "build", "--dfr", z_file, "--mode", "poly", "--eps",
                     0.125, "--overgroup", "Z_in_Dinf", "-o", machine)
    assert code == EXIT_OK
    code, out, _ = run(capsys, "machine", "analyze", machine, "--word", "s,a,s,a", "--format",
                       "json")
    assert json.loads(out)["overall_accept"]["value"] == 1.0


def test_config_file_and_flag_precedence(capsys, tmp_path, zm_machine):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ntrials = 50\nseed = 9\nformat = json\n")
    code, out, _ = run(capsys, "machine", "run", zm_machine, "--word", "a", "--config", cfg)
    assert code == EXIT_OK and json.loads(out)["trials"] == 50
    code, out, _ = run(capsys, "machine", "run", zm_machine, "--word", "a", "--config", cfg,
                       "--trials", 70)
    assert json.loads(out)["trials"] == 70 and json.loads(out)["seed"] == 9


def test_bad_config_line(capsys, tmp_path, zm_machine):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("trials 50\n")
    code, _, _ = run(capsys, "machine", "run", zm_machine, "--word", "a", "--config", cfg)
    assert code == EXIT_USAGE


def test_invalid_word(capsys, zm_machine):
    code, _, _ = run(capsys, "machine", "run", zm_machine, "--word", "q")
    assert code == EXIT_USAGE


def test_verify_gaps_suite(capsys):
    code, out, _ = run(capsys, "verify", "gaps")
    assert code == EXIT_OK and out.count("PASS") == 2


def test_verify_quick_all(capsys):
    code, out, _ = run(capsys, "verify", "all", "--quick")
    assert code == EXIT_OK and "FAIL" not in out


def test_unknown_suite(capsys):
    code, _, err = run(capsys, "verify", "nosuch")
    assert code == EXIT_USAGE and "unknown suite" in err


def test_unknown_command():
    with pytest.raises(SystemExit) as err:
        main(["bogus"])
    assert err.value.code == EXIT_USAGE


@pytest.mark.skipif(shutil.which("wordqfa") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["wordqfa", "verify", "nosuch"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
