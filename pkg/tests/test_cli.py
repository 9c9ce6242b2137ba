import json
import random
import subprocess
import sys
from fractions import Fraction as F
from pathlib import Path

import pytest

from online_apportionment.cli import main
from online_apportionment.core import Instance, read_trajectory_csv
from online_apportionment.flow import Arc, CapacitatedNetwork
from online_apportionment.mmhsc import dump_covering, random_covering


def write_instance(path: Path, rows) -> str:
    path.write_text(json.dumps(Instance.from_rows(rows).to_json()))
    return str(path)


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def test_simulate_greedy_report(tmp_path, capsys):
    inst = write_instance(tmp_path / "i.json", [["2/3", "29/120", "11/120"]] * 7)
    code, _ = run(["simulate", "--method", "greedy", "--instance", inst, "--out", tmp_path / "o"],
                  capsys)
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["trials"][0]["final_A"] == [4, 2, 1]
    state, problems = read_trajectory_csv((tmp_path / "o" / "trial_00000.csv").read_text())
    assert problems == [] and state.A == (4, 2, 1)


def test_simulate_netflow_trajectories_verify(tmp_path, capsys):
    inst = write_instance(tmp_path / "i.json", [["3/5", "3/10", "1/10"], ["1/2", "1/5", "3/10"]])
    code, _ = run(["simulate", "--method", "netflow", "--instance", inst, "--seed", 9,
                   "--trials", 4, "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert (tmp_path / "o" / "method_state.json").exists()
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["marginal_deltas"]["exact_max_abs"] == "0"
    for k in range(4):
        code, out = run(["verify", "--trajectory", tmp_path / "o" / f"trial_{k:05d}.csv",
                         "--global-quota"], capsys)
        assert code == 0 and json.loads(out)["ok"]


def test_simulate_zero_trials_writes_report_only(tmp_path, capsys):
    inst = write_instance(tmp_path / "i.json", [["1/2", "1/2"]])
    code, _ = run(["simulate", "--method", "greedy", "--instance", inst, "--trials", 0,
                   "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["report.json"]


def test_simulate_netflow_infeasible_exit_code(tmp_path, capsys):
    inst = write_instance(tmp_path / "i.json", [["1/2"] * 4, ["1/2", "1/2", "0", "0"]])
    code, _ = run(["simulate", "--method", "netflow", "--instance", inst,
                   "--out", tmp_path / "o"], capsys)
    assert code == 3
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["infeasible"]["step"] == 2
    cert = report["infeasible"]["certificate"]
    assert F(cert["forced_in"]) > F(cert["capacity_out"])


def test_simulate_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 2, "votes": [["1/2", "1/3"]]}))
    assert main(["simulate", "--method", "greedy", "--instance", str(bad),
                 "--out", str(tmp_path / "o")]) == 2
    three = write_instance(tmp_path / "t.json", [["1/3", "1/3", "1/3"]])
    assert main(["simulate", "--method", "grimmett", "--instance", three,
                 "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--method", "greedy", "--instance", str(tmp_path / "none.json"),
                 "--out", str(tmp_path / "o")]) == 2


def test_simulate_grimmett(tmp_path, capsys):
    inst = write_instance(tmp_path / "i.json", [["1/3", "2/3"], ["1/2", "1/2"], ["3/4", "1/4"]])
    code, _ = run(["simulate", "--method", "grimmett", "--instance", inst, "--trials", 3,
                   "--out", tmp_path / "o"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["marginal_deltas"]["exact_max_abs"] == "0"
    assert all(t["global_quota"] == "ok" for t in report["trials"])


def test_adversary_figure3_and_verify(tmp_path, capsys):
    code, out = run(["adversary", "--n", 3, "--schedule", "figure3", "--out", tmp_path / "a"],
                    capsys)
    assert code == 0 and json.loads(out)["achieved_deviation"] == "127/128"
    code, out = run(["adversary", "--n", 4, "--schedule", "figure3", "--out", tmp_path / "b"],
                    capsys)
    traj = tmp_path / "b" / "trajectory.csv"
    assert run(["verify", "--trajectory", traj, "--alpha", "3/2"], capsys)[0] == 0
    assert run(["verify", "--trajectory", traj, "--alpha", "5/4"], capsys)[0] == 1
    assert main(["adversary", "--n", "5", "--schedule", "figure3",
                 "--out", str(tmp_path / "c")]) == 2


def test_adversary_auto(tmp_path, capsys):
    code, out = run(["adversary", "--n", 2, "--epsilon", "1/100", "--out", tmp_path / "a"], capsys)
    assert code == 0 and F(json.loads(out)["achieved_deviation"]) >= F(1, 2)
    code, out = run(["adversary", "--n", 4, "--epsilon", "1/20", "--target-method", "greedy",
                     "--out", tmp_path / "b"], capsys)
    assert F(json.loads(out)["achieved_deviation"]) >= F(3, 2) - F(1, 20)
    inst = Instance.from_json(json.loads((tmp_path / "b" / "instance.json").read_text()))
    assert inst.n == 4 and inst.T == json.loads(out)["steps"]
    transcript = json.loads((tmp_path / "b" / "transcript.json").read_text())
    assert len(transcript) == inst.T


def test_adversary_against_netflow(tmp_path, capsys):
    code, out = run(["adversary", "--n", 3, "--target-method", "netflow", "--seed", 4,
                     "--out", tmp_path / "a"], capsys)
    assert code == 0 and F(json.loads(out)["achieved_deviation"]) >= 1 - F(1, 20)


def test_verify_detects_tampering(tmp_path, capsys):
    run(["adversary", "--n", 3, "--schedule", "figure3", "--out", tmp_path / "a"], capsys)
    path = tmp_path / "a" / "trajectory.csv"
    lines = path.read_text().splitlines()
    parts = lines[-1].split(",")
    parts[5] = str(int(parts[5]) + 2)
    lines[-1] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    code, out = run(["verify", "--trajectory", path], capsys)
    assert code == 1 and json.loads(out)["checks"]["consistency"] != "pass"
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    assert main(["verify", "--trajectory", str(tmp_path / "junk.csv")]) == 2


def test_decompose_vector(capsys):
    code, out = run(["decompose", "--vector", "3/5,3/10,1/10", "--house", 1], capsys)
    assert code == 0
    got = sorted((c["set"], c["weight"]) for c in json.loads(out))
    assert got == [([0], "3/5"), ([1], "3/10"), ([2], "1/10")]
    assert main(["decompose", "--vector", "1/2,1/3", "--house", "1"]) == 2


def test_decompose_network(tmp_path, capsys):
    net = CapacitatedNetwork(("o", "a", "b", "d"), (
        Arc("o", "a", 0, 1), Arc("o", "b", 0, 1), Arc("a", "d", 0, 1), Arc("b", "d", 0, 1)))
    (tmp_path / "n.json").write_text(json.dumps(net.to_json()))
    code, out = run(["decompose", "--network", tmp_path / "n.json", "--value", "1"], capsys)
    assert code == 0 and json.loads(out)["feasible"]
    code, out = run(["decompose", "--network", tmp_path / "n.json", "--value", "3"], capsys)
    assert code == 3 and not json.loads(out)["feasible"]


def test_offline_command(tmp_path, capsys):
    inst = write_instance(tmp_path / "i.json", [["1/2", "1/2"]] * 2)
    code, out = run(["offline", "--instance", inst], capsys)
    assert code == 0
    assert sorted(c["weight"] for c in json.loads(out)) == ["1/2", "1/2"]


def test_mmhsc_commands(tmp_path, capsys):
    ci, y = random_covering(random.Random(6), 6, 2, 3, 10, 7)
    (tmp_path / "c.json").write_text(json.dumps(dump_covering(ci, y)))
    code, out = run(["mmhsc", "near-feasible", "--instance", tmp_path / "c.json"], capsys)
    audit = json.loads(out)["audit"]
    assert code == 0 and F(audit["max_covering_violation"]) <= 1
    code, out = run(["mmhsc", "min-cost", "--instance", tmp_path / "c.json", "--trials", 3,
                     "--seed", 2], capsys)
    assert code == 0
    assert all(r["audit"]["covering_ok"] for r in json.loads(out)["runs"])
    (tmp_path / "bad.json").write_text(json.dumps({"d": 2}))
    assert main(["mmhsc", "near-feasible", "--instance", str(tmp_path / "bad.json")]) == 2


def test_outputs_are_byte_deterministic(tmp_path, capsys):
    inst = write_instance(tmp_path / "i.json", [["3/5", "3/10", "1/10"], ["1/2", "1/5", "3/10"]])
    for name in ("x", "y"):
        run(["simulate", "--method", "netflow", "--instance", inst, "--seed", 3, "--trials", 5,
             "--out", tmp_path / name], capsys)
    for p in (tmp_path / "x").iterdir():
        assert p.read_bytes() == (tmp_path / "y" / p.name).read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "online_apportionment.cli", "decompose",
                          "--vector", "1,0,1", "--house", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout) == [{"weight": "1", "set": [0, 2]}]
