import json
import subprocess
import sys

import pytest

from vencoord.cli import main
from vencoord.config import ConfigError, fixture_path, load_config


def test_validate_bundled(capsys):
    assert main(["validate", str(fixture_path("case1"))]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_self_loop(tmp_path, capsys):
    cfg = json.loads(fixture_path("case1").read_text())
    tap = cfg["tiers"][0][0]
    tap["suppliers"].append("tap")
    tap["customers"].append("tap")
    path = tmp_path / "loop.json"
    path.write_text(json.dumps(cfg))
    assert main(["validate", str(path)]) == 1
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("cycle: tap")


def test_validate_truncated(tmp_path):
    path = tmp_path / "cut.json"
    path.write_text(fixture_path("case1").read_text()[:200])
    assert main(["validate", str(path)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_bad_schema_is_input_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"tiers": [[{"id": "x"}]]}))
    with pytest.raises(ConfigError):
        load_config(path)
    assert main(["run", str(path)]) == 2


def test_run_case1_report(tmp_path):
    trace, report = tmp_path / "t.trace", tmp_path / "r.txt"
    assert main(["run", str(fixture_path("case1")), "--trace", str(trace), "--report", str(report)]) == 0
    text = report.read_text()
    assert "o1: contracted" in text and "global benefit: 810.00" in text and "holds" in text
    csv = (tmp_path / "r.csv").read_text().splitlines()
    assert csv[0].startswith("ven,selling,costs,absorbed") and any(l.startswith("tap,1000.00,250.00") for l in csv)


def test_run_case2_and_case3(tmp_path, capsys):
    assert main(["run", str(fixture_path("case2"))]) == 0
    assert "o1: contracted" in capsys.readouterr().out
    report = tmp_path / "r3.txt"
    assert main(["run", str(fixture_path("case3")), "--report", str(report)]) == 3
    text = report.read_text()
    assert "o1: escalated" in text and "escalation chain" in text and "SCMA" in text


def test_run_is_repeatable(tmp_path):
    outs = []
    for i in range(2):
        t, r = tmp_path / f"{i}.trace", tmp_path / f"{i}.txt"
        main(["run", str(fixture_path("case3b")), "--trace", str(t), "--report", str(r)])
        outs.append((t.read_text(), r.read_text()))
    assert outs[0] == outs[1]
    assert main(["diff", str(tmp_path / "0.trace"), str(tmp_path / "1.trace")]) == 0


def test_diff_reports_first_divergence(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", str(fixture_path("case1")), "--trace", str(a), "--report", str(tmp_path / "x.txt")])
    main(["run", str(fixture_path("case2")), "--trace", str(b), "--report", str(tmp_path / "y.txt")])
    capsys.readouterr()
    assert main(["diff", str(a), str(b)]) == 1
    assert capsys.readouterr().out.startswith("first divergence at line 6")
    junk = tmp_path / "junk"
    junk.write_text("not a trace\n")
    assert main(["diff", str(a), str(junk)]) == 2


def test_lenient_flag_overrides_mode(tmp_path):
    cfg = json.loads(fixture_path("case1").read_text())
    cfg["orders"].append({"day": 141, "id": "o2", "customer": "client", "supplier": "ghost",
                          "product": "PF", "due": 152, "qty": 1})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path), "--report", str(tmp_path / "s.txt")]) == 1
    assert main(["run", str(path), "--lenient", "--report", str(tmp_path / "l.txt")]) == 0


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "vencoord.cli", "validate", str(fixture_path("case4"))],
                         capture_output=True, text=True)
    assert out.returncode == 0
