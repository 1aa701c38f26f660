import json
from pathlib import Path

import pytest

from cornerflow import cli

FLOW_INI = """
[domain]
nu = 0.75

[discretization]
h = 0.04

[integrator]
dt_max = 0.05
horizon = 0.8

[checks]
eps_fraction = 0.9
floor_t1 = 0.3
floor_t2 = 0.8
floor_min = 1e-3

[run]
seed = 0
threads = 1
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfig:
    def test_defaults_load(self):
        cfg = cli.load_config(None)
        assert cfg.nu == 0.75
        assert cfg.kernel_config().blob_delta == pytest.approx(0.03**0.9)

    def test_malformed_file(self, tmp_path, capsys):
        path = write(tmp_path, "bad.ini", "[domain\nnu = oops\n")
        code = cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o")])
        assert code == cli.EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_bad_field(self, tmp_path, capsys):
        path = write(tmp_path, "bad.ini", "[domain]\nnu = not-a-number\n")
        code = cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o")])
        assert code == cli.EXIT_CONFIG
        err = capsys.readouterr().err
        assert "domain" in err and "nu" in err

    def test_unknown_section(self, tmp_path):
        path = write(tmp_path, "bad.ini", "[mystery]\nx = 1\n")
        assert cli.main(["simulate", "--config", path]) == cli.EXIT_CONFIG

    def test_out_of_range_value(self, tmp_path):
        path = write(tmp_path, "bad.ini", "[domain]\nnu = 0.4\n")
        assert cli.main(["simulate", "--config", path]) == cli.EXIT_CONFIG


class TestPipelines:
    def test_verify_ode_default(self, tmp_path):
        out = tmp_path / "ode"
        assert cli.main(["verify-ode", "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads((out / "report.json").read_text())
        assert rep["pass"] is True
        steps = rep["steps"]
        assert steps["lower_bound"] is True
        assert steps["growth_law"]["comparison_bound"] is True
        assert steps["growth_law"]["slope"] >= 1.45
        assert steps["weighted_monotone"] is True
        assert (out / "model_energy.csv").exists()

    def test_verify_flow(self, tmp_path):
        path = write(tmp_path, "flow.ini", FLOW_INI)
        out = tmp_path / "flow"
        assert cli.main(["verify-flow", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads((out / "report.json").read_text())
        names = [c["check_name"] for c in rep["checks"]]
        assert names == [
            "trajectory-lower-bound",
            "right-motion",
            "distance-sandwich",
            "long-time-floor",
            "domain-confinement",
        ]
        assert all(c["pass"] for c in rep["checks"])
        assert (out / "trace.csv").exists()

    def test_simulate_deterministic(self, tmp_path):
        path = write(tmp_path, "flow.ini", FLOW_INI.replace("horizon = 0.8", "horizon = 0.2"))
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert cli.main(["simulate", "--config", path, "--out", str(out)]) == cli.EXIT_OK
            outs.append(out)
        for fname in ("trace.csv", "report.json"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        path = write(tmp_path, "flow.ini", FLOW_INI.replace("horizon = 0.8", "horizon = 0.2"))
        out1, out3 = tmp_path / "t1", tmp_path / "t3"
        assert cli.main(["simulate", "--config", path, "--out", str(out1), "--threads", "1"]) == cli.EXIT_OK
        assert cli.main(["simulate", "--config", path, "--out", str(out3), "--threads", "3"]) == cli.EXIT_OK
        assert (out1 / "trace.csv").read_bytes() == (out3 / "trace.csv").read_bytes()

    def test_verify_energy(self, tmp_path):
        ini = """
[energy]
base_h = 0.06
levels = 3
horizon = 0.3
"""
        path = write(tmp_path, "en.ini", ini)
        out = tmp_path / "en"
        assert cli.main(["verify-energy", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads((out / "report.json").read_text())
        assert all(r >= 2.0 for r in rep["ratios"])
        assert (out / "energy.csv").exists()

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        # blow-up guard trips during the run: runtime error, exit 3
        ini = FLOW_INI.replace("[integrator]", "[integrator]\nblowup_radius = 1e-3")
        path = write(tmp_path, "boom.ini", ini)
        code = cli.main(["simulate", "--config", path, "--out", str(tmp_path / "boom")])
        assert code == cli.EXIT_RUNTIME
        assert "runtime error" in capsys.readouterr().err

    def test_kernel_probe(self, tmp_path):
        ini = """
[checks]
probe_h = 0.02
"""
        path = write(tmp_path, "kp.ini", ini)
        out = tmp_path / "kp"
        assert cli.main(["kernel-probe", "--config", path, "--out", str(out)]) == cli.EXIT_OK
        rep = json.loads((out / "report.json").read_text())
        names = {c["check_name"] for c in rep["checks"]}
        assert {
            "velocity-uniform-bound",
            "velocity-interior-log-lipschitz",
            "velocity-far-field-decay",
            "kernel-pointwise-bound",
        } <= names
        assert all(c["pass"] for c in rep["checks"])

    def test_negative_controls_fail_by_design(self, tmp_path):
        ini = """
[checks]
appendix_nu_grid = 0.75
appendix_configs = 6
negative_controls = true
"""
        path = write(tmp_path, "app.ini", ini)
        out = tmp_path / "app"
        assert cli.main(["verify-appendix", "--config", path, "--out", str(out)]) == cli.EXIT_CHECK_FAILED
        rep = json.loads((out / "report.json").read_text())
        controls = [c for c in rep["checks"] if c["params"].get("modulus") == "identity"
                    or c["params"].get("corner_weight") == "none"]
        assert len(controls) == 2
        assert all(not c["pass"] for c in controls)
        mains = [c for c in rep["checks"] if c not in controls]
        assert all(c["pass"] for c in mains)


class TestCatalog:
    def test_nonempty_and_unique(self, capsys):
        assert cli.main(["list-checks"]) == cli.EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        assert len(lines) >= 20
        names = [l.split()[0] for l in lines]
        assert len(names) == len(set(names))

    def test_flow_energy_appendix_ops_present(self, capsys):
        cli.main(["list-checks"])
        out = capsys.readouterr().out
        for required in (
            "trajectory-lower-bound",
            "right-motion",
            "distance-sandwich",
            "long-time-floor",
            "corner-probe",
            "model-ode-oracle",
            "model-energy-demo",
            "energy-self-convergence",
            "energy-growth-fit",
            "gronwall-log-modulus-envelope",
            "fractional-power-comparability",
            "two-pole-log-modulus-bound",
            "corner-weighted-three-factor-bound",
            "integral-peeling-reduction",
        ):
            assert out.count(required) == 1
