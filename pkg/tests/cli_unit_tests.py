import json
import os
import tempfile
import unittest

from click.testing import CliRunner

from gylab.cli import (
    EXIT_CONFIG_FAILED,
    EXIT_NUMERIC_FAILED,
    EXIT_PASS,
    cli,
)

FREE_PARTICLE = """
[problem]
hamiltonian = "{hamiltonian}"
horizon = 1.0

[problem.f1]
curvature = {a1}
b = {b1}

[problem.f2]
curvature = {a2}
b = {b2}

[numerics]
N = 21
N_list = [11, 21, 41, 81]
ode_steps = 512

[converge]
target = "{target}"
"""


class TestCli(unittest.TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.directory = tmp.name
        self.runner = CliRunner()

    def write_config(
        self,
        name="run.toml",
        hamiltonian="free",
        a1=1.0,
        a2=-1.0,
        b1=0.3,
        b2=-0.2,
        target="A",
    ):
        filename = os.path.join(self.directory, name)
        with open(filename, "w") as fh:
            fh.write(
                FREE_PARTICLE.format(
                    hamiltonian=hamiltonian,
                    a1=a1,
                    a2=a2,
                    b1=b1,
                    b2=b2,
                    target=target,
                )
            )
        return filename

    def invoke(self, command, config, *args, out="out"):
        out = os.path.join(self.directory, out)
        result = self.runner.invoke(
            cli,
            [command, "--config", config, "--out", out, "--no-timestamp"]
            + list(args),
        )
        return result, out

    def read_report(self, out, name):
        with open(os.path.join(out, name)) as fh:
            return json.load(fh)["gylab"]

    def test_solve(self):
        result, out = self.invoke("solve", self.write_config())
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        with open(os.path.join(out, "path.csv")) as fh:
            lines = fh.read().splitlines()
        self.assertEqual(lines[0], "i,t,q,p")
        self.assertEqual(len(lines), 22)
        # No momentum at the last site
        self.assertTrue(lines[-1].endswith(","))
        summary = self.read_report(out, "summary.json")
        self.assertEqual(summary["command"], "solve")
        self.assertEqual(summary["report"]["N"], 21)
        self.assertNotIn("timestamp", summary)

    def test_solve_continuum(self):
        result, out = self.invoke(
            "solve", self.write_config(), "--continuum"
        )
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        with open(os.path.join(out, "path.csv")) as fh:
            lines = fh.read().splitlines()
        self.assertEqual(lines[0], "i,t,q,p,q_cont,p_cont")
        self.assertEqual(len(lines), 22)
        report = self.read_report(out, "summary.json")["report"]
        self.assertLess(report["continuum_gap_q"], 0.05)
        self.assertLess(report["continuum_gap_p"], 0.05)

        result, out = self.invoke(
            "solve", self.write_config(), "--no-continuum", out="plain"
        )
        report = self.read_report(out, "summary.json")["report"]
        self.assertNotIn("continuum_gap_q", report)

    def test_verify_all(self):
        config = self.write_config()
        for which in (
            "gy-discrete",
            "gy-an",
            "gy-zeta",
            "thm23",
            "lemma22",
            "weak-conv",
        ):
            with self.subTest(which=which):
                result, out = self.invoke("verify", config, "--which", which)
                self.assertEqual(result.exit_code, EXIT_PASS, result.output)
                report = self.read_report(out, "report.json")["report"]
                self.assertTrue(report["pass"])

    def test_verify_default(self):
        result, out = self.invoke("verify", self.write_config())
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        report = self.read_report(out, "report.json")["report"]
        self.assertEqual(report["identity"], "gy_discrete")

    def test_reproducible(self):
        config = self.write_config()
        self.invoke("verify", config, out="first")
        self.invoke("verify", config, out="second")
        contents = []
        for out in ("first", "second"):
            name = os.path.join(self.directory, out, "report.json")
            with open(name, "rb") as fh:
                contents.append(fh.read())
        self.assertEqual(contents[0], contents[1])

    def test_converge(self):
        labels = {"A": "zeta_half", "tildeA": "mass_zeta_half"}
        for target in ("A", "tildeA"):
            with self.subTest(target=target):
                config = self.write_config(target=target)
                result, out = self.invoke("converge", config, out=target)
                self.assertEqual(result.exit_code, EXIT_PASS, result.output)
                summary = self.read_report(out, "summary.json")["report"]
                self.assertAlmostEqual(summary["limit"], 3.0, places=8)
                self.assertEqual(len(summary["rows"]), 4)
                self.assertEqual(summary["reference_label"], labels[target])
                with open(os.path.join(out, "table.csv")) as fh:
                    header = fh.readline().strip().split(",")
                self.assertIn("ref_" + labels[target], header)

    def test_spectral_checks(self):
        config = self.write_config()
        with open(config) as fh:
            text = fh.read()
        text = text.replace(
            "ode_steps = 512\n",
            "ode_steps = 512\n"
            "eigen_count = 3\n"
            "mu_list = [1.0, 10.0, 100.0]\n",
        )
        with open(config, "w") as fh:
            fh.write(text)
        result, out = self.invoke("verify", config, "--which", "gy-zeta")
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        details = self.read_report(out, "report.json")["report"]["details"]
        self.assertEqual(len(details["spectrum"]["roots"]), 3)
        self.assertEqual(details["asymptotics"]["mu"], [1.0, 10.0, 100.0])

        result, out = self.invoke("converge", config, out="converge")
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        summary = self.read_report(out, "summary.json")["report"]
        self.assertEqual(len(summary["spectrum"]["fdEigenvalues"]), 3)
        self.assertTrue(summary["asymptotics"]["monotone"])

    def test_config_errors(self):
        missing = os.path.join(self.directory, "missing.toml")
        result, _ = self.invoke("solve", missing)
        self.assertEqual(result.exit_code, EXIT_CONFIG_FAILED)

        bad = self.write_config(name="bad.toml", hamiltonian="quartic")
        result, _ = self.invoke("solve", bad)
        self.assertEqual(result.exit_code, EXIT_CONFIG_FAILED)

    def test_scope_error(self):
        """The A_N relation is only defined for separable models."""
        config = self.write_config(hamiltonian="mixed")
        result, _ = self.invoke("verify", config, "--which", "thm23")
        self.assertEqual(result.exit_code, EXIT_CONFIG_FAILED)

    def test_conjugate_point(self):
        config = self.write_config(a1=0.0, a2=0.0, b1=0.0, b2=0.0)
        result, _ = self.invoke("verify", config, "--which", "gy-discrete")
        self.assertEqual(result.exit_code, EXIT_NUMERIC_FAILED)


if __name__ == "__main__":
    unittest.main()
