import json
import os
import tempfile
import unittest

from click.testing import CliRunner

from cointurn.main import cli
from cointurn.services import output_service


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.runner = CliRunner()
        self.env = {"COINTURN_OUTPUT_DIR": self.temp_dir.name}

    def tearDown(self):
        self.temp_dir.cleanup()

    def invoke(self, *args):
        return self.runner.invoke(cli, list(args), env=self.env)

    def path(self, name):
        return os.path.join(self.temp_dir.name, name)

    def write(self, name, text):
        with open(self.path(name), "w", encoding="utf-8") as handle:
            handle.write(text)
        return self.path(name)


class ExactCommandTests(CliTestCase):
    def test_fair_coin_table(self):
        result = self.invoke("exact", "--schedule", "kind=constant,c=0.5", "--n-stop", "50")
        self.assertEqual(result.exit_code, 0, result.output)

        frame = output_service.read_csv(self.path("exact.csv"))
        self.assertEqual(list(frame.columns), ["n", "p_n", "a_n", "v_n", "Z", "var_exact", "ratio"])
        self.assertEqual(len(frame), 50)
        self.assertTrue((abs(frame["v_n"] - frame["n"]) < 1e-9).all())
        self.assertTrue((abs(frame["ratio"] - 1.0) < 1e-9).all())
        self.assertTrue((frame["Z"] == frame["n"]).all())

        header = output_service.read_header(self.path("exact.csv"))
        self.assertIn("schedule=kind=constant,c=0.5", header["config"])
        self.assertIn("n_stop=50", header["config"])

    def test_config_file_and_step(self):
        schedule = self.write("s.cfg", "kind=critical_cooling\nc=1\n")
        config = self.write("exact.cfg", f"schedule={schedule}\nn_stop=20\nstep=5\n")
        result = self.invoke("exact", "--config", config, "--out", "stepped.csv")
        self.assertEqual(result.exit_code, 0, result.output)
        frame = output_service.read_csv(self.path("stepped.csv"))
        self.assertEqual(list(frame["n"]), [1, 6, 11, 16])

    def test_json_schedule(self):
        schedule = self.write("s.json", '{"kind": "constant", "c": 0.5}')
        result = self.invoke("exact", "--schedule", schedule, "--n-stop", "10")
        self.assertEqual(result.exit_code, 0, result.output)
        frame = output_service.read_csv(self.path("exact.csv"))
        self.assertTrue((abs(frame["v_n"] - frame["n"]) < 1e-9).all())

    def test_bad_input_exits_with_usage_code(self):
        result = self.invoke("exact", "--schedule", "kind=constant,c=2")
        self.assertEqual(result.exit_code, 2)
        config = self.write("bad.cfg", "schedule=kind=constant colour=red\n")
        self.assertEqual(self.invoke("exact", "--config", config).exit_code, 2)
        self.assertEqual(self.invoke("exact", "--schedule", "kind=constant,c=0.5",
                                     "--n-start", "9", "--n-stop", "3").exit_code, 2)


class SimulateCommandTests(CliTestCase):
    def test_endpoints_without_grid(self):
        result = self.invoke("simulate", "--schedule", "kind=constant,c=0.3", "--n", "101",
                             "--trials", "20", "--seed", "5")
        self.assertEqual(result.exit_code, 0, result.output)
        frame = output_service.read_csv(self.path("simulate.csv"))
        self.assertEqual(list(frame.columns), ["trial", "S_n", "Y_n"])
        self.assertEqual(len(frame), 20)
        self.assertTrue((frame["S_n"] % 2 == 1).all())
        self.assertEqual(output_service.read_header(self.path("simulate.csv"))["master_seed"], "5")

    def test_same_seed_same_bytes(self):
        args = ["simulate", "--schedule", "kind=critical_cooling,c=1", "--n", "200", "--trials", "6",
                "--grid", "0.5,1", "--seed", "11"]
        self.assertEqual(self.invoke(*args, "--out", "a.csv").exit_code, 0)
        self.assertEqual(self.invoke(*args, "--out", "b.csv", "--workers", "2").exit_code, 0)
        with open(self.path("a.csv"), "rb") as a, open(self.path("b.csv"), "rb") as b:
            first, second = a.read(), b.read()
        # headers differ in out and workers only
        self.assertEqual(first.split(b"\n", 3)[3], second.split(b"\n", 3)[3])
        frame = output_service.read_csv(self.path("a.csv"))
        self.assertEqual(list(frame.columns), ["trial", "t", "value"])
        self.assertEqual(len(frame), 12)
        self.assertTrue((frame["value"].abs() <= frame["t"] + 1e-12).all())

    def test_grid_beyond_one_extends_walk(self):
        result = self.invoke("simulate", "--schedule", "kind=critical_cooling,c=1", "--n", "50",
                             "--grid", "0.5;2", "--mode", "cooling")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(len(output_service.read_csv(self.path("simulate.csv"))), 2)


class ZigzagCommandTests(CliTestCase):
    def test_summary_rows(self):
        result = self.invoke("zigzag", "--c", "1", "--trials", "5", "--seed", "3")
        self.assertEqual(result.exit_code, 0, result.output)
        frame = output_service.read_csv(self.path("zigzag.csv"))
        self.assertEqual(list(frame.columns), ["trial", "endpoint", "zeros", "atoms"])
        self.assertTrue((frame["endpoint"].abs() <= 1.0).all())

    def test_grid_output(self):
        result = self.invoke("zigzag", "--c", "2", "--T", "2", "--eps", "0.001", "--trials", "4",
                             "--grid", "0.5,1,2")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(len(output_service.read_csv(self.path("zigzag.csv"))), 12)

    def test_time_past_horizon(self):
        result = self.invoke("zigzag", "--c", "1", "--grid", "0.5,3")
        self.assertEqual(result.exit_code, 2)


class ScanCommandTests(CliTestCase):
    def test_one_row_per_schedule(self):
        schedules = self.write("list.txt", "kind=constant c=0.3\n# cooling\nkind=critical_cooling c=1\n")
        result = self.invoke("scan", "--schedules", schedules, "--horizon", "1000")
        self.assertEqual(result.exit_code, 0, result.output)
        frame = output_service.read_csv(self.path("scan.csv"))
        self.assertEqual(list(frame["regime"]), ["bounded-band", "critical-cooling"])
        self.assertEqual(list(frame["schedule"]), ["kind=constant c=0.3", "kind=critical_cooling c=1"])

    def test_missing_list(self):
        self.assertEqual(self.invoke("scan", "--schedules", self.path("nope.txt")).exit_code, 2)


class VerifyCommandTests(CliTestCase):
    def test_selected_criteria(self):
        result = self.invoke("verify", "--criteria", "1,2", "--quick", "--seed", "7")
        self.assertEqual(result.exit_code, 0, result.output)
        with open(self.path("verify.json"), "r", encoding="utf-8") as handle:
            report = json.load(handle)
        self.assertEqual([entry["id"] for entry in report["criteria"]], [1, 2])
        self.assertTrue(report["all_passed"])
        self.assertEqual(report["master_seed"], 7)

    def test_unknown_criterion(self):
        self.assertEqual(self.invoke("verify", "--criteria", "99").exit_code, 2)


if __name__ == "__main__":
    unittest.main()
