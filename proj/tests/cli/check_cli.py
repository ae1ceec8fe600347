#!/usr/bin/env python3
"""End-to-end checks of the dpnls command line."""

import argparse
import csv
import io
import json
import math
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

BIN = None
SCHEMAS = None


def run(*args, check_code=None):
    proc = subprocess.run([BIN, *args], capture_output=True, text=True)
    if check_code is not None and proc.returncode != check_code:
        raise AssertionError(
            f"{args}: exit {proc.returncode}, expected {check_code}\n{proc.stderr}")
    return proc


def schema(name):
    with open(os.path.join(SCHEMAS, f"{name}.schema.json")) as f:
        return json.load(f)


def validate(doc, name):
    jsonschema.validate(doc, schema(name))


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


class ErrorLines(unittest.TestCase):
    def assert_error(self, proc, code, kind):
        self.assertEqual(proc.returncode, code, proc.stderr)
        self.assertEqual(proc.stdout, "")
        lines = proc.stderr.strip().splitlines()
        self.assertEqual(len(lines), 1)
        doc = json.loads(lines[0])
        validate(doc, "error")
        self.assertEqual(doc["error"], kind)
        self.assertEqual(doc["exit_code"], code)

    def test_bad_exponents_rejected_before_work(self):
        self.assert_error(run("validate", "--p", "3", "--q", "2"), 2, "precondition")
        self.assert_error(run("profile", "--p", "2", "--q", "3", "--n", "0"), 2, "precondition")
        self.assert_error(run("evolve", "--p", "2", "--q", "5"), 2, "precondition")
        self.assert_error(run("evolve", "--p", "2", "--q", "3", "--n", "1000"), 2, "precondition")
        self.assert_error(run("mass-curve", "--p", "2", "--q", "3", "--omega-min", "-1"), 2,
                          "precondition")
        self.assert_error(run("profile", "--p", "2"), 2, "precondition")

    def test_usage_errors(self):
        self.assert_error(run("classify", "--p", "2", "--q", "3", "--seedless=1"), 2, "usage")
        self.assert_error(run("classify", "--p", "2", "--q", "3", "--bogus"), 2, "usage")
        self.assert_error(run(), 2, "usage")
        self.assert_error(run("classify", "--p", "x", "--q", "3"), 2, "usage")

    def test_seedless_flag_accepted(self):
        run("classify", "--p", "2", "--q", "3", "--seedless", check_code=0)

    def test_not_applicable(self):
        self.assert_error(run("unstable", "--p", "1.5", "--q", "2.5"), 2, "not_applicable")

    def test_json_only_commands(self):
        self.assert_error(run("classify", "--p", "2", "--q", "3", "--format", "csv"), 2,
                          "precondition")


class Classify(unittest.TestCase):
    def doc(self, p, q):
        out = json.loads(run("classify", "--p", p, "--q", q, check_code=0).stdout)
        validate(out, "classify")
        return out

    def test_examples(self):
        d = self.doc("2", "3.4")
        self.assertEqual(d["class"], "MassDerivNegativeFinite")
        self.assertTrue(d["mass_condition"])
        self.assertFalse(d["gamma1_condition"])
        self.assertIn("gap region boundary", d["notes"][0])
        self.assertEqual(self.doc("2", "3")["class"], "MassDerivZero")
        self.assertEqual(self.doc("3", "4")["class"], "MassDerivMinusInfinity")
        self.assertIn("gap region", self.doc("2.2", "3")["notes"][0])


class Tables(unittest.TestCase):
    def test_profile_header_and_rows(self):
        head, rows = read_csv(run("profile", "--p", "2", "--q", "3", "--xmax", "1",
                                  "--n", "5", check_code=0).stdout)
        self.assertEqual(head, ["x", "phi", "phi_prime", "phi_closed_form"])
        vals = {float(r[0]): [float(v) for v in r[1:]] for r in rows}
        self.assertAlmostEqual(vals[0.0][0], 4.0 / 3.0, delta=1e-14)
        self.assertAlmostEqual(vals[1.0][0], 12.0 / 11.0, delta=1e-14)
        self.assertAlmostEqual(vals[0.5][0], 6.0 / 4.75, delta=1e-14)
        self.assertAlmostEqual(vals[1.0][1], -1.0 * 2 * 6 / 5.5 ** 2, delta=1e-13)
        head, _ = read_csv(run("profile", "--p", "2", "--q", "3.5", "--n", "3",
                               check_code=0).stdout)
        self.assertEqual(head, ["x", "phi", "phi_prime"])

    def test_eta_rows(self):
        head, rows = read_csv(run("eta", "--p", "2", "--q", "3", "--xmax", "4", "--n", "9",
                                  check_code=0).stdout)
        self.assertEqual(head, ["x", "eta0", "eta0_prime", "eta0_closed_form"])
        zero = [r for r in rows if float(r[0]) == 0.0][0]
        self.assertEqual(float(zero[1]), 1.5)
        for i in range(len(rows)):
            a, b = rows[i], rows[len(rows) - 1 - i]
            self.assertEqual(float(a[0]), -float(b[0]))
            self.assertEqual(a[1], b[1])
            self.assertEqual(float(a[2]), -float(b[2]))
        head, _ = read_csv(run("eta", "--p", "2", "--q", "3.5", "--n", "3",
                               check_code=0).stdout)
        self.assertEqual(head, ["x", "eta0", "eta0_prime"])

    def test_mass_curve(self):
        head, rows = read_csv(run("mass-curve", "--p", "2", "--q", "3.5", "--omega-min", "0",
                                  "--omega-max", "0.5", "--n", "3", check_code=0).stdout)
        self.assertEqual(head, ["omega", "mass", "mass_prime", "mass_prime_fd"])
        self.assertLess(float(rows[0][2]), 0.0)
        self.assertEqual(rows[0][3], "nan")
        for r in rows[1:]:
            f, d = float(r[2]), float(r[3])
            self.assertLess(abs(f - d), 1e-4 * max(abs(f), 1e-2))
        _, rows = read_csv(run("mass-curve", "--p", "2.5", "--q", "3.2", "--omega-max", "0.5",
                               "--n", "2", check_code=0).stdout)
        self.assertEqual(rows[0][2], "-inf")
        self.assertTrue(float(rows[1][2]) > 0.0 or float(rows[1][2]) < 0.0)

    def test_shortest_round_trip(self):
        _, rows = read_csv(run("profile", "--p", "2", "--q", "3", "--xmax", "3", "--n", "7",
                               check_code=0).stdout)
        for r in rows:
            for cell in r:
                v = float(cell)
                mantissa = cell.lstrip("-").split("e")[0].replace(".", "").strip("0")
                digits = max(len(mantissa), 1)
                shortest = next(k for k in range(1, 18) if float(f"{v:.{k}g}") == v)
                self.assertEqual(digits, shortest, cell)

    def test_json_tables(self):
        for cmd in ("profile", "eta", "mass-curve"):
            out = run(cmd, "--p", "2", "--q", "3", "--format", "json", "--n", "4",
                      check_code=0).stdout
            validate(json.loads(out), cmd)


class Documents(unittest.TestCase):
    def test_unstable(self):
        d = json.loads(run("unstable", "--p", "2", "--q", "3.5", "--R-ell", "5", "50", "100",
                           check_code=0).stdout)
        validate(d, "unstable")
        self.assertEqual(len(d["schedule"]), 3)
        self.assertAlmostEqual(d["schedule"][1], 50 * d["characteristic_length"], delta=1e-12)
        self.assertTrue(d["found"])
        self.assertLess(d["rows"][0]["total"], 0.0)

    def test_validate(self):
        for p, q in (("2", "3"), ("2", "3.5")):
            d = json.loads(run("validate", "--p", p, "--q", q, check_code=0).stdout)
            validate(d, "validate")
            self.assertTrue(d["passed"])
            self.assertNotIn("fail", [s["status"] for s in d["suites"]])

    def test_evolve_series(self):
        args = ("evolve", "--p", "2.2", "--q", "3", "--n", "2048", "--t-max", "0.5",
                "--sample-every", "100", "--lambda", "0")
        head, rows = read_csv(run(*args, check_code=0).stdout)
        self.assertEqual(head, ["t", "energy", "charge", "modulation_distance", "sup_norm"])
        self.assertEqual(len(rows), 6)
        q0 = float(rows[0][2])
        e0 = float(rows[0][1])
        for r in rows:
            self.assertLess(abs(float(r[2]) - q0) / q0, 1e-12)
            self.assertLess(abs(float(r[1]) - e0) / abs(e0), 1e-10)
            self.assertLess(float(r[3]), 1e-3)
        d = json.loads(run(*args, "--format", "json", check_code=0).stdout)
        validate(d, "evolve")

    def test_evolve_experiment(self):
        proc = run("evolve", "--p", "2.2", "--q", "3", "--n", "2048", "--t-max", "0.2",
                   "--experiment", "--format", "json", check_code=4)
        d = json.loads(proc.stdout)
        validate(d, "evolve")
        self.assertEqual([r["lambda"] for r in d["runs"]], [0.01, -0.01])
        validate(json.loads(proc.stderr), "error")


class Reproducibility(unittest.TestCase):
    def test_byte_identical_and_sidecar(self):
        with tempfile.TemporaryDirectory() as tmp:
            outs = []
            for i in range(2):
                path = os.path.join(tmp, f"u{i}.json")
                run("unstable", "--p", "2.2", "--q", "3", "--R-ell", "10", "--out", path,
                    check_code=0)
                with open(path, "rb") as f:
                    outs.append(f.read())
                with open(path + ".meta.json") as f:
                    validate(json.load(f), "meta")
            self.assertEqual(outs[0], outs[1])
            a = run("eta", "--p", "2.2", "--q", "3.4", "--n", "11", check_code=0).stdout
            b = run("eta", "--p", "2.2", "--q", "3.4", "--n", "11", check_code=0).stdout
            self.assertEqual(a, b)
            self.assertEqual(sorted(os.listdir(tmp)),
                             ["u0.json", "u0.json.meta.json", "u1.json", "u1.json.meta.json"])

    def test_no_sidecar_without_out(self):
        with tempfile.TemporaryDirectory() as tmp:
            subprocess.run([BIN, "classify", "--p", "2", "--q", "3"], cwd=tmp,
                           capture_output=True, check=True)
            self.assertEqual(os.listdir(tmp), [])


class Config(unittest.TestCase):
    def write(self, text):
        f = tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False)
        f.write(text)
        f.close()
        self.addCleanup(os.unlink, f.name)
        return f.name

    def test_precedence(self):
        cfg = self.write("# shared settings\np = 2\nq=3.5\nprofile.n = 3\nevolve.lambda = 0.5\n")
        d = json.loads(run("classify", "--config", cfg, check_code=0).stdout)
        self.assertEqual((d["p"], d["q"]), (2.0, 3.5))
        d = json.loads(run("classify", "--config", cfg, "--q", "3", check_code=0).stdout)
        self.assertEqual(d["q"], 3.0)
        _, rows = read_csv(run("profile", "--config", cfg, check_code=0).stdout)
        self.assertEqual(len(rows), 3)
        _, rows = read_csv(run("profile", "--config", cfg, "--n", "4", check_code=0).stdout)
        self.assertEqual(len(rows), 4)

    def test_bad_keys(self):
        cfg = self.write("p=2\nq=3\nfrobnicate=1\n")
        proc = run("classify", "--config", cfg, check_code=2)
        self.assertEqual(json.loads(proc.stderr)["error"], "precondition")
        cfg = self.write("p=2\nq=3\nseedless=1\n")
        run("classify", "--config", cfg, check_code=2)
        run("classify", "--config", "/nonexistent/file.cfg", check_code=2)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--bin", required=True)
    parser.add_argument("--schemas", required=True)
    args, rest = parser.parse_known_args()
    BIN = os.path.abspath(args.bin)
    SCHEMAS = args.schemas
    unittest.main(argv=[sys.argv[0], *rest], verbosity=2)
