import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from xkmedians.cli import main
from xkmedians.core import tree_from_dict, validate_tree, CenterSet
from xkmedians.dynamic_tree import DynamicTree, InsertRequest, DeleteRequest
from xkmedians.harness import gen_request_stream
from xkmedians.rng import RngHandle


def write_instance(path, points, centers, p=2.0):
    doc = {"p": p, "d": len(centers[0]), "points": points, "centers": centers}
    path.write_text(json.dumps(doc))


def read_ledger(path):
    with open(path) as handle:
        return list(csv.DictReader(handle))


class TestBuild:
    def test_single_center(self, tmp_path, capsys):
        inst = tmp_path / "inst.json"
        out = tmp_path / "tree.json"
        write_instance(inst, [[0.5, 0.5]], [[0.0, 0.0]])
        rc = main(["build", "--input", str(inst), "--seed", "1",
                   "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc == {"leaf": 0}
        assert "ratio=1.0" in capsys.readouterr().out

    def test_tree_is_valid(self, tmp_path):
        inst = tmp_path / "inst.json"
        out = tmp_path / "tree.json"
        gen = np.random.default_rng(0)
        centers = gen.uniform(-1, 1, (6, 3)).tolist()
        points = gen.uniform(-1, 1, (30, 3)).tolist()
        write_instance(inst, points, centers, p=1.5)
        assert main(["build", "--input", str(inst), "--seed", "9",
                     "--out", str(out)]) == 0
        tree = tree_from_dict(json.loads(out.read_text()))
        assert validate_tree(tree, CenterSet(np.array(centers))).ok

    def test_malformed_json_exit_2_no_partial_output(self, tmp_path, capsys):
        inst = tmp_path / "bad.json"
        inst.write_text("{not json")
        out = tmp_path / "tree.json"
        rc = main(["build", "--input", str(inst), "--seed", "1",
                   "--out", str(out)])
        assert rc == 2
        assert not out.exists()
        assert "error" in capsys.readouterr().err

    def test_seed_determinism_byte_identical(self, tmp_path):
        inst = tmp_path / "inst.json"
        write_instance(inst, [[0.1, 0.2], [0.3, -0.1]],
                       [[0.0, 0.0], [0.5, 0.5], [-0.5, 0.25]])
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert main(["build", "--input", str(inst), "--seed", "7",
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestDynamic:
    def write_stream(self, path, requests):
        lines = []
        for req in requests:
            if isinstance(req, InsertRequest):
                lines.append(json.dumps({"op": "insert",
                                         "coords": list(req.coords)}))
            else:
                lines.append(json.dumps({"op": "delete", "id": req.center_id}))
        path.write_text("\n".join(lines) + ("\n" if lines else ""))

    def test_empty_stream(self, tmp_path):
        stream = tmp_path / "reqs.jsonl"
        ledger = tmp_path / "ledger.csv"
        stream.write_text("")
        rc = main(["dynamic", "--requests", str(stream), "--d", "2",
                   "--seed", "1", "--ledger", str(ledger)])
        assert rc == 0
        assert read_ledger(ledger) == []

    def test_insert_delete_leaves_empty_tree(self, tmp_path):
        stream = tmp_path / "reqs.jsonl"
        ledger = tmp_path / "ledger.csv"
        final = tmp_path / "final.json"
        self.write_stream(stream, [InsertRequest((0.1, 0.2)), DeleteRequest(0)])
        rc = main(["dynamic", "--requests", str(stream), "--d", "2",
                   "--seed", "3", "--ledger", str(ledger),
                   "--final-tree", str(final)])
        assert rc == 0
        assert json.loads(final.read_text()) == {}
        rows = read_ledger(ledger)
        assert [r["op"] for r in rows] == ["insert", "delete"]

    def test_invalid_delete_names_request_index(self, tmp_path, capsys):
        stream = tmp_path / "reqs.jsonl"
        ledger = tmp_path / "ledger.csv"
        self.write_stream(stream, [InsertRequest((0.1, 0.2)), DeleteRequest(5)])
        rc = main(["dynamic", "--requests", str(stream), "--d", "2",
                   "--seed", "3", "--ledger", str(ledger)])
        assert rc == 1
        assert "request 1" in capsys.readouterr().err

    def test_ledger_matches_direct_run(self, tmp_path):
        requests = gen_request_stream(5, 2, 40, RngHandle(11))
        stream = tmp_path / "reqs.jsonl"
        ledger = tmp_path / "ledger.csv"
        self.write_stream(stream, requests)
        assert main(["dynamic", "--requests", str(stream), "--d", "2",
                     "--p", "2.0", "--seed", "17",
                     "--ledger", str(ledger)]) == 0
        tree = DynamicTree(2, 2.0, seed=17)
        for req in requests:
            tree.process_request(req)
        rows = read_ledger(ledger)
        assert [int(r["recourse"]) for r in rows] == [
            r["recourse"] for r in tree.ledger]

    def test_ledger_determinism_modulo_wall(self, tmp_path):
        requests = gen_request_stream(4, 2, 25, RngHandle(5))
        stream = tmp_path / "reqs.jsonl"
        self.write_stream(stream, requests)
        snapshots = []
        for name in ("l1.csv", "l2.csv"):
            ledger = tmp_path / name
            assert main(["dynamic", "--requests", str(stream), "--d", "2",
                         "--seed", "5", "--ledger", str(ledger)]) == 0
            rows = read_ledger(ledger)
            snapshots.append([
                {k: v for k, v in row.items() if k != "wall_nanos"}
                for row in rows
            ])
        assert snapshots[0] == snapshots[1]


class TestBench:
    def run_bench(self, tmp_path, cfg, name="out.csv"):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / name
        rc = main(["bench", "--config", str(cfg_path), "--out", str(out)])
        return rc, out

    def test_competitive_single_trial_single_row(self, tmp_path):
        rc, out = self.run_bench(tmp_path, {
            "experiment": "competitive", "p": 2.0, "k": 3, "d": 2,
            "n_per_cluster": 4, "trials": 1, "seed": 0})
        assert rc == 0
        assert len(read_ledger(out)) == 1

    def test_lowerbound_prints_d(self, tmp_path, capsys):
        rc, out = self.run_bench(tmp_path, {
            "experiment": "lowerbound", "p": 1.0, "k": 8, "trials": 3,
            "seed": 0})
        assert rc == 0
        assert "d=134" in capsys.readouterr().out
        rows = read_ledger(out)
        assert all(r["separation_ok"] == "True" for r in rows)

    def test_universal(self, tmp_path):
        rc, out = self.run_bench(tmp_path, {
            "experiment": "universal", "d": 16, "seed": 0})
        assert rc == 0
        row = read_ledger(out)[0]
        assert float(row["optimal_l1_special"]) == 8.0
        assert float(row["optimal_l2_special"]) == 4.0

    def test_config_schema_violations_enumerated(self, tmp_path, capsys):
        rc, _ = self.run_bench(tmp_path, {
            "experiment": "nope", "p": 0.1, "k": 0})
        assert rc == 2
        err = capsys.readouterr().err
        assert err.count("config error") == 3

    def test_unknown_field_rejected(self, tmp_path, capsys):
        rc, _ = self.run_bench(tmp_path, {"experiment": "dynamic", "zzz": 1})
        assert rc == 2
        assert "zzz" in capsys.readouterr().err

    def test_coupling_k2_trivial_note(self, tmp_path, capsys):
        rc, out = self.run_bench(tmp_path, {
            "experiment": "coupling", "p": 2.0, "d": 1, "k": 2,
            "coupling_streams": 3, "stream_length": 8,
            "seeds_per_builder": 40, "seed": 1})
        assert rc == 0

    def test_dynamic_bench_csv(self, tmp_path):
        rc, out = self.run_bench(tmp_path, {
            "experiment": "dynamic", "k": 4, "d": 2, "n_requests": 30,
            "checkpoint_every": 10, "seed": 2})
        assert rc == 0
        rows = read_ledger(out)
        assert len(rows) == 30


class TestEntryPoint:
    def test_console_script_help(self):
        proc = subprocess.run(["xkmedians", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "build" in proc.stdout and "dynamic" in proc.stdout

    def test_subcommand_help_lists_flags(self):
        for sub, flags in (("build", ["--input", "--p", "--seed", "--out"]),
                           ("dynamic", ["--requests", "--ledger",
                                        "--final-tree", "--box"]),
                           ("bench", ["--config", "--out"])):
            proc = subprocess.run(["xkmedians", sub, "--help"],
                                  capture_output=True, text=True)
            assert proc.returncode == 0
            for flag in flags:
                assert flag in proc.stdout
