import json
import os

import numpy as np
import pytest

from jcasbf.cli import cli_main
from jcasbf.errors import MissingCheckpoint
from jcasbf.harness import (
    ExperimentSpec,
    ResultRow,
    ResultTable,
    run_convergence,
    run_k_sweep,
    spec_from_json,
)
from jcasbf.optimizer import SolverConfig
from jcasbf.scenario import SystemConfig
from jcasbf.training import default_params, save_checkpoint


def small_spec(tmp_path, **kw):
    kw.setdefault("name", "t")
    kw.setdefault("solver", SolverConfig(L_out=5, L_in=2, I_w=2))
    kw.setdefault("seeds", (0, 1))
    kw.setdefault("output_dir", str(tmp_path / "out"))
    return ExperimentSpec(**kw)


def small_checkpoint(tmp_path, l_out=5, l_in=2, i_w=2):
    p = tmp_path / "ckpt.json"
    save_checkpoint(default_params(l_out, l_in, i_w), p)
    return p


class TestSpecJson:
    def test_round_trip_fields(self):
        obj = {
            "name": "x",
            "system": {
                "Nt": 4, "Nr": 4, "K": 2, "M": 1, "C": 1,
                "Pt": 1e-6, "sigma_s2": 1e-8, "sigma_c2": [1e-8, 1e-8],
                "rician_kappa": 2.0, "zeta0_db": -30.0, "eps_c": 3.0, "eps_s": 2.0,
                "angle_range_deg": 60.0, "min_sep_deg": 10.0, "pathloss_decay": False,
            },
            "solver": {"L_out": 7, "mode": "unfolded"},
            "sweep": {"K": [2, 4]},
            "seeds": [5, 6],
            "output_dir": "o",
        }
        spec = spec_from_json(obj)
        assert spec.system.Nt == 4 and spec.solver.L_out == 7
        assert spec.sweep == {"K": [2, 4]} and spec.seeds == (5, 6)

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(ValueError):
            ExperimentSpec(name="x", seeds=(1, 1))

    def test_empty_sweep_rejected(self):
        with pytest.raises(ValueError):
            ExperimentSpec(name="x", sweep={"K": []})


class TestResultTable:
    def test_completeness_check(self):
        t = ResultTable(axis="K")
        t.add("fixed_step", 2, 0, ResultRow(1.0, 2.0, 3.0, 0.1))
        with pytest.raises(RuntimeError, match="incomplete"):
            t.require_complete(["fixed_step"], [2], [0, 1])
        t.add("fixed_step", 2, 1, ResultRow(1.0, 2.0, 3.0, 0.1))
        t.require_complete(["fixed_step"], [2], [0, 1])

    def test_csv_schema(self, tmp_path):
        t = ResultTable(axis="delta")
        t.add("unfolded", 0.1, 3, ResultRow(1.5, 2.5, -3.5, 0.25))
        p = tmp_path / "r.csv"
        t.to_csv(p)
        lines = p.read_text().strip().splitlines()
        assert lines[0] == "mode,delta,seed,h,min_sinr_db,min_scnr_db,time_s"
        assert lines[1].startswith("unfolded,0.1,3,1.5,2.5,-3.5,")


class TestConvergence:
    def test_outputs_and_determinism(self, tmp_path):
        spec = small_spec(tmp_path)
        params = default_params(5, 2, 2)
        files = run_convergence(spec, params, spec.output_dir)
        csvs = [f for f in files if f.endswith(".csv")]
        assert len(csvs) == 1
        blob1 = open(csvs[0], "rb").read()
        # four curve groups: fixed, backtracking, unfolded I_w=2 and 4
        header, *rows = blob1.decode().strip().splitlines()
        assert header == "mode,i_w,layer,mean_h"
        groups = {tuple(r.split(",")[:2]) for r in rows}
        assert groups == {
            ("fixed_step", "1"), ("backtracking", "1"), ("unfolded", "2"), ("unfolded", "4"),
        }
        assert len(rows) == 4 * 5
        files2 = run_convergence(spec, params, spec.output_dir)
        assert open(csvs[0], "rb").read() == blob1

    def test_single_layer_curves(self, tmp_path):
        spec = small_spec(tmp_path, solver=SolverConfig(L_out=1, L_in=1, I_w=2))
        files = run_convergence(spec, default_params(1, 1, 2), spec.output_dir)
        rows = open([f for f in files if f.endswith(".csv")][0]).read().strip().splitlines()
        assert len(rows) == 1 + 4

    def test_missing_checkpoint(self, tmp_path):
        spec = small_spec(tmp_path)
        with pytest.raises(MissingCheckpoint):
            run_convergence(spec, None, spec.output_dir)

    def test_svg_rerender_identical(self, tmp_path):
        spec = small_spec(tmp_path)
        params = default_params(5, 2, 2)
        files = run_convergence(spec, params, spec.output_dir)
        svg = [f for f in files if f.endswith(".svg")][0]
        blob = open(svg, "rb").read()
        os.remove(svg)
        run_convergence(spec, params, spec.output_dir)
        assert open(svg, "rb").read() == blob


class TestKSweep:
    def test_grid_complete_and_sorted_csv(self, tmp_path):
        spec = small_spec(tmp_path, sweep={"K": [2, 3]})
        table = run_k_sweep(spec, default_params(5, 2, 2))
        assert len(table.rows) == 3 * 2 * 2  # modes x K x seeds
        p = tmp_path / "k.csv"
        table.to_csv(p)
        assert len(p.read_text().strip().splitlines()) == 1 + 12


class TestDeltaSweep:
    def test_duplicate_deltas_identical_statistics(self, tmp_path):
        from jcasbf.harness import run_delta_sweep

        spec = small_spec(tmp_path, sweep={"delta": [0.5, 2.0]})
        params = default_params(5, 2, 2)
        t1 = run_delta_sweep(spec, params)
        spec2 = small_spec(tmp_path, sweep={"delta": [0.5, 0.5]})
        t2 = run_delta_sweep(spec2, params)
        for mode in ("fixed_step", "unfolded"):
            assert t2.mean(mode, 0.5, "h") == t1.mean(mode, 0.5, "h")

    def test_delta_zero_gives_max_sinr_in_sweep(self, tmp_path):
        from jcasbf.harness import run_delta_sweep

        spec = small_spec(
            tmp_path,
            sweep={"delta": [0.0, 5.0]},
            seeds=tuple(range(6)),
            solver=SolverConfig(L_out=12, L_in=2, I_w=2),
        )
        table = run_delta_sweep(spec, default_params(12, 2, 2))
        assert table.mean("unfolded", 0.0, "min_sinr_db") >= table.mean(
            "unfolded", 5.0, "min_sinr_db"
        )


class TestCli:
    def test_unknown_subcommand(self, capsys):
        assert cli_main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_help_exit_zero(self):
        assert cli_main(["--help"]) == 0

    def test_no_command(self, capsys):
        assert cli_main([]) == 1

    def test_gen_solve_smoke(self, tmp_path, capsys):
        cfg_path = tmp_path / "spec.json"
        cfg_path.write_text(json.dumps({
            "name": "smoke",
            "solver": {"L_out": 4, "L_in": 2, "I_w": 1},
            "seeds": [0],
            "output_dir": str(tmp_path / "data"),
        }))
        assert cli_main([
            "gen", "--config", str(cfg_path), "--train-size", "2", "--test-size", "1",
        ]) == 0
        assert (tmp_path / "data" / "train.json").exists()
        trace_out = tmp_path / "trace.csv"
        code = cli_main([
            "solve", "--config", str(cfg_path),
            "--dataset", str(tmp_path / "data" / "test.json"),
            "--index", "0", "--mode", "backtracking", "--out", str(trace_out),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "h =" in out and "min SINR" in out and trace_out.exists()

    def test_solve_bad_index_runtime_error(self, tmp_path, capsys):
        cfg_path = tmp_path / "spec.json"
        cfg_path.write_text(json.dumps({
            "name": "smoke", "seeds": [0], "output_dir": str(tmp_path / "data"),
        }))
        cli_main(["gen", "--config", str(cfg_path), "--train-size", "1", "--test-size", "1"])
        code = cli_main([
            "solve", "--config", str(cfg_path),
            "--dataset", str(tmp_path / "data" / "test.json"), "--index", "9",
        ])
        assert code == 2

    def test_convergence_cli_with_checkpoint(self, tmp_path):
        cfg_path = tmp_path / "spec.json"
        cfg_path.write_text(json.dumps({
            "name": "conv",
            "solver": {"L_out": 3, "L_in": 2, "I_w": 2},
            "seeds": [0],
            "output_dir": str(tmp_path / "out"),
        }))
        ckpt = small_checkpoint(tmp_path, 3, 2, 2)
        assert cli_main(["convergence", "--config", str(cfg_path), "--checkpoint", str(ckpt)]) == 0
        assert any(f.endswith(".csv") for f in os.listdir(tmp_path / "out"))

    def test_convergence_missing_checkpoint_is_runtime_error(self, tmp_path):
        cfg_path = tmp_path / "spec.json"
        cfg_path.write_text(json.dumps({
            "name": "conv", "solver": {"L_out": 3}, "seeds": [0],
            "output_dir": str(tmp_path / "out"),
        }))
        assert cli_main(["convergence", "--config", str(cfg_path)]) == 2
