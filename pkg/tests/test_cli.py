import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cumalg.cli import (
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    instance_from_json,
    instance_to_json,
    main,
    parse_grid,
    read_samples,
    write_samples,
)
from cumalg.synthgen import generate, sample_epochs


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def noise_free(tmp_path, capsys):
    path = tmp_path / "inst.json"
    code, _, err = run(["generate", "--dim", 6, "--subdim", 2, "--epochs", 20, "--no-disturb",
                        "--seed", 3, "--out", path], capsys)
    assert code == EXIT_OK
    assert "identifiable" in err
    return path


class TestGenerate:
    def test_deterministic(self, tmp_path, capsys):
        args = ["generate", "--dim", 10, "--subdim", 5, "--epochs", 110, "--sigma", -4, "--seed", 7]
        run(args + ["--out", tmp_path / "a.json"], capsys)
        run(args + ["--out", tmp_path / "b.json"], capsys)
        a = (tmp_path / "a.json").read_bytes()
        assert a == (tmp_path / "b.json").read_bytes()
        inst = instance_from_json(a.decode())
        assert (inst.D, inst.d, inst.m, inst.sigma) == (10, 5, 110, -4.0)

    def test_subdim_equal_to_dim(self, capsys):
        code, _, err = run(["generate", "--subdim", 10, "--dim", 10, "--epochs", 5], capsys)
        assert code == EXIT_USAGE
        assert "usage" in err

    def test_missing_flag(self, capsys):
        assert run(["generate", "--dim", 4], capsys)[0] == EXIT_USAGE

    def test_unwritable_output(self, tmp_path, capsys):
        code, _, _ = run(["generate", "--dim", 4, "--subdim", 2, "--epochs", 8,
                          "--out", tmp_path / "missing" / "x.json"], capsys)
        assert code == EXIT_IO

    def test_sigma_infinity_round_trips(self, noise_free):
        assert instance_from_json(noise_free.read_text()).sigma == -math.inf


class TestInstanceFile:
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip_is_bit_exact(self, seed):
        rng = np.random.default_rng(seed)
        D = int(rng.integers(2, 7))
        d = int(rng.integers(1, D))
        inst = generate(D, d, int(rng.integers(2, 12)), float(rng.uniform(-8, 0)), seed,
                        mean_shift=bool(rng.integers(2)))
        back = instance_from_json(instance_to_json(inst))
        assert np.array_equal(back.covariances, inst.covariances)
        assert np.array_equal(back.means, inst.means)
        assert np.array_equal(back.true_basis, inst.true_basis)
        assert back.sigma == inst.sigma and back.seed == inst.seed

    @pytest.mark.parametrize(
        "text",
        ["not json", '{"version": 2}', '{"version": 1, "D": 2}',
         '{"version": 1, "D": 2, "d": 1, "m": 2, "covariances": [[[1, 0], [0, 1]]], "means": [[0, 0]]}'],
    )
    def test_malformed(self, text):
        with pytest.raises(UsageError):
            instance_from_json(text)

    def test_malformed_file_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1, "D": 3}')
        assert run(["estimate", "--in", path], capsys)[0] == EXIT_USAGE

    def test_missing_input_file(self, tmp_path, capsys):
        assert run(["estimate", "--in", tmp_path / "nope.json"], capsys)[0] == EXIT_IO


class TestEstimate:
    def test_exact_on_noise_free_instance(self, noise_free, capsys):
        code, out, _ = run(["estimate", "--in", noise_free, "--method", "exact"], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["angle_rad"] < 1e-8
        assert np.array(doc["basis"]).shape == (6, 2)
        assert np.array(doc["generators"]).shape == (4, 6)
        assert doc["reference"] == "last"
        assert doc["runtime_s"] >= 0

    def test_approx_matches_exact(self, noise_free, capsys):
        bases = {}
        for method in ("exact", "approx"):
            code, out, _ = run(["estimate", "--in", noise_free, "--method", method], capsys)
            assert code == EXIT_OK
            bases[method] = np.array(json.loads(out)["basis"])
        from cumalg.bench import principal_angle
        assert principal_angle(bases["exact"], bases["approx"]) < 1e-8

    def test_pairwise_and_ssa(self, noise_free, capsys):
        code, out, _ = run(["estimate", "--in", noise_free, "--mode", "pairwise"], capsys)
        assert code == EXIT_OK and json.loads(out)["angle_rad"] < 1e-8
        code, out, _ = run(["estimate", "--in", noise_free, "--method", "ssa", "--restarts", 3], capsys)
        assert code == EXIT_OK and json.loads(out)["angle_rad"] < 1e-3

    def test_exact_on_noisy_instance_is_numerical_failure(self, tmp_path, capsys):
        path = tmp_path / "noisy.json"
        run(["generate", "--dim", 5, "--subdim", 2, "--epochs", 20, "--sigma", -1,
             "--out", path], capsys)
        code, _, err = run(["estimate", "--in", path, "--method", "exact", "--ignore-means"], capsys)
        assert code == EXIT_NUMERIC
        assert "approximate estimator" in err

    def test_samples_file(self, tmp_path, capsys):
        inst = generate(4, 2, 12, -math.inf, 5)
        X = sample_epochs(inst, 20000, np.random.default_rng(1))
        path = tmp_path / "samples.csv"
        write_samples(path, X)
        assert [x.shape for x in read_samples(path)] == [x.shape for x in X]
        code, out, _ = run(["estimate", "--in", path, "--subdim", 2, "--out", tmp_path / "r.json"], capsys)
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["reference"] == "average"
        assert doc["angle_rad"] is None
        from cumalg.bench import principal_angle
        assert principal_angle(np.array(doc["basis"]), inst.true_basis) < 0.2

    def test_samples_need_subdim(self, tmp_path, capsys):
        path = tmp_path / "s.csv"
        path.write_text("epoch,x1,x2\n1,0,1\n1,1,0\n2,0,2\n2,3,1\n")
        assert run(["estimate", "--in", path], capsys)[0] == EXIT_USAGE

    @pytest.mark.parametrize(
        "text",
        ["", "x,y\n1,2\n", "epoch,x1\n1,0\n1,1\n", "epoch,x1,x2\n1,0\n", "epoch,x1\n1,a\n",
         "epoch,x1\n1,0\n1,1\n2,5\n"],
    )
    def test_malformed_samples(self, tmp_path, text):
        path = tmp_path / "s.csv"
        path.write_text(text)
        with pytest.raises(UsageError):
            read_samples(path)


class TestGridSpec:
    def test_benchmark_keyword(self):
        g = parse_grid("benchmark")
        assert len(g.d_list) * len(g.sigmas) == 27

    def test_key_value(self):
        g = parse_grid("D=6, d=1-3, m=20, sigmas=-8;-2, trials=4, seed=9, methods=algebraic")
        assert g.d_list == (1, 2, 3) and g.sigmas == (-8.0, -2.0)
        assert (g.D, g.m, g.trials, g.master_seed, g.methods) == (6, 20, 4, 9, ("algebraic",))

    def test_json_file(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"D": 5, "d_list": [2], "m": 12, "sigmas": ["-inf"]}))
        g = parse_grid(str(path))
        assert g.sigmas == (-math.inf,)

    @pytest.mark.parametrize("text", ["D=", "foo=1", "{bad json", "d=0", "methods=newton"])
    def test_errors(self, text):
        with pytest.raises(UsageError):
            parse_grid(text)

    def test_bad_grid_exit_code(self, tmp_path, capsys):
        assert run(["benchmark", "--grid", "foo=1", "--out", tmp_path], capsys)[0] == EXIT_USAGE


class TestBenchmark:
    GRID = "D=5, d=1-2, m=14, sigmas=-6;-2, trials=3, seed=4"

    def test_repeat_runs_give_identical_bytes(self, tmp_path, capsys):
        for name in ("a", "b"):
            code, out, _ = run(["benchmark", "--grid", self.GRID, "--out", tmp_path / name,
                                "--jobs", 1, "--no-timing"], capsys)
            assert code == EXIT_OK
            assert "median_angle" in out
        for f in ("results.csv", "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        lines = (tmp_path / "a" / "results.csv").read_text().splitlines()
        assert lines[0] == "method,D,d,m,sigma,seed,angle_rad,runtime_s,converged"
        assert len(lines) == 1 + 2 * 2 * 3 * 2

    def test_skipped_cells_warn(self, tmp_path, capsys):
        code, _, err = run(["benchmark", "--grid", "D=10, d=1;9, m=5, sigmas=-4, trials=1, methods=algebraic",
                            "--out", tmp_path], capsys)
        assert code == EXIT_OK
        assert "warning" in err and "d=1" in err
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert [s["d"] for s in summary["skipped"]] == [1]

    @pytest.mark.slow
    def test_benchmark_grid_emits_all_cells(self, tmp_path, capsys):
        code, _, _ = run(["benchmark", "--grid", "benchmark", "--trials", 50, "--out", tmp_path], capsys)
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text())
        cells = {(c["d"], c["sigma"]) for c in summary["cells"]}
        assert len(cells) == 27
        assert all(c["trials"] == 50 for c in summary["cells"])


class TestIdentifiabilityCommand:
    def test_report(self, capsys):
        code, out, _ = run(["identifiability", "--dim", 10, "--subdim", 5, "--epochs", 110], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["min_m_identifiable"] == 4 and doc["verdict"] == "identifiable"

    def test_usage(self, capsys):
        assert run(["identifiability", "--dim", 3, "--subdim", 0, "--epochs", 2], capsys)[0] == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "cumalg", "identifiability", "--dim", "4", "--subdim", "3", "--epochs", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["min_m_identifiable"] == 2
