import json
import os

import numpy as np
import pandas as pd
import pytest

from vp1d import cli, output

MID = {"Nx": 201, "Nv": 65, "Nt": 21, "T_end": 0.4, "A_g": 0.05,
       "tol": 1e-10, "lemma_samples": 2000, "probe_count": 12}
TINY = {"Nx": 51, "Nv": 17, "Nt": 5, "T_end": 0.2, "A_g": 0.05, "tol": 1e-10}


def write_cfg(path, **kw):
    with open(path, "w") as fh:
        json.dump(kw, fh)
    return str(path)


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


def test_run_trivial_config(tmp_path):
    out = str(tmp_path / "triv")
    cfg = write_cfg(tmp_path / "c.json", **dict(TINY, A_g=0.0, out_dir=out))
    assert cli.main(["run", "--config", cfg]) == 0
    with open(os.path.join(out, "trace.json")) as fh:
        trace = json.load(fh)
    assert trace["iterations"] == 1
    assert trace["d_k"] == [0.0]
    man = read_manifest(out)
    # every effective parameter is echoed
    assert man["config"]["Nx"] == TINY["Nx"]
    assert man["config"]["tail_mode"] == "powerlaw"
    assert "solution/t_0000.csv" in man["files"]


def test_run_benchmark_style_config(tmp_path):
    out = str(tmp_path / "run")
    cfg = write_cfg(tmp_path / "c.json", **dict(MID, out_dir=out))
    assert cli.main(["run", "--config", cfg]) == 0
    with open(os.path.join(out, "trace.json")) as fh:
        trace = json.load(fh)
    d = trace["d_k"]
    assert all(d[k] > d[k + 1] for k in range(1, len(d) - 1))
    # artifacts round-trip and the loaded history matches the manifest grid
    cfg_loaded, _, sol = output.load_run(out)
    assert sol.grid.Nx == MID["Nx"]
    assert sol.rho.shape == (MID["Nt"], MID["Nx"])


def test_run_nonconvergent_exits_3_with_artifacts(tmp_path):
    out = str(tmp_path / "nc")
    cfg = write_cfg(tmp_path / "c.json", Nx=51, Nv=17, Nt=26, T_end=50.0,
                    Vmax=6.0, A_g=0.5, max_iters=6, out_dir=out)
    assert cli.main(["run", "--config", cfg]) == 3
    assert os.path.exists(os.path.join(out, "trace.json"))
    with open(os.path.join(out, "trace.json")) as fh:
        assert not json.load(fh)["converged"]


def test_invalid_config_aggregates_errors(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", Nx=100, Nt=1, T_end=-0.4,
                    A_g=2.0, p=0.5)
    assert cli.main(["run", "--config", cfg]) == 2
    err = capsys.readouterr().err
    for fragment in ("p must exceed", "A_g", "T_end", "Nx", "Nt"):
        assert fragment in err


def test_unknown_config_key_rejected(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", Nx=51, tyop=3)
    assert cli.main(["run", "--config", cfg]) == 2


def test_verify_passes_on_fresh_run(tmp_path):
    out = str(tmp_path / "v")
    cfg = write_cfg(tmp_path / "c.json", **dict(MID, out_dir=out))
    assert cli.main(["verify", "--config", cfg]) == 0
    with open(os.path.join(out, "verify", "report.json")) as fh:
        rep = json.load(fh)
    assert rep["all_passed"]
    assert rep["checks"]["duhamel"]["passed"]
    assert rep["checks"]["lemma1"]["passed"]


def test_verify_detects_corrupted_field(tmp_path):
    out = str(tmp_path / "vc")
    cfg = write_cfg(tmp_path / "c.json", **dict(MID, out_dir=out))
    assert cli.main(["run", "--config", cfg]) == 0
    # scale the stored field by 10 post hoc; d_x E = rho must now fail
    for name in sorted(os.listdir(os.path.join(out, "field"))):
        path = os.path.join(out, "field", name)
        tab = pd.read_csv(path)
        tab["E"] = 10.0 * tab["E"]
        tab.to_csv(path, index=False)
    assert cli.main(["verify", "--config", cfg]) == 1
    with open(os.path.join(out, "verify", "report.json")) as fh:
        rep = json.load(fh)
    assert not rep["checks"]["field_compat"]["passed"]


def test_verify_missing_artifacts_produces_then_checks(tmp_path):
    out = str(tmp_path / "fresh")
    cfg = write_cfg(tmp_path / "c.json", **dict(MID, out_dir=out))
    assert not os.path.exists(out)
    assert cli.main(["verify", "--config", cfg]) == 0
    assert os.path.exists(os.path.join(out, "manifest.json"))


def test_converge_study_requires_three_resolutions(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", out_dir=str(tmp_path / "cs"),
                    resolutions=[[51, 17, 5], [101, 33, 9]])
    assert cli.main(["converge-study", "--config", cfg]) == 2


def test_converge_study_trivial_profile_exact(tmp_path):
    out = str(tmp_path / "cs0")
    cfg = write_cfg(tmp_path / "c.json", A_g=0.0, T_end=0.2, out_dir=out,
                    resolutions=[[51, 17, 5], [101, 33, 9], [201, 65, 17]])
    assert cli.main(["converge-study", "--config", cfg]) == 0
    with open(os.path.join(out, "orders.csv")) as fh:
        body = fh.read()
    assert "exact" in body


def test_converge_study_orders(tmp_path):
    out = str(tmp_path / "cs")
    cfg = write_cfg(tmp_path / "c.json", T_end=0.4, out_dir=out,
                    resolutions=[[51, 17, 6], [101, 33, 11], [201, 65, 21]])
    code = cli.main(["converge-study", "--config", cfg])
    assert code == 0
    orders = pd.read_csv(os.path.join(out, "orders.csv"))
    assert np.all(orders["max_diff"].to_numpy() > 0)
    assert float(orders["order_vs_prev"].iloc[-1]) >= 1.8


def test_extend_command(tmp_path):
    out = str(tmp_path / "ex")
    cfg = write_cfg(tmp_path / "c.json", **dict(TINY, out_dir=out, delta=0.1))
    assert cli.main(["run", "--config", cfg]) == 0
    assert cli.main(["extend", "--config", cfg]) == 0
    man = read_manifest(os.path.join(out, "extended"))
    n_files = len([k for k in man["files"] if k.startswith("solution/t_")])
    assert n_files == TINY["Nt"] + 2  # 0.1 = 2 steps of dt = 0.05


def test_extend_refused_with_zero_cap(tmp_path):
    out = str(tmp_path / "exr")
    cfg = write_cfg(tmp_path / "c.json",
                    **dict(TINY, out_dir=out, delta=0.1, norm_cap=0.0))
    assert cli.main(["extend", "--config", cfg]) == 3


def test_extend_requires_delta(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", **dict(TINY, out_dir=str(tmp_path)))
    assert cli.main(["extend", "--config", cfg]) == 2


def test_byte_identical_across_thread_counts(tmp_path):
    digests = []
    for i, threads in enumerate(("1", "4", "16")):
        out = str(tmp_path / f"d{i}")
        cfg = write_cfg(tmp_path / f"c{i}.json", **dict(TINY, out_dir=out))
        assert cli.main(["run", "--config", cfg, "--threads", threads]) == 0
        man = read_manifest(out)
        digests.append(man["files"])
    assert digests[0] == digests[1] == digests[2]
