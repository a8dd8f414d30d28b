"""Config file handling, manifests, and the command line front end."""

import json

import numpy as np
import pytest

from calorijump import cli
from calorijump.config import (
    RunManifest,
    dump_config,
    load_config,
    parse_config_text,
    resolve_params,
    sha256_file,
)
from calorijump.errors import ConfigError

BASE = {
    "hbar_omega_q_over_kB": 1.0,
    "omega_L_over_omega_q": 1.0,
    "kappa": 0.05,
    "g2": 0.05,
    "SigmaV": 2e-12,
    "T_p": 0.1,
    "C_over_kB": 1500.0,
    "horizon_periods": 5,
    "seed": 123,
    "n_trajectories": 3,
    "dt_factor": 40.0,
    "record": "full-path",
    "downsample": 1,
}


def cfg_text(**over):
    d = dict(BASE)
    for k, v in over.items():
        if v is None:
            d.pop(k, None)
        else:
            d[k] = v
    return "\n".join(f"{k} = {v}" for k, v in d.items()) + "\n"


def write_cfg(tmp_path, name="run.cfg", **over):
    p = tmp_path / name
    p.write_text(cfg_text(**over), encoding="utf-8")
    return str(p)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("CALORIJUMP_THREADS", raising=False)


def test_parse_reports_line_numbers():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("kappa = 0.05\nno equals sign here\n")
    with pytest.raises(ConfigError, match="line 3.*duplicate"):
        parse_config_text("kappa = 0.05\ng2 = 0.1\nkappa = 0.06\n")
    with pytest.raises(ConfigError, match="line 1.*unknown"):
        parse_config_text("coupling_strength = 0.1\n")
    with pytest.raises(ConfigError, match="empty"):
        parse_config_text("kappa =\n")


def test_parse_types_and_comments():
    out = parse_config_text(
        "# leading comment\n"
        "seed = 42   # trailing comment\n"
        "\n"
        "record = full-path\n"
        "phonon_noise = off\n"
        "kappa = 5e-2\n"
    )
    assert out == {
        "seed": 42,
        "record": "full-path",
        "phonon_noise": False,
        "kappa": 0.05,
    }
    assert isinstance(out["seed"], int)
    with pytest.raises(ConfigError, match="integer"):
        parse_config_text("seed = 4.5\n")
    with pytest.raises(ConfigError, match="number"):
        parse_config_text("kappa = fast\n")
    with pytest.raises(ConfigError, match="true/false"):
        parse_config_text("phonon_noise = maybe\n")


def test_missing_required_keys_are_listed():
    with pytest.raises(ConfigError, match="kappa.*seed|seed.*kappa"):
        resolve_params(parse_config_text(cfg_text(kappa=None, seed=None)))


def test_conductance_keys_are_exclusive():
    with pytest.raises(ConfigError, match="not both"):
        resolve_params(parse_config_text(cfg_text(Sigma=4e-6, V=5e-7)))
    model, _ = resolve_params(
        parse_config_text(cfg_text(SigmaV=None, Sigma=4e-6, V=5e-7))
    )
    assert model.thermo.sigma_v == pytest.approx(2e-12, rel=1e-15)
    with pytest.raises(ConfigError, match="SigmaV"):
        resolve_params(parse_config_text(cfg_text(SigmaV=None)))


def test_frozen_frequency_conversion():
    model, _ = resolve_params(parse_config_text(cfg_text(omega_L_over_omega_q=0.9)))
    assert model.omega_q == pytest.approx(130920339207.20642, rel=1e-13)
    assert model.omega_L == pytest.approx(0.9 * model.omega_q, rel=1e-15)


def test_zero_coupling_accepted():
    model, _ = resolve_params(parse_config_text(cfg_text(g2=0.0)))
    assert model.g2 == 0.0


def test_hist_range_must_pair():
    with pytest.raises(ConfigError, match="together"):
        resolve_params(parse_config_text(cfg_text(hist_min=0.05)))
    _, sim = resolve_params(
        parse_config_text(cfg_text(hist_min=0.05, hist_max=0.6, record="histogram"))
    )
    assert sim.range == (0.05, 0.6)


def test_dump_round_trips_exactly(tmp_path):
    model, sim = resolve_params(
        parse_config_text(cfg_text(dt_factor=37.0, horizon_periods=11, threads=2))
    )
    text = dump_config(model, sim)
    model2, sim2 = resolve_params(parse_config_text(text))
    assert model2 == model
    assert sim2 == sim


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_manifest_reproduces_parameters(tmp_path):
    model, sim = resolve_params(parse_config_text(cfg_text()))
    man = RunManifest.for_run(model, sim, "0.0-test")
    f = tmp_path / "blob.bin"
    f.write_bytes(b"abc123")
    man.add_output(f)
    man.write(tmp_path / "manifest.json")
    back = RunManifest.from_json((tmp_path / "manifest.json").read_text())
    assert back.outputs[0]["sha256"] == sha256_file(f)
    assert back.outputs[0]["bytes"] == 6
    model2, sim2 = resolve_params(back.config_si)
    assert model2 == model and sim2 == sim


def test_cli_exit_code_for_bad_config(tmp_path, capsys):
    assert cli.main(["steady", "--config", str(tmp_path / "absent.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text(cfg_text() + "kappa = 0.06\n")
    assert cli.main(["steady", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "duplicate" in err


def test_cli_exit_code_for_numerical_failure(tmp_path):
    # overlapping emission frequencies at this drive point
    path = write_cfg(tmp_path, kappa=0.1, omega_L_over_omega_q=0.52)
    assert cli.main(["floquet", "--config", path]) == 3


def test_cli_floquet_record_stream(tmp_path, capsys):
    path = write_cfg(tmp_path)
    assert cli.main(["floquet", "--config", path]) == 0
    lines = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
    head, channels = lines[0], lines[1:]
    assert head["record"] == "spectrum"
    assert len(head["quasi_energies_K"]) == 2
    assert len(channels) == 6
    for ch in channels:
        assert ch["record"] == "channel"
        assert ch["weight"] == pytest.approx(0.25, abs=1e-10)
    offsets = {(c["s"], c["n"]) for c in channels}
    assert offsets == {(-1, 0), (-1, 2), (0, -1), (0, 1), (1, -2), (1, 0)}


def test_cli_simulate_outputs_and_manifest(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", path, "--out", str(out)]) == 0
    final = out / "final_te.csv"
    paths = out / "te_paths.csv"
    assert final.is_file() and paths.is_file()
    header = paths.read_text().splitlines()[0].split(",")
    assert header == ["time", "te_0", "te_1", "te_2"]
    data = np.loadtxt(paths, delimiter=",", skiprows=1)
    # one sample per period plus the initial state and the off-stride final step
    assert data.shape == (7, 4)
    assert np.all(np.diff(data[:, 0]) > 0.0)
    man = RunManifest.from_json((out / "manifest.json").read_text())
    names = {o["path"] for o in man.outputs}
    assert names == {"final_te.csv", "te_paths.csv"}
    for o in man.outputs:
        assert sha256_file(out / o["path"]) == o["sha256"]
    assert man.seed == 123
    assert man.internal["n_trajectories"] == 3


def test_cli_simulate_histogram_mode(tmp_path):
    path = write_cfg(
        tmp_path, record="histogram", bins=24, hist_min=0.05, hist_max=0.4
    )
    out = tmp_path / "hist"
    assert cli.main(["simulate", "--config", path, "--out", str(out)]) == 0
    rows = np.loadtxt(out / "histogram.csv", delimiter=",", skiprows=1)
    assert rows.shape == (24, 4)
    widths = rows[:, 1] - rows[:, 0]
    assert float(rows[:, 3] @ widths) == pytest.approx(1.0, rel=1e-9)


def test_cli_simulate_reruns_and_threads_are_byte_identical(tmp_path):
    path = write_cfg(tmp_path)
    outs = []
    for name, threads in (("a", None), ("b", None), ("c", "4")):
        out = tmp_path / name
        argv = ["simulate", "--config", path, "--out", str(out)]
        if threads:
            argv += ["--threads", threads]
        assert cli.main(argv) == 0
        outs.append(out)
    ref_final = (outs[0] / "final_te.csv").read_bytes()
    ref_paths = (outs[0] / "te_paths.csv").read_bytes()
    for out in outs[1:]:
        assert (out / "final_te.csv").read_bytes() == ref_final
        assert (out / "te_paths.csv").read_bytes() == ref_paths


def test_cli_thread_precedence(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, threads=2)

    def worker_count(argv_extra, out_name):
        out = tmp_path / out_name
        argv = ["simulate", "--config", path, "--out", str(out)] + argv_extra
        assert cli.main(argv) == 0
        man = RunManifest.from_json((out / "manifest.json").read_text())
        return man.internal["threads"]

    assert worker_count([], "t_cfg") == 2
    monkeypatch.setenv("CALORIJUMP_THREADS", "5")
    assert worker_count([], "t_env") == 5
    assert worker_count(["--threads", "7"], "t_cli") == 7
    monkeypatch.setenv("CALORIJUMP_THREADS", "lots")
    assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "x")]) == 2


def test_cli_seed_override_changes_output(tmp_path):
    path = write_cfg(tmp_path)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert cli.main(["simulate", "--config", path, "--out", str(out1)]) == 0
    assert (
        cli.main(
            ["simulate", "--config", path, "--out", str(out2), "--seed", "999"]
        )
        == 0
    )
    man = RunManifest.from_json((out2 / "manifest.json").read_text())
    assert man.seed == 999
    assert (out1 / "final_te.csv").read_bytes() != (out2 / "final_te.csv").read_bytes()


def test_cli_g2_sweep_directories(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "sweep"
    argv = [
        "simulate", "--config", path, "--out", str(out),
        "--g2", "0.01", "--g2", "0.02",
    ]
    assert cli.main(argv) == 0
    assert (out / "g2=0.01" / "final_te.csv").is_file()
    assert (out / "g2=0.02" / "final_te.csv").is_file()


def test_cli_effective_table(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "eff"
    assert cli.main(["effective", "--config", path, "--out", str(out)]) == 0
    txt = (out / "effective.csv").read_text().splitlines()
    assert txt[0].split(",") == [
        "X", "drift", "diffusion", "phonon_drift", "j1", "j2",
        "phonon_noise", "delta1", "delta2",
    ]
    table = np.loadtxt(out / "effective.csv", delimiter=",", skiprows=1)
    assert table.shape[1] == 9
    assert np.all(table[:, 2] > 0.0)  # diffusion stays positive
    drift_sum = table[:, 3] + table[:, 4] + table[:, 5]
    assert np.allclose(table[:, 1], drift_sum, rtol=1e-9)


def test_cli_steady_report(tmp_path, capsys):
    path = write_cfg(tmp_path, g2=0.01)
    assert cli.main(["steady", "--config", path]) == 0
    out = capsys.readouterr().out
    fields = dict(
        line.split(" = ") for line in out.splitlines() if " = " in line
    )
    assert float(fields["T_S_root"]) == pytest.approx(0.33954700602567905, rel=1e-6)
    assert float(fields["tau_S"]) == pytest.approx(1.0587e-07, rel=1e-3)
    assert int(fields["n_roots"]) == 1


def test_cli_validate_passes_on_sane_config(tmp_path, capsys):
    path = write_cfg(tmp_path, g2=0.01)
    assert cli.main(["validate", "--config", path]) == 0
    out = capsys.readouterr().out
    assert "all validation checks passed" in out
    assert "FAIL" not in out


def test_cli_validate_fails_with_exit_4(tmp_path, capsys):
    # detuned drive plus an aggressive relative threshold keeps only the two
    # dominant channels; the six-channel check must fail while the rest of
    # the suite still runs to completion
    path = write_cfg(
        tmp_path, g2=0.01, omega_L_over_omega_q=0.9, channel_threshold=0.5
    )
    assert cli.main(["validate", "--config", path]) == 4
    out = capsys.readouterr().out
    assert "FAIL - six jump channels" in out
    assert "validation check(s) failed" in out
