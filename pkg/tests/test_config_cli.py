"""Config parsing, run manifests, and the command-line driver.

The CLI tests call ``main`` in-process with ``--out-dir`` pointed at a tmp
directory; one subprocess test covers the installed console entry point.
"""

import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from latnf.cli import main
from latnf.config import (
    ConfigError,
    apply_overrides,
    config_to_jsonable,
    default_config,
    load_config,
)
from latnf.manifest import (
    build_manifest,
    file_sha256,
    inventory,
    manifest_json,
    spawn_seed,
)

REPO = Path(__file__).resolve().parents[1]
CERTIFIED_CONFIG = str(REPO / "configs" / "nls_t1.ini")


def test_defaults_match_schema():
    cfg = load_config(None)
    assert cfg == default_config()
    assert cfg["run"]["seed"] == 0
    assert cfg["lattice"]["dim"] == 1 and cfg["lattice"]["radius"] == 8.0
    assert cfg["model"]["kind"] == "torus"
    assert cfg["simulate"]["nonlinearity"] == {1: 1.0}
    assert cfg["resonance"]["tau"] is None
    assert cfg["output"]["manifest"] is True


def test_ini_value_coercions(tmp_path):
    path = tmp_path / "mix.ini"
    path.write_text(
        "[model]\n"
        "gram = 2 0; 0 2\n"
        'potential = {"0": 0.5, "-1": -0.25}\n'
        "[lattice]\n"
        "offset = 0.5\n"
        "[measure]\n"
        "support = [[1], [3]]\n"
        "k = 1, -1\n"
        "gamma = 0.1 0.2\n"
        "[resonance]\n"
        "tau = none\n"
        "[output]\n"
        "manifest = off\n"
    )
    cfg = load_config(str(path))
    assert cfg["model"]["gram"] == ((2.0, 0.0), (0.0, 2.0))
    assert cfg["model"]["potential"] == {(0,): 0.5, (-1,): -0.25}
    assert cfg["lattice"]["offset"] == [0.5]
    assert cfg["measure"]["support"] == [(1,), (3,)]
    assert cfg["measure"]["k"] == [1, -1]
    assert cfg["measure"]["gamma"] == [0.1, 0.2]
    assert cfg["resonance"]["tau"] is None
    assert cfg["output"]["manifest"] is False


def test_json_file_equivalent_to_ini(tmp_path):
    as_json = tmp_path / "eq.json"
    as_json.write_text(
        json.dumps({"lattice": {"dim": 2, "radius": 3.0}, "run": {"seed": 9}})
    )
    as_ini = tmp_path / "eq.ini"
    as_ini.write_text("[lattice]\ndim = 2\nradius = 3.0\n\n[run]\nseed = 9\n")
    assert load_config(str(as_json)) == load_config(str(as_ini))


def test_unknown_section_and_key_rejected(tmp_path):
    bad_section = tmp_path / "s.ini"
    bad_section.write_text("[widgets]\nx = 1\n")
    with pytest.raises(ConfigError, match="unknown section \\[widgets\\]"):
        load_config(str(bad_section))
    bad_key = tmp_path / "k.ini"
    bad_key.write_text("[lattice]\nspin = 1\n")
    with pytest.raises(ConfigError, match="unknown key 'spin' in section \\[lattice\\]"):
        load_config(str(bad_key))


def test_malformed_ini_reports_line(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[lattice]\ndim 2\n")
    with pytest.raises(ConfigError, match=r"bad\.ini:2:1: malformed INI"):
        load_config(str(path))
    headerless = tmp_path / "hdr.ini"
    headerless.write_text("dim = 2\n")
    with pytest.raises(ConfigError, match="malformed INI"):
        load_config(str(headerless))


def test_malformed_json_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"run": \n  bad}\n')
    with pytest.raises(ConfigError, match=r"bad\.json:2:3: malformed JSON"):
        load_config(str(path))
    flat = tmp_path / "flat.json"
    flat.write_text("[1, 2]\n")
    with pytest.raises(ConfigError, match="top level must be an object"):
        load_config(str(flat))


def test_bad_value_names_section_and_key(tmp_path):
    path = tmp_path / "val.ini"
    path.write_text("[lattice]\ndim = banana\n")
    with pytest.raises(ConfigError, match=r"\[lattice\] dim: expected an integer"):
        load_config(str(path))


def test_overrides_apply_and_coerce():
    cfg = default_config()
    apply_overrides(
        cfg,
        [
            "clusters.delta=0.7",
            'simulate.nonlinearity={"1": 2.0}',
            "lattice.offset=0.5",
            "run.out_dir=elsewhere",
        ],
    )
    assert cfg["clusters"]["delta"] == 0.7
    assert cfg["simulate"]["nonlinearity"] == {1: 2.0}
    assert cfg["lattice"]["offset"] == [0.5]
    assert cfg["run"]["out_dir"] == "elsewhere"


def test_override_errors():
    with pytest.raises(ConfigError, match="must look like section.key=value"):
        apply_overrides(default_config(), ["nodot"])
    with pytest.raises(ConfigError, match="must look like section.key"):
        apply_overrides(default_config(), ["nodot=1"])
    with pytest.raises(ConfigError, match="unknown setting 'foo.bar'"):
        apply_overrides(default_config(), ["foo.bar=1"])
    # JSON true parses to a boolean, which is not an integer seed.
    with pytest.raises(ConfigError, match="expected an integer"):
        apply_overrides(default_config(), ["run.seed=true"])


def test_config_to_jsonable_flattens_tuples():
    cfg = default_config()
    apply_overrides(
        cfg, ['model.potential={"2": 1.0, "0": 0.5}', "model.gram=[[2, 0], [0, 2]]"]
    )
    echo = config_to_jsonable(cfg)
    assert echo["model"]["potential"] == {"2": 1.0, "0": 0.5}
    assert echo["model"]["gram"] == [[2.0, 0.0], [0.0, 2.0]]
    assert echo["measure"]["support"] == [[1], [2]]
    json.dumps(echo)


def test_file_sha256_matches_hashlib(tmp_path):
    path = tmp_path / "blob.bin"
    payload = bytes(range(256)) * 999
    path.write_bytes(payload)
    assert file_sha256(path) == hashlib.sha256(payload).hexdigest()


def test_inventory_is_relative_and_sorted(tmp_path):
    (tmp_path / "sub").mkdir()
    b = tmp_path / "sub" / "b.txt"
    a = tmp_path / "a.txt"
    b.write_text("bee")
    a.write_text("ay")
    inv = inventory([b, a], root=tmp_path)
    assert list(inv) == ["a.txt", "sub/b.txt"]
    assert inv["a.txt"] == hashlib.sha256(b"ay").hexdigest()


def test_spawn_seed_deterministic_and_label_sensitive():
    assert spawn_seed(0, "a") == spawn_seed(0, "a") == 10426478240765714555
    assert spawn_seed(0, "b") == 5782538088377823485
    assert spawn_seed(1, "a") == 13371565896197210392
    assert spawn_seed(0, "a") != spawn_seed(0, "b") != spawn_seed(1, "a")


def test_manifest_json_sorted_and_numpy_safe():
    manifest = build_manifest(
        command="probe",
        config_echo={"run": {"seed": 0}},
        results={
            "count": np.int64(3),
            "score": np.float64(0.5),
            "vec": np.arange(3),
            "pair": (1, 2),
        },
        artifacts={"x.csv": "00"},
        seed=0,
    )
    text = manifest_json(manifest)
    assert text.endswith("\n")
    decoded = json.loads(text)
    assert decoded["results"] == {"count": 3, "score": 0.5, "vec": [0, 1, 2], "pair": [1, 2]}
    assert list(decoded) == sorted(decoded)
    assert "numpy" in decoded["versions"]
    assert manifest_json(manifest) == text


def test_cli_spectrum_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["spectrum", "--config", CERTIFIED_CONFIG, "--out-dir", str(out)]) == 0
    assert "spectrum: 17 modes" in capsys.readouterr().out
    csv_path = out / "spectrum.csv"
    assert csv_path.exists()
    manifest = json.loads((out / "spectrum_manifest.json").read_text())
    assert manifest["command"] == "spectrum"
    assert manifest["seed"] == 1
    assert manifest["results"]["n_modes"] == 17
    assert manifest["results"]["n_bands"] == 9
    assert manifest["results"]["band_violations"] == []
    assert manifest["artifacts"]["spectrum.csv"] == file_sha256(csv_path)


def test_cli_manifest_byte_identical_on_repeat(tmp_path, capsys):
    out = tmp_path / "rep"
    main(["spectrum", "--config", CERTIFIED_CONFIG, "--out-dir", str(out)])
    first = (out / "spectrum_manifest.json").read_bytes()
    main(["spectrum", "--config", CERTIFIED_CONFIG, "--out-dir", str(out)])
    assert (out / "spectrum_manifest.json").read_bytes() == first
    capsys.readouterr()


def test_cli_clusters(tmp_path, capsys):
    out = tmp_path / "cl"
    assert main(["clusters", "--config", CERTIFIED_CONFIG, "--out-dir", str(out)]) == 0
    assert "dyadic" in capsys.readouterr().out
    assert (out / "clusters.csv").exists()
    summary = json.loads((out / "clusters.json").read_text())
    manifest = json.loads((out / "clusters_manifest.json").read_text())
    assert manifest["results"]["dyadic_passed"] is True
    assert manifest["results"]["n_blocks"] == summary["n_blocks"] == 17


def test_cli_resonances_certifies_multiplier_system(tmp_path, capsys):
    out = tmp_path / "rz"
    code = main(["resonances", "--config", CERTIFIED_CONFIG, "--out-dir", str(out)])
    assert code == 0
    assert "exhaustive over 7140" in capsys.readouterr().out
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["passed"] is True
    assert cert["order"] == 3
    assert cert["min_score"] == pytest.approx(0.049593687673059494)


def test_cli_resonances_fails_on_flat_torus(tmp_path, capsys):
    # Without a potential the zero mode collapses an order-3 divisor to 0.
    code = main(["resonances", "--out-dir", str(tmp_path / "flat")])
    assert code == 1
    assert "FAIL nonresonance" in capsys.readouterr().out


def test_cli_measure(tmp_path, capsys):
    out = tmp_path / "me"
    assert main(["measure", "--out-dir", str(out)]) == 0
    assert "measure: gamma=0.1" in capsys.readouterr().out
    manifest = json.loads((out / "measure_manifest.json").read_text())
    rows = manifest["results"]["rows"]
    assert len(rows) == 1
    assert rows[0]["passed"] is True
    assert rows[0]["fraction"] <= rows[0]["bound"] + 3 * rows[0]["stderr"]


def test_cli_simulate_filters_bulky_meta(tmp_path, capsys):
    out = tmp_path / "sim"
    code = main(
        [
            "simulate",
            "--config",
            CERTIFIED_CONFIG,
            "--set",
            "simulate.horizon=0.5",
            "--set",
            "lattice.radius=4",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    assert "simulate:" in capsys.readouterr().out
    head = (out / "trajectory.csv").read_text().splitlines()[0]
    assert head.startswith("t,sobolev,mass,energy,J_0")
    manifest = json.loads((out / "simulate_manifest.json").read_text())
    meta = manifest["results"]["meta"]
    assert "final_modes" not in meta and "band_floors" not in meta
    assert meta["integrator"] == "strang_splitting"
    assert manifest["results"]["growth"] == pytest.approx(1.0, abs=1e-3)
    assert manifest["results"]["mass_drift"] < 1e-12


def test_cli_normalform_rejects_uncertified_system(tmp_path, capsys):
    # The flat torus cannot certify order 4, so normalization must refuse.
    code = main(
        [
            "normalform",
            "--set",
            "normalform.cert_budget=200000",
            "--out-dir",
            str(tmp_path / "nf"),
        ]
    )
    assert code == 1
    assert "FAIL normal form" in capsys.readouterr().out


def test_cli_verify_passes_certified_config(tmp_path, capsys):
    out = tmp_path / "ve"
    assert main(["verify", "--config", CERTIFIED_CONFIG, "--out-dir", str(out)]) == 0
    text = capsys.readouterr().out
    assert "all 8 checks passed" in text
    assert "FAIL" not in text
    manifest = json.loads((out / "verify_manifest.json").read_text())
    assert all(c["passed"] for c in manifest["results"]["checks"])


def test_cli_verify_fails_flat_torus(tmp_path, capsys):
    assert main(["verify", "--out-dir", str(tmp_path / "vf")]) == 1
    assert "order-3 certificate: FAIL" in capsys.readouterr().out


def test_cli_usage_errors_exit_2(tmp_path, capsys):
    assert main(["spectrum", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["spectrum", "--set", "foo.bar=1", "--out-dir", str(tmp_path)]) == 2
    assert main(["frobnicate"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[lattice]\ndim 2\n")
    assert main(["spectrum", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    capsys.readouterr()


def test_cli_seed_flag_overrides_config(tmp_path, capsys):
    out = tmp_path / "sd"
    code = main(
        ["resonances", "--config", CERTIFIED_CONFIG, "--seed", "7", "--out-dir", str(out)]
    )
    assert code == 0
    manifest = json.loads((out / "resonances_manifest.json").read_text())
    assert manifest["seed"] == 7
    capsys.readouterr()


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "latnf.cli", "spectrum", "--out-dir", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "spectrum: 17 modes" in proc.stdout
