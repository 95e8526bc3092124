import json
import os

import pytest

from blochhom.cli import main
from blochhom.config import ConfigError, ExperimentConfig, load_config

ISO_CFG = """
K = 2
out_dir = "{out}"
seed = 7

[medium]
builder = "isotropic"
lambda = 1.0
mu = 1.0
resolution = 2
"""

LAM_CFG = """
K = 2
j_range = [2, 3, 4]
out_dir = "{out}"
seed = 7

[medium]
builder = "laminate"
fraction = 0.5
axis = 1
resolution = 8
phases = [{{lambda = 1.0, mu = 1.0}}, {{lambda = 2.0, mu = 2.0}}]
"""


def write_cfg(tmp_path, text, name="cfg.toml"):
    p = os.path.join(tmp_path, name)
    with open(p, 'w') as fh:
        fh.write(text.format(out=os.path.join(tmp_path, "out")))
    return p


def test_missing_k_is_named(tmp_path):
    p = os.path.join(tmp_path, "bad.toml")
    with open(p, 'w') as fh:
        fh.write('[medium]\nbuilder = "isotropic"\nlambda = 1.0\nmu = 1.0\n')
    with pytest.raises(ConfigError, match="K"):
        load_config(p)


def test_unknown_field_rejected(tmp_path):
    p = os.path.join(tmp_path, "bad.toml")
    with open(p, 'w') as fh:
        fh.write('K = 2\nwavelength = 3\n[medium]\nbuilder = "isotropic"\n'
                 'lambda = 1.0\nmu = 1.0\n')
    with pytest.raises(ConfigError, match="wavelength"):
        load_config(p)


def test_malformed_toml(tmp_path):
    p = os.path.join(tmp_path, "bad.toml")
    with open(p, 'w') as fh:
        fh.write('K = = 2\n')
    with pytest.raises(ConfigError, match="parse"):
        load_config(p)


def test_cli_exit_codes(tmp_path):
    assert main(["cell", "--config", os.path.join(tmp_path, "nope.toml")]) == 1
    cfg = write_cfg(tmp_path, ISO_CFG)
    assert main(["cell", "--config", cfg]) == 0
    out = os.path.join(tmp_path, "out")
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["studies"]["cell"]["pass"] is True
    assert os.path.exists(os.path.join(out, "hom_tensor.json"))


def test_cli_k_override(tmp_path):
    cfg = write_cfg(tmp_path, ISO_CFG)
    assert main(["cell", "--config", cfg, "--k", "1"]) == 0
    manifest = json.load(open(os.path.join(tmp_path, "out", "manifest.json")))
    assert manifest["config_hash"] != ExperimentConfig(
        medium={"builder": "isotropic", "lambda": 1.0, "mu": 1.0,
                "resolution": 2}, K=2, out_dir=os.path.join(tmp_path, "out"),
        seed=7).digest()


def test_cli_korn_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, LAM_CFG)
    out = os.path.join(tmp_path, "out")
    assert main(["korn", "--config", cfg]) == 0
    first = open(os.path.join(out, "korn.csv"), 'rb').read()
    assert main(["korn", "--config", cfg]) == 0
    second = open(os.path.join(out, "korn.csv"), 'rb').read()
    assert first == second


def test_cli_bloch_determinism(tmp_path):
    cfg = write_cfg(tmp_path, LAM_CFG)
    out = os.path.join(tmp_path, "out")
    assert main(["bloch", "--config", cfg]) == 0
    first = open(os.path.join(out, "bands.csv"), 'rb').read()
    assert main(["bloch", "--config", cfg]) == 0
    second = open(os.path.join(out, "bands.csv"), 'rb').read()
    assert first == second
    lines = first.decode().splitlines()
    assert lines[0] == "chi1,chi2,chi3,index,eigenvalue"


def test_cli_two_scale(tmp_path):
    cfg = write_cfg(tmp_path, LAM_CFG)
    assert main(["two-scale", "--config", cfg]) == 0
    out = os.path.join(tmp_path, "out")
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["studies"]["two_scale"]["worst_defect"] <= 1e-9


def test_warm_cache_rerun_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOCHHOM_CACHE", os.path.join(tmp_path, "cache"))
    cfg = write_cfg(tmp_path, LAM_CFG)
    out = os.path.join(tmp_path, "out")
    assert main(["cell", "--config", cfg]) == 0
    cold = open(os.path.join(out, "hom_tensor.json"), 'rb').read()
    assert os.listdir(os.path.join(tmp_path, "cache"))
    assert main(["cell", "--config", cfg]) == 0
    warm = open(os.path.join(out, "hom_tensor.json"), 'rb').read()
    assert cold == warm


def test_config_defaults_and_digest():
    cfg = ExperimentConfig(medium={"builder": "isotropic", "lambda": 1.0,
                                   "mu": 1.0}, K=3)
    assert cfg.j_range == [2, 3, 4, 5, 6]
    assert cfg.gammas == [-0.5, 0.0, 1.0]
    assert len(cfg.digest()) == 64
    with pytest.raises(ConfigError):
        ExperimentConfig(medium={}, K=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(medium={}, K=2, gammas=[-2.0])
