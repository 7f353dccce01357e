import math
from pathlib import Path

import numpy as np

from src.cryptographic_utils import artifact_digests, crypto_hash, derive_seed, file_digest
from src.validations import (
    validate_disjoint,
    validate_elliptic,
    validate_observation_angles,
    validate_psd,
    validate_site,
    validate_sorted,
)


def test_psd() -> None:
    assert validate_psd(np.eye(6))
    assert validate_psd(np.zeros((6, 6)))
    assert not validate_psd(-np.eye(3))
    assert not validate_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert not validate_psd(np.ones((2, 3)))
    assert not validate_psd(np.array([[np.nan]]))


def test_geometry_checks() -> None:
    assert validate_elliptic(7000.0, 0.0)
    assert not validate_elliptic(7000.0, 1.0)
    assert not validate_elliptic(-1.0, 0.1)
    assert validate_site(-0.37, 0.96, 0.991)
    assert not validate_site(2.0, 0.0, 0.0)
    assert not validate_site(0.0, 0.0, -0.1)
    assert validate_observation_angles(math.pi / 2.0, 1e-6, 1e-6)
    assert not validate_observation_angles(0.1, 0.0, 1e-6)
    assert not validate_observation_angles(2.0, 1e-6, 1e-6)


def test_ordering_checks() -> None:
    assert validate_sorted([1.0, 1.0, 2.0])
    assert validate_sorted([])
    assert not validate_sorted([2.0, 1.0])
    assert validate_disjoint([0, 1], [2])
    assert not validate_disjoint([0, 1], [1, 2])


def test_hash() -> None:
    assert crypto_hash(b"abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_derived_seeds() -> None:
    assert derive_seed(1, "target") == derive_seed(1, "target")
    assert derive_seed(1, "target") != derive_seed(1, "outlier")
    assert derive_seed(1, "target") != derive_seed(2, "target")
    assert 0 <= derive_seed(1, "monte_carlo") < 2 ** 64


def test_artifact_digests(tmp_path: Path) -> None:
    (tmp_path / "a.csv").write_bytes(b"abc")
    (tmp_path / "b.json").write_text("{}")
    digests = artifact_digests(tmp_path, ["b.json", "a.csv", "missing.csv"])
    assert list(digests) == ["a.csv", "b.json"]
    assert digests["a.csv"] == file_digest(tmp_path / "a.csv") == crypto_hash(b"abc").hex()
