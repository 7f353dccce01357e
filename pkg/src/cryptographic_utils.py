from pathlib import Path
from typing import Iterable

from cryptography.hazmat.primitives import hashes


def crypto_hash(data: bytes) -> bytes:
    """
    uses SHA256 to cryptographically hash inputs
    """
    digest = hashes.Hash(hashes.SHA256())
    digest.update(data)
    return digest.finalize()


def file_digest(path: Path) -> str:
    """hex digest of a file's bytes"""
    return crypto_hash(Path(path).read_bytes()).hex()


def artifact_digests(directory: Path, names: Iterable[str]) -> dict[str, str]:
    """digest of every named artifact present in the directory, by name"""
    directory = Path(directory)
    return {name: file_digest(directory / name) for name in sorted(names) if (directory / name).is_file()}


def derive_seed(seed: int, label: str) -> int:
    """
    derives an independent 64-bit seed for a labelled random stream, so the
    streams of a run do not shift when one of them draws more numbers
    """
    return int.from_bytes(crypto_hash(f"{seed}:{label}".encode())[:8], "big")


__all__ = ["crypto_hash", "file_digest", "artifact_digests", "derive_seed"]
