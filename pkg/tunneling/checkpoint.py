"""
Binary wavefunction checkpoints.

Layout (little-endian):
    magic      4 bytes  b"FTWF"
    version    uint32
    N          uint32
    L          float64
    alpha      float64
    time       float64
    flags      uint32   bit 0: imaginary-time state, bit 1: mask applied
    N complex values as interleaved (real, imag) float64 pairs
"""
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.errors import CheckpointError
from tunneling.grid import make_grid
from tunneling.prop import StepMode, WaveFunction

logger = logging.getLogger(__name__)

MAGIC = b"FTWF"
VERSION = 1
_HEADER = struct.Struct("<4sIIdddI")
_FLAG_IMAGINARY = 1
_FLAG_MASK = 2


@dataclass(frozen=True)
class CheckpointHeader:
    N: int
    L: float
    alpha: float
    time: float
    mode: StepMode
    mask_applied: bool
    version: int = VERSION


def save_checkpoint(
    path: Path | str,
    psi: WaveFunction,
    alpha: float,
    time: float,
    mode: StepMode | str = StepMode.REAL_TIME,
    mask_applied: bool = False,
) -> Path:
    path = Path(path)
    flags = (_FLAG_IMAGINARY if StepMode(mode) == StepMode.IMAGINARY_TIME else 0) | (_FLAG_MASK if mask_applied else 0)
    header = _HEADER.pack(MAGIC, VERSION, psi.grid.N, psi.grid.L, float(alpha), float(time), flags)
    payload = np.ascontiguousarray(psi.amplitudes, dtype="<c16").tobytes()

    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(path.suffix + ".tmp")
    with open(temp_file, "wb") as f:
        f.write(header)
        f.write(payload)
        f.flush()
        os.fsync(f.fileno())
    temp_file.replace(path)
    logger.debug(f"Checkpoint written: {path} (N={psi.grid.N}, t={time})")
    return path


def load_checkpoint(path: Path | str, power_of_two: bool = False) -> tuple[WaveFunction, CheckpointHeader]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path} is too short for a checkpoint header")
    magic, version, N, L, alpha, time, flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path} is not a wavefunction checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version} in {path}")
    expected = _HEADER.size + 16 * N
    if len(data) != expected:
        raise CheckpointError(f"{path} holds {len(data)} bytes, expected {expected} for N={N}")

    amplitudes = np.frombuffer(data, dtype="<c16", count=N, offset=_HEADER.size).astype(np.complex128)
    grid = make_grid(L, N, power_of_two=power_of_two)
    header = CheckpointHeader(
        N=N,
        L=L,
        alpha=alpha,
        time=time,
        mode=StepMode.IMAGINARY_TIME if flags & _FLAG_IMAGINARY else StepMode.REAL_TIME,
        mask_applied=bool(flags & _FLAG_MASK),
        version=version,
    )
    return WaveFunction(grid, amplitudes), header
