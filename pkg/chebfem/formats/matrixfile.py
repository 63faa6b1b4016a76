"""
Plain-text matrix dumps, one entry per line: `i j value` with 17
significant digits. Both triangles of symmetric matrices are written.
"""
from typing import Iterator, Optional, Tuple

import numpy as np

from chebfem.common.exceptions import MatrixFormatError

Entry = Tuple[int, int, float]


def format_entry(i: int, j: int, value: float) -> str:
    return '%d %d %.17g' % (i, j, value)


def parse_entry(line: str) -> Entry:
    parts = line.split()
    if len(parts) != 3:
        raise MatrixFormatError(line, 'expected three fields')
    try:
        return int(parts[0]), int(parts[1]), float(parts[2])
    except ValueError:
        raise MatrixFormatError(line, 'malformed number')


class MatrixPacketizer:
    """Incremental line codec, input may arrive in arbitrary chunks."""

    def __init__(self):
        self.in_buffer = b''

    def process_buffer(self) -> Iterator[Entry]:
        # matrix dumps are line based
        # so split the buffer by \n and parse complete lines
        while len(self.in_buffer) > 0:
            pos = self.in_buffer.find(b'\n')
            if pos == -1:
                break
            temp = self.in_buffer[:pos]
            self.in_buffer = self.in_buffer[pos + 1:]
            try:
                line = temp.decode().strip()
            except UnicodeDecodeError:
                raise MatrixFormatError(repr(temp), 'not valid UTF-8')
            if line:
                yield parse_entry(line)

    def data_in(self, data: Optional[bytes]) -> Iterator[Entry]:
        """Feed a chunk; None flushes a trailing line without newline."""
        if data is None:
            if self.in_buffer.strip():
                self.in_buffer += b'\n'
        else:
            self.in_buffer += data
        for entry in self.process_buffer():
            yield entry

    @staticmethod
    def data_out(A: np.ndarray, threshold: float = 0.0) -> Iterator[bytes]:
        """Entries above threshold in row-major order. The bottom-right entry is always written so the shape survives."""
        keep = np.abs(A) > threshold
        if A.size:
            keep[-1, -1] = True
        rows, cols = np.nonzero(keep)
        for i, j in zip(rows, cols):
            yield (format_entry(int(i), int(j), float(A[i, j])) + '\n').encode()


def write_matrix(path: str, A: np.ndarray, threshold: float = 0.0):
    with open(path, 'wb') as f:
        for line in MatrixPacketizer.data_out(A, threshold):
            f.write(line)


def read_matrix(path: str, shape: Optional[Tuple[int, int]] = None, chunksize: int = 65536) -> np.ndarray:
    entries = []
    packetizer = MatrixPacketizer()
    with open(path, 'rb') as f:
        while True:
            chunk = f.read(chunksize)
            if len(chunk) == 0:
                break
            entries.extend(packetizer.data_in(chunk))
    entries.extend(packetizer.data_in(None))
    if shape is None:
        shape = (1 + max((i for i, _, _ in entries), default=-1), 1 + max((j for _, j, _ in entries), default=-1))
    A = np.zeros(shape)
    for i, j, value in entries:
        A[i, j] = value
    return A
