"""Binary file formats for descriptors, dictionaries, subspaces and features.

All formats are little-endian and start with a 4-byte magic and a u16
version:

    LDPF  count u32, dim u32, dtype u8 (0=float32, 1=uint8), row-major payload
    LDPD  metric u8, |K| u32, n u32, float32 entries, u32-prefixed UTF-8 JSON
    LDPS  n u32, m u32, float32 translation, float32 basis rows
    LDPZ  m u32, keypoint 2 x float32 (NaN when absent), m x u32 indices

Subspace and feature files may hold several records back to back.
"""

import json
import math
import os
import struct
import tempfile
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..models.descriptors import AffineSubspace, Descriptor, DescriptorDType, Dictionary, DictionaryMetric
from ..models.privacy import PrivatizedFeature
from ..utils.exceptions import CorruptFile, FileProcessingError, GeometryError, VersionUnsupported
from ..utils.logging_config import get_logger
from ..utils.validators import as_matrix, validate_file_size

logger = get_logger(__name__)

FORMAT_VERSION = 1

_DESCRIPTOR_HEADER = struct.Struct('<4sHIIB')
_DICTIONARY_HEADER = struct.Struct('<4sHBII')
_SUBSPACE_HEADER = struct.Struct('<4sHII')
_FEATURE_HEADER = struct.Struct('<4sHI')
_KEYPOINT = struct.Struct('<2f')
_LENGTH = struct.Struct('<I')

_PARTITION_KEY = 'partition_map'

PathLike = Union[str, Path]


def _check_header(buffer: bytes, offset: int, header: struct.Struct, magic: bytes) -> Tuple:
    if len(buffer) - offset < header.size:
        raise CorruptFile(f"Truncated {magic.decode()} header")
    fields = header.unpack_from(buffer, offset)
    if fields[0] != magic:
        raise CorruptFile(f"Bad magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != FORMAT_VERSION:
        raise VersionUnsupported(f"{magic.decode()} version {fields[1]} is not supported")
    return fields


def _take(buffer: bytes, offset: int, nbytes: int, what: str) -> bytes:
    if nbytes < 0 or offset + nbytes > len(buffer):
        raise CorruptFile(f"Truncated {what}: need {nbytes} bytes at offset {offset}")
    return buffer[offset:offset + nbytes]


class FileProcessor:
    """Service for reading and writing the toolkit's binary files."""
    
    def __init__(self, max_file_size_mb: int = 2048):
        """
        Initialize file processor.
        
        Args:
            max_file_size_mb: Maximum file size in MB accepted on read
        """
        self.max_file_size_mb = max_file_size_mb

    def _read(self, path: PathLike) -> bytes:
        try:
            content = Path(path).read_bytes()
        except OSError as e:
            logger.error(f"Cannot read {path}: {str(e)}")
            raise FileProcessingError(f"Cannot read {path}: {str(e)}") from e
        validate_file_size(content, self.max_file_size_mb)
        return content

    def _write(self, path: PathLike, content: bytes) -> None:
        """Write through a temporary file in the target directory, then rename."""
        target = Path(path)
        tmp_name = None
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with tempfile.NamedTemporaryFile(dir=target.parent, prefix=f".{target.name}.", delete=False) as tmp:
                tmp_name = tmp.name
                tmp.write(content)
            os.replace(tmp_name, target)
        except OSError as e:
            if tmp_name and os.path.exists(tmp_name):
                os.unlink(tmp_name)
            logger.error(f"Cannot write {path}: {str(e)}")
            raise FileProcessingError(f"Cannot write {path}: {str(e)}") from e
        logger.info(f"Wrote {len(content)} bytes to {target}")

    def write_text(self, path: PathLike, text: str) -> None:
        """Atomically write a UTF-8 text file (reports, summaries)."""
        self._write(path, text.encode("utf-8"))

    # descriptors (LDPF)

    def encode_descriptors(self, descriptors, dtype: DescriptorDType = DescriptorDType.FLOAT32) -> bytes:
        """
        Encode descriptors as an LDPF payload.

        Args:
            descriptors: Matrix or sequence of descriptors
            dtype: Storage type; uint8 stores round(255 * value)

        Returns:
            Encoded bytes
        """
        if isinstance(descriptors, Sequence) and descriptors and isinstance(descriptors[0], Descriptor):
            mat = np.vstack([d.as_array() for d in descriptors])
        else:
            mat = as_matrix(descriptors)
        if dtype is DescriptorDType.UINT8:
            if np.any(mat < 0) or np.any(mat > 1):
                raise FileProcessingError("uint8 descriptors must lie in [0, 1]")
            payload = np.rint(mat * 255.0).astype('<u1').tobytes()
            code = 1
        else:
            payload = mat.astype('<f4').tobytes()
            code = 0
        header = _DESCRIPTOR_HEADER.pack(b'LDPF', FORMAT_VERSION, mat.shape[0], mat.shape[1], code)
        return header + payload

    def decode_descriptors(self, content: bytes) -> Tuple[np.ndarray, DescriptorDType]:
        """
        Decode an LDPF payload.

        Returns:
            (float64 matrix, stored dtype); uint8 rows come back as k/255

        Raises:
            CorruptFile: On bad magic or a length mismatch
            VersionUnsupported: On an unknown version
        """
        _, _, count, dim, code = _check_header(content, 0, _DESCRIPTOR_HEADER, b'LDPF')
        if code not in (0, 1):
            raise CorruptFile(f"Unknown LDPF dtype code {code}")
        itemsize = 4 if code == 0 else 1
        expected = _DESCRIPTOR_HEADER.size + count * dim * itemsize
        if len(content) != expected:
            raise CorruptFile(f"LDPF length {len(content)} does not match header ({expected})")
        body = content[_DESCRIPTOR_HEADER.size:]
        if code == 0:
            mat = np.frombuffer(body, dtype='<f4').reshape(count, dim).astype(np.float64)
            return mat, DescriptorDType.FLOAT32
        codes = np.frombuffer(body, dtype='<u1').reshape(count, dim)
        return codes.astype(np.float64) / 255.0, DescriptorDType.UINT8

    def save_descriptor_file(self, path: PathLike, descriptors,
                             dtype: DescriptorDType = DescriptorDType.FLOAT32) -> None:
        """Write descriptors to an LDPF file."""
        self._write(path, self.encode_descriptors(descriptors, dtype))

    def load_descriptor_matrix(self, path: PathLike) -> np.ndarray:
        """Read an LDPF file as a float64 matrix."""
        mat, _ = self.decode_descriptors(self._read(path))
        return mat

    def load_descriptor_file(self, path: PathLike) -> List[Descriptor]:
        """Read an LDPF file as a list of descriptors."""
        mat, dtype = self.decode_descriptors(self._read(path))
        logger.info(f"Loaded {mat.shape[0]} descriptors of dimension {mat.shape[1]} from {path}")
        return [Descriptor(values=row, dtype=dtype) for row in mat]

    # dictionaries (LDPD)

    def encode_dictionary(self, dictionary: Dictionary) -> bytes:
        """Encode a dictionary as an LDPD payload."""
        header = _DICTIONARY_HEADER.pack(b'LDPD', FORMAT_VERSION, dictionary.metric.value,
                                         dictionary.size, dictionary.n)
        meta = dict(dictionary.provenance)
        if dictionary.partitions is not None:
            meta[_PARTITION_KEY] = [int(p) for p in dictionary.partitions]
        blob = json.dumps(meta, sort_keys=True).encode('utf-8')
        return header + dictionary.entries.astype('<f4').tobytes() + _LENGTH.pack(len(blob)) + blob

    def decode_dictionary(self, content: bytes) -> Dictionary:
        """
        Decode an LDPD payload.

        Raises:
            CorruptFile: On bad magic, truncation, trailing bytes or bad metadata
            VersionUnsupported: On an unknown version
        """
        _, _, metric_code, size, dim = _check_header(content, 0, _DICTIONARY_HEADER, b'LDPD')
        try:
            metric = DictionaryMetric(metric_code)
        except ValueError as e:
            raise CorruptFile(f"Unknown LDPD metric code {metric_code}") from e
        offset = _DICTIONARY_HEADER.size
        body = _take(content, offset, size * dim * 4, "LDPD entries")
        offset += len(body)
        (length,) = _LENGTH.unpack(_take(content, offset, _LENGTH.size, "LDPD metadata length"))
        offset += _LENGTH.size
        blob = _take(content, offset, length, "LDPD metadata")
        if offset + length != len(content):
            raise CorruptFile("Trailing bytes after LDPD metadata")
        try:
            meta = json.loads(blob.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptFile(f"Unreadable LDPD metadata: {e}") from e
        partitions = meta.pop(_PARTITION_KEY, None)
        entries = np.frombuffer(body, dtype='<f4').reshape(size, dim).astype(np.float32)
        try:
            return Dictionary(entries=entries, metric=metric, provenance=meta,
                              partitions=None if partitions is None else np.asarray(partitions))
        except GeometryError as e:
            raise CorruptFile(f"Invalid dictionary contents: {e}") from e

    def save_dictionary(self, dictionary: Dictionary, path: PathLike) -> None:
        self._write(path, self.encode_dictionary(dictionary))

    def load_dictionary(self, path: PathLike) -> Dictionary:
        dictionary = self.decode_dictionary(self._read(path))
        logger.info(f"Loaded dictionary of {dictionary.size} entries from {path}")
        return dictionary

    # subspaces (LDPS)

    def encode_subspace(self, subspace: AffineSubspace) -> bytes:
        header = _SUBSPACE_HEADER.pack(b'LDPS', FORMAT_VERSION, subspace.n, subspace.dim)
        return (header + subspace.translation.astype('<f4').tobytes()
                + subspace.basis.astype('<f4').tobytes())

    def _decode_subspace_at(self, content: bytes, offset: int) -> Tuple[AffineSubspace, int]:
        _, _, n, m = _check_header(content, offset, _SUBSPACE_HEADER, b'LDPS')
        offset += _SUBSPACE_HEADER.size
        body = _take(content, offset, (m + 1) * n * 4, "LDPS payload")
        values = np.frombuffer(body, dtype='<f4').astype(np.float64)
        try:
            subspace = AffineSubspace(translation=values[:n], basis=values[n:].reshape(m, n))
        except GeometryError as e:
            raise CorruptFile(f"Invalid subspace record: {e}") from e
        return subspace, offset + len(body)

    def decode_subspace(self, content: bytes) -> AffineSubspace:
        """Decode exactly one LDPS record."""
        subspace, end = self._decode_subspace_at(content, 0)
        if end != len(content):
            raise CorruptFile("Trailing bytes after LDPS record")
        return subspace

    def write_subspaces(self, path: PathLike, subspaces: Sequence[AffineSubspace]) -> None:
        self._write(path, b''.join(self.encode_subspace(s) for s in subspaces))

    def read_subspaces(self, path: PathLike) -> List[AffineSubspace]:
        content = self._read(path)
        subspaces, offset = [], 0
        while offset < len(content):
            subspace, offset = self._decode_subspace_at(content, offset)
            subspaces.append(subspace)
        return subspaces

    # privatized features (LDPZ)

    def encode_feature(self, feature: PrivatizedFeature) -> bytes:
        keypoint = feature.keypoint if feature.keypoint is not None else (math.nan, math.nan)
        return (_FEATURE_HEADER.pack(b'LDPZ', FORMAT_VERSION, feature.m)
                + _KEYPOINT.pack(*keypoint)
                + feature.indices.astype('<u4').tobytes())

    def _decode_feature_at(self, content: bytes, offset: int) -> Tuple[PrivatizedFeature, int]:
        _, _, m = _check_header(content, offset, _FEATURE_HEADER, b'LDPZ')
        offset += _FEATURE_HEADER.size
        x, y = _KEYPOINT.unpack(_take(content, offset, _KEYPOINT.size, "LDPZ keypoint"))
        offset += _KEYPOINT.size
        body = _take(content, offset, m * 4, "LDPZ indices")
        indices = np.frombuffer(body, dtype='<u4').astype(np.int64)
        keypoint = None if math.isnan(x) and math.isnan(y) else (x, y)
        try:
            feature = PrivatizedFeature(indices=indices, keypoint=keypoint)
        except ValueError as e:
            raise CorruptFile(f"Invalid feature record: {e}") from e
        return feature, offset + len(body)

    def decode_feature(self, content: bytes) -> PrivatizedFeature:
        """Decode exactly one LDPZ record."""
        feature, end = self._decode_feature_at(content, 0)
        if end != len(content):
            raise CorruptFile("Trailing bytes after LDPZ record")
        return feature

    def write_features(self, path: PathLike, features: Sequence[PrivatizedFeature]) -> None:
        self._write(path, b''.join(self.encode_feature(f) for f in features))

    def read_features(self, path: PathLike) -> List[PrivatizedFeature]:
        content = self._read(path)
        features, offset = [], 0
        while offset < len(content):
            feature, offset = self._decode_feature_at(content, offset)
            features.append(feature)
        return features
