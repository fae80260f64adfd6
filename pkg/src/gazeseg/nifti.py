"""Minimal NIfTI-1 reader and debug writer.

Parses the fixed 348-byte header directly: byte order is detected by
checking sizeof_hdr == 348 under either endianness, gzip containers are
recognized by their two magic bytes, and voxel data is read from
vox_offset.  Only the scalar datatypes used by CT volumes are supported.

Header fields used (offset, type):
    0   sizeof_hdr   int32        108  vox_offset  float32
    40  dim[8]       int16        112  scl_slope   float32
    70  datatype     int16        116  scl_inter   float32
    72  bitpix       int16        344  magic       char[4]
    76  pixdim[8]    float32
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadHeader, BadMagic, TruncatedData, UnsupportedDatatype

HEADER_SIZE = 348
MIN_VOX_OFFSET = 352

_DATATYPES = {
    2: ("uint8", 8),
    4: ("int16", 16),
    8: ("int32", 32),
    16: ("float32", 32),
    64: ("float64", 64),
}
_DATATYPE_CODES = {name: code for code, (name, _) in _DATATYPES.items()}
_MAGICS = (b"n+1\x00", b"ni1\x00")


@dataclass(frozen=True, eq=False)
class Volume:
    """A raw 3D scalar volume; voxels stay in stored units, with the
    slope/intercept rescale kept alongside."""

    dims: tuple[int, int, int]  # (H, W, D)
    pixdim: tuple[float, float, float]
    voxels: np.ndarray  # shape (H, W, D), raw units
    rescale: tuple[float, float] = (1.0, 0.0)
    endianness: str = "little"
    datatype: str = "int16"

    def __post_init__(self):
        if any(d < 1 for d in self.dims):
            raise BadHeader("volume dims must all be >= 1")
        if self.voxels.shape != self.dims:
            raise BadHeader(
                f"voxel array shape {self.voxels.shape} does not match dims {self.dims}"
            )
        arr = np.ascontiguousarray(self.voxels)
        arr.setflags(write=False)
        object.__setattr__(self, "voxels", arr)

    def scaled_voxels(self) -> np.ndarray:
        """Voxels with the slope/intercept rescale applied (slope 0 means none)."""
        slope, inter = self.rescale
        data = self.voxels.astype(np.float64)
        if slope != 0.0:
            data = data * slope + inter
        return data

    def slice_raw(self, k: int) -> np.ndarray:
        return self.voxels[:, :, k]


def parse_nifti(data: bytes) -> Volume:
    """Parse a .nii / .nii.gz byte blob into a Volume."""
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise TruncatedData(f"gzip container is damaged: {exc}") from exc
    if len(data) < HEADER_SIZE:
        raise TruncatedData(f"{len(data)} bytes is shorter than the {HEADER_SIZE}-byte header")

    order = None
    for candidate in ("<", ">"):
        if struct.unpack_from(candidate + "i", data, 0)[0] == HEADER_SIZE:
            order = candidate
            break
    if order is None:
        raise BadHeader("sizeof_hdr is not 348 under either byte order")

    magic = data[344:348]
    if magic not in _MAGICS:
        raise BadMagic(f"magic bytes {magic!r} are not a NIfTI-1 signature")

    dim = struct.unpack_from(order + "8h", data, 40)
    datatype_code = struct.unpack_from(order + "h", data, 70)[0]
    pixdim = struct.unpack_from(order + "8f", data, 76)
    vox_offset = int(struct.unpack_from(order + "f", data, 108)[0])
    scl_slope = float(struct.unpack_from(order + "f", data, 112)[0])
    scl_inter = float(struct.unpack_from(order + "f", data, 116)[0])

    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise BadHeader(f"dim[0] = {ndim} outside 1..7")
    if datatype_code not in _DATATYPES:
        raise UnsupportedDatatype(f"datatype code {datatype_code} is not supported")
    dtype_name, _ = _DATATYPES[datatype_code]

    nx = max(1, dim[1])
    ny = max(1, dim[2])
    nz = max(1, dim[3]) if ndim >= 3 else 1
    for extra in range(4, ndim + 1):
        if dim[extra] > 1:
            raise UnsupportedDatatype("volumes with more than three dimensions are not supported")

    if vox_offset < HEADER_SIZE:
        vox_offset = MIN_VOX_OFFSET
    dtype = np.dtype(dtype_name).newbyteorder(order)
    count = nx * ny * nz
    needed = vox_offset + count * dtype.itemsize
    if len(data) < needed:
        raise TruncatedData(f"payload needs {needed} bytes, file has {len(data)}")

    raw = np.frombuffer(data, dtype=dtype, count=count, offset=vox_offset)
    # Stored order is x fastest: index (i, j, k) lives at i + nx*(j + ny*k).
    voxels = raw.reshape(nz, ny, nx).transpose(1, 2, 0)
    voxels = np.ascontiguousarray(voxels.astype(np.dtype(dtype_name)))
    return Volume(
        dims=(ny, nx, nz),
        pixdim=(float(pixdim[1]), float(pixdim[2]), float(pixdim[3])),
        voxels=voxels,
        rescale=(scl_slope, scl_inter),
        endianness="little" if order == "<" else "big",
        datatype=dtype_name,
    )


def write_nifti(vol: Volume) -> bytes:
    """Debug writer: little-endian single-file NIfTI-1 that parse_nifti
    round-trips exactly (dims, pixdim, rescale, voxel payload)."""
    if vol.datatype not in _DATATYPE_CODES:
        raise UnsupportedDatatype(f"cannot write datatype {vol.datatype}")
    h, w, d = vol.dims
    header = bytearray(MIN_VOX_OFFSET)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, w, h, d, 1, 1, 1, 1)
    code = _DATATYPE_CODES[vol.datatype]
    struct.pack_into("<h", header, 70, code)
    struct.pack_into("<h", header, 72, _DATATYPES[code][1])
    struct.pack_into("<8f", header, 76, 1.0, vol.pixdim[0], vol.pixdim[1], vol.pixdim[2], 0, 0, 0, 0)
    struct.pack_into("<f", header, 108, float(MIN_VOX_OFFSET))
    struct.pack_into("<f", header, 112, vol.rescale[0])
    struct.pack_into("<f", header, 116, vol.rescale[1])
    header[344:348] = b"n+1\x00"
    payload = (
        vol.voxels.astype(np.dtype(vol.datatype).newbyteorder("<"))
        .transpose(2, 0, 1)
        .tobytes()
    )
    return bytes(header) + payload
