"""Bit-exact PGM (P2/P5) and PAM (P7) readers and writers.

These are the interchange formats for every mask and report image the
toolkit emits. Only 8-bit data is supported: a maxval above 255 is a hard
error, reported with the byte offset where the header declared it, never a
silent rescale. Multi-channel PAM files load as one grayscale image per
channel; a depth-3 file is tagged red/green/blue.
"""

from __future__ import annotations

import os
from typing import Dict, Sequence, Union

import numpy as np

from .images import GrayImage

_WHITESPACE = b" \t\r\n\x0b\x0c"


class ImageFormatError(ValueError):
    """Malformed or unsupported image file; `offset` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class _Cursor:
    """Token scanner over raw bytes that remembers where every token began."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_separators(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = self.data[self.pos : self.pos + 1]
            if c in (b"#",):
                eol = data.find(b"\n", self.pos)
                self.pos = n if eol < 0 else eol + 1
            elif c in _WHITESPACE:
                self.pos += 1
            else:
                return

    def next_token(self) -> tuple:
        self.skip_separators()
        start = self.pos
        if start >= len(self.data):
            raise ImageFormatError("unexpected end of file while reading header", start)
        end = start
        while end < len(self.data) and self.data[end : end + 1] not in _WHITESPACE:
            end += 1
        self.pos = end
        return self.data[start:end], start

    def next_int(self, what: str) -> tuple:
        token, start = self.next_token()
        try:
            return int(token), start
        except ValueError:
            raise ImageFormatError(f"malformed {what}: {token!r}", start) from None


def _check_dimensions(width, height, offset):
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}", offset)


def _check_maxval(maxval, offset):
    if maxval < 1:
        raise ImageFormatError(f"invalid maxval {maxval}", offset)
    if maxval > 255:
        raise ImageFormatError(f"unsupported maxval {maxval} > 255", offset)


def _load_p2(cur: _Cursor, calibration) -> GrayImage:
    width, off = cur.next_int("width")
    height, off2 = cur.next_int("height")
    _check_dimensions(width, height, off)
    maxval, off = cur.next_int("maxval")
    _check_maxval(maxval, off)
    values = np.empty(width * height, dtype=np.uint8)
    for i in range(width * height):
        try:
            v, off = cur.next_int("pixel value")
        except ImageFormatError as exc:
            raise ImageFormatError(f"truncated payload: expected {width * height} values, got {i}", exc.offset) from None
        if not 0 <= v <= maxval:
            raise ImageFormatError(f"pixel value {v} out of range [0, {maxval}]", off)
        values[i] = v
    return GrayImage(values.reshape(height, width), calibration)


def _load_p5(cur: _Cursor, calibration) -> GrayImage:
    width, off = cur.next_int("width")
    height, off2 = cur.next_int("height")
    _check_dimensions(width, height, off)
    maxval, off = cur.next_int("maxval")
    _check_maxval(maxval, off)
    # exactly one whitespace byte separates the header from the raster
    if cur.pos >= len(cur.data) or cur.data[cur.pos : cur.pos + 1] not in _WHITESPACE:
        raise ImageFormatError("missing whitespace before binary raster", cur.pos)
    cur.pos += 1
    need = width * height
    raster = cur.data[cur.pos : cur.pos + need]
    if len(raster) < need:
        raise ImageFormatError(
            f"truncated payload: expected {need} raster bytes, got {len(raster)}", len(cur.data)
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels, calibration)


_P7_CHANNEL_TAGS = {3: ("red", "green", "blue")}


def _load_p7(cur: _Cursor, calibration) -> Union[GrayImage, Dict[str, GrayImage]]:
    width = height = depth = maxval = None
    dims_offset = cur.pos
    while True:
        token, off = cur.next_token()
        key = token.upper()
        if key == b"ENDHDR":
            break
        elif key in (b"WIDTH", b"HEIGHT", b"DEPTH", b"MAXVAL"):
            value, voff = cur.next_int(key.decode().lower())
            if key == b"WIDTH":
                width, dims_offset = value, off
            elif key == b"HEIGHT":
                height = value
            elif key == b"DEPTH":
                depth = value
                if depth < 1:
                    raise ImageFormatError(f"invalid depth {depth}", voff)
            else:
                maxval = value
                _check_maxval(maxval, voff)
        elif key == b"TUPLTYPE":
            cur.next_token()
        else:
            raise ImageFormatError(f"unknown PAM header field {token!r}", off)
    if None in (width, height, depth, maxval):
        raise ImageFormatError("PAM header is missing WIDTH, HEIGHT, DEPTH or MAXVAL", cur.pos)
    _check_dimensions(width, height, dims_offset)
    # ENDHDR is terminated by exactly one newline
    if cur.data[cur.pos : cur.pos + 1] != b"\n":
        raise ImageFormatError("ENDHDR must be followed by a newline", cur.pos)
    cur.pos += 1
    need = width * height * depth
    raster = cur.data[cur.pos : cur.pos + need]
    if len(raster) < need:
        raise ImageFormatError(
            f"truncated payload: expected {need} raster bytes, got {len(raster)}", len(cur.data)
        )
    samples = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, depth)
    if depth == 1:
        return GrayImage(samples[:, :, 0], calibration)
    tags = _P7_CHANNEL_TAGS.get(depth, tuple(f"ch{i}" for i in range(depth)))
    return {tag: GrayImage(samples[:, :, i], calibration) for i, tag in enumerate(tags)}


def load_image(path, calibration: float = None) -> Union[GrayImage, Dict[str, GrayImage]]:
    """Load a PGM (P2/P5) or PAM (P7) file.

    Returns a single GrayImage, or for multi-channel PAM a dict of channel
    tag -> GrayImage. `calibration` (microns per pixel) is attached to every
    returned image; the formats themselves carry no physical scale.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    magic, off = cur.next_token()
    if magic == b"P2":
        return _load_p2(cur, calibration)
    if magic == b"P5":
        return _load_p5(cur, calibration)
    if magic == b"P7":
        return _load_p7(cur, calibration)
    raise ImageFormatError(f"unsupported magic {magic!r} (want P2, P5 or P7)", off)


def load_gray(path, calibration: float = None) -> GrayImage:
    """Like load_image but rejects multi-channel files."""
    img = load_image(path, calibration)
    if not isinstance(img, GrayImage):
        raise ImageFormatError(f"{os.fspath(path)} is multi-channel, expected grayscale", 0)
    return img


def save_image(img, path, format: str = "P5") -> None:
    """Write a GrayImage (P2/P5) or a channel dict/sequence (P7).

    Output is canonical: fixed header layout, maxval 255, newline separators.
    Loading the written file reproduces the pixel data exactly.
    """
    if format in ("P2", "P5"):
        if not isinstance(img, GrayImage):
            raise TypeError(f"{format} stores a single channel, got {type(img).__name__}")
        with open(path, "wb") as fh:
            fh.write(f"{format}\n{img.width} {img.height}\n255\n".encode())
            if format == "P5":
                fh.write(img.pixels.tobytes())
            else:
                lines = [" ".join(str(v) for v in row) for row in img.pixels]
                fh.write(("\n".join(lines) + "\n").encode())
    elif format == "P7":
        if isinstance(img, dict):
            channels = list(img.values())
        elif isinstance(img, GrayImage):
            channels = [img]
        else:
            channels = list(img)
        first = channels[0]
        if any((c.width, c.height) != (first.width, first.height) for c in channels):
            raise ValueError("all channels must share dimensions")
        depth = len(channels)
        tupltype = {1: "GRAYSCALE", 3: "RGB"}.get(depth, "MULTI")
        stacked = np.stack([c.pixels for c in channels], axis=-1)
        with open(path, "wb") as fh:
            fh.write(
                f"P7\nWIDTH {first.width}\nHEIGHT {first.height}\nDEPTH {depth}\n"
                f"MAXVAL 255\nTUPLTYPE {tupltype}\nENDHDR\n".encode()
            )
            fh.write(stacked.tobytes())
    else:
        raise ValueError(f"unsupported format {format!r} (want P2, P5 or P7)")


def save_mask(mask, path, format: str = "P5") -> None:
    """Write a BinaryImage as a 0/255 PGM."""
    save_image(GrayImage(np.where(mask.mask, 255, 0).astype(np.uint8)), path, format)
