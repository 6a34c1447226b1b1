"""Bit-exact codec for a compact RRC setup request.

Layout, MSB first over 56 bits (7 bytes)::

    bits  0..7   message_type (always 0x01)
    bits  8..46  ue_identity (39 bits)
    bits 47..50  establishment_cause (4 bits, valid 0..7)
    bits 51..55  spare, must be zero
"""
from __future__ import annotations

from dataclasses import dataclass

MESSAGE_TYPE = 0x01
LENGTH_BYTES = 7
LENGTH_BITS = 56
IDENTITY_BITS = 39
IDENTITY_MAX = (1 << IDENTITY_BITS) - 1
MAX_CAUSE = 7

# Bit positions (MSB-first) whose flip still yields a decodable message.
TOLERANT_BITS = frozenset(range(8, 47)) | frozenset(range(48, 51))


class RrcReject(ValueError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class RrcSetupRequest:
    ue_identity: int
    establishment_cause: int
    message_type: int = MESSAGE_TYPE


def encode_setup_request(msg: RrcSetupRequest) -> bytes:
    if not 0 <= msg.ue_identity <= IDENTITY_MAX:
        raise ValueError(f"ue_identity out of range: {msg.ue_identity}")
    if not 0 <= msg.establishment_cause <= MAX_CAUSE:
        raise ValueError(f"establishment_cause out of range: {msg.establishment_cause}")
    if msg.message_type != MESSAGE_TYPE:
        raise ValueError(f"message_type must be {MESSAGE_TYPE:#04x}")
    word = (msg.message_type << 48) | (msg.ue_identity << 9) | (msg.establishment_cause << 5)
    return word.to_bytes(LENGTH_BYTES, "big")


def decode_setup_request(buffer: bytes) -> RrcSetupRequest:
    """Decode a 7-byte buffer, raising RrcReject with the first failing check.

    Checks run in order: bad_type, bad_cause, bad_spare.
    """
    if len(buffer) != LENGTH_BYTES:
        raise ValueError(f"expected {LENGTH_BYTES} bytes, got {len(buffer)}")
    word = int.from_bytes(buffer, "big")
    message_type = word >> 48
    identity = (word >> 9) & IDENTITY_MAX
    cause = (word >> 5) & 0xF
    spare = word & 0x1F
    if message_type != MESSAGE_TYPE:
        raise RrcReject("bad_type")
    if cause > MAX_CAUSE:
        raise RrcReject("bad_cause")
    if spare:
        raise RrcReject("bad_spare")
    return RrcSetupRequest(ue_identity=identity, establishment_cause=cause)


def flip_bit(buffer: bytes, position: int) -> bytes:
    """Invert one bit, counting MSB-first from the start of the buffer."""
    out = bytearray(buffer)
    out[position // 8] ^= 0x80 >> (position % 8)
    return bytes(out)
