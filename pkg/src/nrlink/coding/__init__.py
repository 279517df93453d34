"""Channel coding: CRC, LDPC transport chain, polar and small block codes."""

from nrlink.coding.crc import crc_attach, crc_check
from nrlink.coding.ldpc import BaseGraphId, ldpc_code, ldpc_encode, select_base_graph
from nrlink.coding.polar import PolarSpec, polar_decode, polar_encode
from nrlink.coding.smallblock import small_block_decode, small_block_encode
from nrlink.coding.transport import (
    CodeBlock,
    RateMatchSpec,
    TransportBlock,
    concat,
    decode_transport,
    desegment,
    encode_transport,
    plan_transport,
    rate_match,
    rate_recover,
    segment,
)

__all__ = [
    "BaseGraphId", "CodeBlock", "PolarSpec", "RateMatchSpec", "TransportBlock",
    "concat", "crc_attach", "crc_check", "decode_transport", "desegment",
    "encode_transport", "ldpc_code", "ldpc_encode", "plan_transport",
    "polar_decode", "polar_encode", "rate_match", "rate_recover", "segment",
    "select_base_graph", "small_block_decode", "small_block_encode",
]
