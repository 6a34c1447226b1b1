from .channel import LinkBudget, path_loss, sinr, sinr_db
from .pdcch import DciRecord, decodable, schedule_pdcch
from .rach import GnbParams, GnbState, RachOutcome, RachPreamble, rach_occasion
from .rlf import RadioLinkMonitor, radio_link_monitor
from .rrc import RrcReject, RrcSetupRequest, decode_setup_request, encode_setup_request

__all__ = [
    "DciRecord",
    "GnbParams",
    "GnbState",
    "LinkBudget",
    "RachOutcome",
    "RachPreamble",
    "RadioLinkMonitor",
    "RrcReject",
    "RrcSetupRequest",
    "decodable",
    "decode_setup_request",
    "encode_setup_request",
    "path_loss",
    "radio_link_monitor",
    "rach_occasion",
    "schedule_pdcch",
    "sinr",
    "sinr_db",
]
