"""Attack components. Importing this package registers every built-in kind."""
from ..component import Component, ComponentError, ComponentFailure, InitContext, Param, register
from .fuzzer import RrcFuzzer, flip_bits
from .flooder import RachFlooder
from .iq import IqBurst, IqCollector
from .jammer import Jammer
from .sniffer import DciSniffer

__all__ = [
    "Component",
    "ComponentError",
    "ComponentFailure",
    "DciSniffer",
    "InitContext",
    "IqBurst",
    "IqCollector",
    "Jammer",
    "Param",
    "RachFlooder",
    "RrcFuzzer",
    "flip_bits",
    "register",
]
