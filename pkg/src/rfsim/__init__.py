"""rfsim: desk-scale RF circuit simulator.

Netlist-driven modified nodal analysis with DC/transient/AC solution,
S-parameter extraction, stability and linearity figures of merit, and
large-signal power/efficiency measurement for switching amplifiers.
"""

from .netlist import (Circuit, Element, NetlistError, ParseError,
                      ElaborationError, PortDef, elaborate, parse_netlist,
                      parse_value, serialize_netlist)
from .devices import ModelCard, MosGeometry, SwitchModel
from .engine import (backend_name, compile_circuit, dc_operating_point,
                     ac_solve, transient)

__version__ = "0.1.0"
