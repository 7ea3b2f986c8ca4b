"""Pull-variant Sokoban toolkit: rules, gadget verification, reductions."""

from .core import (
    IllegalMove,
    Level,
    LevelFormatError,
    Move,
    State,
    Variant,
    apply_move,
    is_solved,
    legal_moves,
    parse_level,
    render_level,
)
from .catalog import (
    GadgetDef,
    SpecContract,
    builtin_gadget,
    catalog_names,
    thicken,
    validate_gadget,
)
from .search import CapExceeded, explore, movable_blocks, solve
from .verify import check_contract, minimize, port_behavior, theorem_battery

__all__ = [
    "CapExceeded",
    "GadgetDef",
    "IllegalMove",
    "Level",
    "LevelFormatError",
    "Move",
    "SpecContract",
    "State",
    "Variant",
    "apply_move",
    "builtin_gadget",
    "catalog_names",
    "check_contract",
    "explore",
    "is_solved",
    "legal_moves",
    "minimize",
    "movable_blocks",
    "parse_level",
    "port_behavior",
    "render_level",
    "solve",
    "theorem_battery",
    "thicken",
    "validate_gadget",
]
