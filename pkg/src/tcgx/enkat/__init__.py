"""Electronic nomenclature catalogs: tables, menus, generation rules, filters, units."""
from .catalog import Catalog, bundle_bytes, eval_ruleset, load_catalog, pick_with_answers, save_catalog
from .filters import (
    And,
    ClassPrefix,
    ColumnEquals,
    Filter,
    InstrumentRankIs,
    Interval,
    Not,
    Or,
    ProfileIs,
    QuantitySymbolIs,
    SourceCatalogIs,
    apply_filter,
    brute_force_filter,
    parse_filter,
)
from .rules import (
    Const,
    ConsoleInput,
    ExtMenu,
    Field,
    Menu,
    NumInput,
    Rule,
    RuleSet,
    ScriptedInput,
    StrInput,
    VarRead,
    bind_ruleset,
    eval_rules,
    format_number,
    parse_rule,
    parse_ruleset,
)
from .table import Column, ColumnKind, DataTable, InstrumentRank, PROFILE_CODES, resolve_embedded
from .units import UNITS, Unit, UnitRegistry, convert, default_registry
