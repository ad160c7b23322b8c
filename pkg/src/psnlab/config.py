"""Flat key-value model configuration files.

Schema (one ``key = value`` pair per line, ``#`` starts a comment)::

    schema_version = 1
    types          = -1.0, 1.0        # attribute grid
    type_weights   = 0.5, 0.5         # sampling weights, sum to 1
    stat_kind      = degree           # degree | composition_share
    stat_cap       = 8                # support truncation
    flag_value     = 1.0              # composition_share only
    edge_stat_kind = none             # none | transitive_count | transitive_indicator
    edge_stat_cap  = 4
    payoff_form    = linear           # linear | table
    theta          = -0.7,0,0,0,0,0,0 # linear: b0,bx,bx',bxx',bs,bs',bt
    payoff_table   = ...              # table form: flat row-major grid
    shock          = gumbel           # gumbel | exponential
    t_default      = 0

Lists are comma separated.  Unknown keys are rejected so that typos fail
loudly at parse time.
"""

from __future__ import annotations

from .model import PayoffModel, ShockDistribution, StatisticSpec, TypeSpace

SCHEMA_VERSION = 1

_KNOWN_KEYS = {
    "schema_version",
    "types",
    "type_weights",
    "stat_kind",
    "stat_cap",
    "flag_value",
    "edge_stat_kind",
    "edge_stat_cap",
    "payoff_form",
    "theta",
    "payoff_table",
    "shock",
    "t_default",
}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _floats(value):
    return tuple(float(tok) for tok in value.split(",") if tok.strip() != "")


def model_from_pairs(pairs: dict) -> PayoffModel:
    version = int(pairs.get("schema_version", "0"))
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    try:
        types = _floats(pairs["types"])
        weights = _floats(pairs["type_weights"])
        stat_kind = pairs.get("stat_kind", "degree")
        stat_cap = int(pairs.get("stat_cap", "8"))
        shock = ShockDistribution(pairs.get("shock", "gumbel"))
        theta = _floats(pairs.get("theta", "0,0,0,0,0,0,0"))
        t_default = float(pairs.get("t_default", "0"))
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from exc

    flag = pairs.get("flag_value")
    node_stat = StatisticSpec(
        kind=stat_kind,
        cap=stat_cap,
        flag_value=float(flag) if flag is not None else None,
    )
    if stat_kind == "composition_share" and node_stat.flag_value is None:
        raise ConfigError("composition_share requires flag_value")

    edge_stat = None
    edge_kind = pairs.get("edge_stat_kind", "none")
    if edge_kind != "none":
        edge_stat = StatisticSpec(kind=edge_kind, cap=int(pairs.get("edge_stat_cap", "4")))

    payoff_form = pairs.get("payoff_form", "linear")
    table = None
    if payoff_form == "table":
        import numpy as np

        k, ns = len(types), node_stat.size
        flat = _floats(pairs["payoff_table"])
        if len(flat) != k * k * ns * ns:
            raise ConfigError(
                f"payoff_table needs {k * k * ns * ns} entries, got {len(flat)}"
            )
        table = np.asarray(flat).reshape(k, k, ns, ns)

    return PayoffModel(
        type_space=TypeSpace(values=types, weights=weights),
        node_stat=node_stat,
        shock=shock,
        theta=theta if payoff_form == "linear" else (0.0,) * 7,
        payoff_form=payoff_form,
        edge_stat=edge_stat,
        t_default=t_default,
        payoff_table_values=table,
    )


def load_model(path) -> PayoffModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_pairs(parse_config_text(fh.read()))


def dump_model_config(model: PayoffModel) -> str:
    """Serialize a model back to config text (stable key order)."""
    lines = [
        f"schema_version = {SCHEMA_VERSION}",
        "types = " + ", ".join(repr(v) for v in model.type_space.values),
        "type_weights = " + ", ".join(repr(w) for w in model.type_space.weights),
        f"stat_kind = {model.node_stat.kind}",
        f"stat_cap = {model.node_stat.cap}",
    ]
    if model.node_stat.flag_value is not None:
        lines.append(f"flag_value = {model.node_stat.flag_value!r}")
    if model.edge_stat is not None:
        lines.append(f"edge_stat_kind = {model.edge_stat.kind}")
        lines.append(f"edge_stat_cap = {model.edge_stat.cap}")
    lines.append(f"payoff_form = {model.payoff_form}")
    if model.payoff_form == "linear":
        lines.append("theta = " + ", ".join(repr(t) for t in model.theta))
    else:
        import numpy as np

        flat = np.asarray(model.payoff_table_values).ravel()
        lines.append("payoff_table = " + ", ".join(repr(float(v)) for v in flat))
    lines.append(f"shock = {model.shock.family}")
    lines.append(f"t_default = {model.t_default!r}")
    return "\n".join(lines) + "\n"
