"""JSON run configuration.

Example::

    {
      "n_databases": 2,
      "messages": [
        {"id": "movie", "length_bits": 1024, "prior": {"num": 1, "den": 2}},
        {"id": "clip", "length_bits": 256, "prior": "1/2"}
      ],
      "scheme": "det",
      "seed": 0,
      "trials": 1,
      "transport": "inprocess"
    }

``transport`` may instead be ``{"endpoints": ["host:port", ...]}``.
Priors may be ``{"num", "den"}`` objects, ``"a/b"`` strings, integers or
floats; floats are rationalised and re-normalised.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ..core import Catalog, CatalogError, MessageMeta, validate_catalog

MAX_DENOMINATOR = 10**6
RENORMALIZE_TOLERANCE = 1e-9

SCHEME_ALIASES = {
    "det": "det",
    "deterministic": "det",
    "stoch": "stoch",
    "stochastic": "stoch",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    catalog: Catalog
    scheme: str = "det"
    seed: int = 0
    trials: int = 1
    endpoints: list[tuple[str, int]] | None = None
    timeout: float = 30.0
    raw: dict = field(default_factory=dict, repr=False)


def fraction_to_json(x: Fraction) -> dict:
    x = Fraction(x)
    return {"num": x.numerator, "den": x.denominator, "text": str(x)}


def fraction_from_json(value) -> Fraction:
    if isinstance(value, dict):
        return Fraction(int(value["num"]), int(value["den"]))
    if isinstance(value, bool):
        raise ConfigError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ConfigError(f"cannot read {value!r} as an exact fraction")


def rationalize_priors(values: list) -> list[Fraction]:
    """Exact priors; floats go through a bounded-denominator approximation."""
    floats = [v for v in values if isinstance(v, float)]
    if not floats:
        return [fraction_from_json(v) for v in values]
    approx = [
        Fraction(v).limit_denominator(MAX_DENOMINATOR) if isinstance(v, float) else fraction_from_json(v)
        for v in values
    ]
    total = sum(approx, Fraction(0))
    if total <= 0:
        raise ConfigError("priors must be positive")
    normalized = [a / total for a in approx]
    for given, exact in zip(values, normalized):
        if abs(float(given) - float(exact)) > RENORMALIZE_TOLERANCE:
            raise ConfigError(
                f"prior {given!r} moves to {exact} ({float(exact)!r}) after normalisation; give exact fractions"
            )
    return normalized


def parse_endpoints(value) -> list[tuple[str, int]]:
    if isinstance(value, str):
        value = [s for s in value.split(",") if s.strip()]
    out = []
    for item in value:
        host, sep, port = str(item).strip().rpartition(":")
        if not sep or not host:
            raise ConfigError(f"endpoint {item!r} is not host:port")
        try:
            out.append((host, int(port)))
        except ValueError:
            raise ConfigError(f"endpoint {item!r} has a bad port") from None
    return out


def parse_config(data: dict) -> RunConfig:
    try:
        n = int(data["n_databases"])
        messages = data["messages"]
        if not isinstance(messages, list):
            raise ConfigError("'messages' must be a list")
        priors = rationalize_priors([m["prior"] for m in messages])
        metas = [
            MessageMeta(m.get("id", i), int(m["length_bits"]), p)
            for i, (m, p) in enumerate(zip(messages, priors), start=1)
        ]
        catalog = validate_catalog(metas, n)
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc}") from None
    except (CatalogError, ValueError, TypeError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    ids = [m.id for m in catalog.messages]
    if len(set(map(str, ids))) != len(ids):
        raise ConfigError("message ids must be unique")

    scheme = SCHEME_ALIASES.get(str(data.get("scheme", "det")))
    if scheme is None:
        raise ConfigError(f"unknown scheme {data.get('scheme')!r}")
    trials = int(data.get("trials", 1))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    transport = data.get("transport", "inprocess")
    endpoints = None
    if isinstance(transport, dict):
        endpoints = parse_endpoints(transport.get("endpoints", []))
    elif transport != "inprocess":
        raise ConfigError(f"unknown transport {transport!r}")
    if endpoints is not None and len(endpoints) != n:
        raise ConfigError(f"{len(endpoints)} endpoints given for {n} databases")
    return RunConfig(
        catalog=catalog,
        scheme=scheme,
        seed=int(data.get("seed", 0)),
        trials=trials,
        endpoints=endpoints,
        timeout=float(data.get("timeout", 30.0)),
        raw=data,
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(data)


def catalog_to_json(catalog: Catalog) -> dict:
    return {
        "n_databases": catalog.N,
        "messages": [
            {"id": m.id, "length_bits": m.length_bits, "prior": fraction_to_json(m.prior)} for m in catalog.messages
        ],
    }
