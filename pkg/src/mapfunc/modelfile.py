"""Model specification files.

The on-disk format is a flat sectioned key-value document (see
``docs/model_format.md``, which is normative).  Sections are
``[switching]``, ``[levy.plus]``, ``[levy.minus]``, ``[jump.plus]``,
``[jump.minus]`` and ``[start]``; keys inside each section carry the
corresponding type's field names.  A tiny hand-rolled parser is used so
that validation errors can name the offending line.
"""

from __future__ import annotations

from .errors import ModelFileError
from .model import (
    Deterministic,
    ExpNegative,
    ExpPositive,
    Gaussian,
    JumpLaw,
    Laplace,
    LevyLaw,
    LogNormal,
    MapModel,
    MINUS,
    ParetoPositive,
    PLUS,
)

SECTIONS = ("switching", "levy.plus", "levy.minus", "jump.plus", "jump.minus", "start")

# file key -> (constructor kwarg, caster) per variant
_VARIANT_FIELDS = {
    "Deterministic": {"c": ("c", float)},
    "Gaussian": {"mean": ("mean", float), "stdev": ("stdev", float)},
    "ExpPositive": {"rate": ("rate", float)},
    "ExpNegative": {"rate": ("rate", float)},
    "Laplace": {"rate": ("rate", float)},
    "ParetoPositive": {"index": ("index", float), "scale": ("scale", float)},
    "LogNormal": {"logMean": ("log_mean", float), "logStdev": ("log_stdev", float)},
}

_VARIANT_TYPES: dict[str, type[JumpLaw]] = {
    "Deterministic": Deterministic,
    "Gaussian": Gaussian,
    "ExpPositive": ExpPositive,
    "ExpNegative": ExpNegative,
    "Laplace": Laplace,
    "ParetoPositive": ParetoPositive,
    "LogNormal": LogNormal,
}


def _parse_bool(raw: str, line: int, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ModelFileError(f"expected a boolean, got {raw!r}", line=line, field=key)


def _parse_float(raw: str, line: int, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ModelFileError(f"expected a number, got {raw!r}", line=line, field=key) from None


class _Section(dict):
    """key -> (value string, line number)"""


def _tokenize(text: str) -> dict[str, _Section]:
    sections: dict[str, _Section] = {}
    current: _Section | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ModelFileError("unterminated section header", line=lineno)
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ModelFileError(f"unknown section [{name}]", line=lineno)
            if name in sections:
                raise ModelFileError(f"duplicate section [{name}]", line=lineno)
            current = _Section()
            sections[name] = current
            current_name = name
            continue
        if current is None:
            raise ModelFileError("key before any section header", line=lineno)
        if "=" not in line:
            raise ModelFileError("expected 'key = value'", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in current:
            raise ModelFileError(
                f"duplicate key in [{current_name}]", line=lineno, field=key
            )
        current[key] = (value, lineno)
    return sections


def _jump_law(section: _Section, where: str, prefix: str = "") -> JumpLaw:
    def take(key: str):
        return section.pop(prefix + key, None)

    variant_item = take("variant")
    if variant_item is None:
        raise ModelFileError(f"missing variant in [{where}]", field=prefix + "variant")
    variant, vline = variant_item
    if variant not in _VARIANT_TYPES:
        raise ModelFileError(
            f"unknown variant {variant!r} (expected one of {', '.join(_VARIANT_TYPES)})",
            line=vline,
            field=prefix + "variant",
        )
    kwargs = {}
    for key, (attr, _cast) in _VARIANT_FIELDS[variant].items():
        item = take(key)
        if item is None:
            raise ModelFileError(
                f"missing {key!r} for variant {variant} in [{where}]", field=prefix + key
            )
        raw, line = item
        kwargs[attr] = _parse_float(raw, line, prefix + key)
    neg_item = take("negated")
    negated = False
    if neg_item is not None:
        negated = _parse_bool(neg_item[0], neg_item[1], prefix + "negated")
    try:
        return _VARIANT_TYPES[variant](**kwargs, negated=negated)
    except ValueError as exc:
        raise ModelFileError(str(exc), field=prefix + "variant") from None


def _levy_law(section: _Section, where: str) -> LevyLaw:
    def take_float(key: str, default: float | None = None) -> float:
        item = section.pop(key, None)
        if item is None:
            if default is None:
                raise ModelFileError(f"missing {key!r} in [{where}]", field=key)
            return default
        return _parse_float(item[0], item[1], key)

    drift = take_float("drift", 0.0)
    sigma = take_float("gaussianSigma", 0.0)
    rate = take_float("cppRate", 0.0)
    if any(k.startswith("cppJump.") for k in section):
        jump = _jump_law(section, where, prefix="cppJump.")
    else:
        if rate > 0:
            raise ModelFileError(
                f"cppRate > 0 but no cppJump.* fields in [{where}]", field="cppJump.variant"
            )
        jump = Deterministic(0.0)
    _reject_leftovers(section, where)
    try:
        return LevyLaw(drift=drift, gaussian_sigma=sigma, cpp_rate=rate, cpp_jump=jump)
    except ValueError as exc:
        raise ModelFileError(str(exc), field=where) from None


def _reject_leftovers(section: _Section, where: str) -> None:
    for key, (_, line) in section.items():
        raise ModelFileError(f"unknown key in [{where}]", line=line, field=key)


def parse_model(text: str) -> MapModel:
    """Parse and validate a model document; raises ModelFileError."""
    sections = _tokenize(text)
    for name in SECTIONS:
        if name not in sections:
            if name == "start":
                sections[name] = _Section()
                continue
            raise ModelFileError(f"missing section [{name}]")

    sw = sections["switching"]

    def sw_float(key: str, default: float | None = None) -> float:
        item = sw.pop(key, None)
        if item is None:
            if default is None:
                raise ModelFileError(f"missing {key!r} in [switching]", field=key)
            return default
        return _parse_float(item[0], item[1], key)

    q_plus = sw_float("qPlus")
    q_minus = sw_float("qMinus")
    killing = sw_float("killing", 0.0)
    _reject_leftovers(sw, "switching")

    levy_plus = _levy_law(sections["levy.plus"], "levy.plus")
    levy_minus = _levy_law(sections["levy.minus"], "levy.minus")
    u_plus = _jump_law(sections["jump.plus"], "jump.plus")
    _reject_leftovers(sections["jump.plus"], "jump.plus")
    u_minus = _jump_law(sections["jump.minus"], "jump.minus")
    _reject_leftovers(sections["jump.minus"], "jump.minus")

    st = sections["start"]
    state_item = st.pop("startState", None)
    if state_item is None:
        start_state = PLUS
    else:
        raw, line = state_item
        if raw not in (PLUS, MINUS):
            raise ModelFileError(
                f"startState must be '+' or '-', got {raw!r}", line=line, field="startState"
            )
        start_state = raw
    value_item = st.pop("startValue", None)
    start_value = 1.0 if value_item is None else _parse_float(
        value_item[0], value_item[1], "startValue"
    )
    _reject_leftovers(st, "start")

    try:
        return MapModel(
            q_plus=q_plus,
            q_minus=q_minus,
            killing=killing,
            levy_plus=levy_plus,
            levy_minus=levy_minus,
            u_plus=u_plus,
            u_minus=u_minus,
            start_state=start_state,
            start_value=start_value,
        )
    except ValueError as exc:
        raise ModelFileError(str(exc)) from None


def load_model(path) -> MapModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


def _format_jump(law: JumpLaw, prefix: str = "") -> list[str]:
    lines = [f"{prefix}variant = {law.variant}"]
    fields = _VARIANT_FIELDS[law.variant]
    for key, (attr, _) in fields.items():
        lines.append(f"{prefix}{key} = {getattr(law, attr)!r}")
    if law.negated:
        lines.append(f"{prefix}negated = true")
    return lines


def format_model(model: MapModel) -> str:
    """Render a model back to the on-disk format (round-trips parse_model)."""
    out = [
        "[switching]",
        f"qPlus = {model.q_plus!r}",
        f"qMinus = {model.q_minus!r}",
        f"killing = {model.killing!r}",
    ]
    for name, levy in (("levy.plus", model.levy_plus), ("levy.minus", model.levy_minus)):
        out += [
            "",
            f"[{name}]",
            f"drift = {levy.drift!r}",
            f"gaussianSigma = {levy.gaussian_sigma!r}",
            f"cppRate = {levy.cpp_rate!r}",
        ]
        if levy.cpp_rate > 0:
            out += _format_jump(levy.cpp_jump, prefix="cppJump.")
    for name, law in (("jump.plus", model.u_plus), ("jump.minus", model.u_minus)):
        out += ["", f"[{name}]"] + _format_jump(law)
    out += [
        "",
        "[start]",
        f"startState = {model.start_state}",
        f"startValue = {model.start_value!r}",
        "",
    ]
    return "\n".join(out)


def save_model(model: MapModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_model(model))
