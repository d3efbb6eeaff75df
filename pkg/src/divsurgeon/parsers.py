"""Parser for the flat, commented scenario text format.

    # comment          ; comment
    name = paste_band_ok
    [domain]
    kind = torus
    lengths = 1, 1
    [field Y]
    tag = solenoidal-bump

Top-level keys come first; `[section]` and `[kind label]` headers open
sections. Values are ints, floats, booleans, bare strings or comma lists
of those. A ` #` after a value starts an inline comment.
"""

import re
from typing import NamedTuple, Optional, Union

from divsurgeon.errors import ScenarioParseError

Scalar = Union[bool, int, float, str]
Value = Union[Scalar, tuple[Scalar, ...]]

KEY_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
NAME_PATTERN = re.compile(r"[A-Za-z][A-Za-z0-9_\-]*")


class Entry(NamedTuple):
    """One `key = value` line."""

    key: str
    value: Value
    line: int
    column: int  # column of the value


class Section(NamedTuple):
    """A `[kind label]` block; the top level has kind ""."""

    kind: str
    label: Optional[str]
    line: int
    entries: tuple[Entry, ...]

    def get(self, key: str) -> Optional[Entry]:
        for entry in self.entries:
            if entry.key == key:
                return entry
        return None

    def values(self) -> dict[str, Value]:
        return {entry.key: entry.value for entry in self.entries}


class ScenarioText(NamedTuple):
    sections: tuple[Section, ...]

    @property
    def top(self) -> Section:
        return self.sections[0]

    def find(self, kind: str, label: Optional[str] = None) -> Optional[Section]:
        for section in self.sections:
            if section.kind == kind and section.label == label:
                return section
        return None

    def of_kind(self, kind: str) -> list[Section]:
        return [section for section in self.sections if section.kind == kind]


def parse_scalar(token: str) -> Scalar:
    """
    Convert one token to bool, int, float or str.

    Args:
        token: Stripped token text

    Returns:
        The typed value

    Examples:
        >>> parse_scalar("128")
        128
        >>> parse_scalar("-0.05")
        -0.05
        >>> parse_scalar("true")
        True
        >>> parse_scalar("torus")
        'torus'
    """
    lowered = token.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def parse_value(text: str) -> Optional[Value]:
    """
    Convert value text to a scalar or a comma list.

    Returns:
        The typed value, or None when a list item is empty

    Examples:
        >>> parse_value("1, 0.5, 0.25")
        (1, 0.5, 0.25)
        >>> parse_value("0.1")
        0.1
    """
    if "," not in text:
        return parse_scalar(text)
    items = [item.strip() for item in text.split(",")]
    if any(not item for item in items):
        return None
    return tuple(parse_scalar(item) for item in items)


def _strip_comment(raw: str) -> str:
    """Drop a ` #` inline comment."""
    match = re.search(r"\s#", raw)
    return raw[: match.start()] if match else raw


def _parse_header(raw: str, line: int) -> tuple[str, Optional[str]]:
    offset = len(raw) - len(raw.lstrip())
    body = raw.strip()
    if not body.endswith("]"):
        raise ScenarioParseError("Section header is missing ']'", line, offset + len(body) + 1)
    words = body[1:-1].split()
    if not words or len(words) > 2:
        raise ScenarioParseError(
            "Section header must be [kind] or [kind label]", line, offset + 2
        )
    for word in words:
        if not NAME_PATTERN.fullmatch(word):
            column = offset + raw.strip().index(word) + 1
            raise ScenarioParseError(f"Invalid section name '{word}'", line, column)
    return words[0], words[1] if len(words) == 2 else None


def _parse_entry(raw: str, line: int) -> Entry:
    if "=" not in raw:
        offset = len(raw) - len(raw.lstrip())
        raise ScenarioParseError("Expected 'key = value'", line, offset + 1)
    key_text, value_text = raw.split("=", 1)
    key = key_text.strip()
    key_column = len(key_text) - len(key_text.lstrip()) + 1
    if not key:
        raise ScenarioParseError("Missing key before '='", line, key_column)
    if not KEY_PATTERN.fullmatch(key):
        raise ScenarioParseError(f"Invalid key '{key}'", line, key_column)

    value_column = len(key_text) + 2 + len(value_text) - len(value_text.lstrip())
    value_text = _strip_comment(value_text).strip()
    if not value_text:
        raise ScenarioParseError(f"Missing value for '{key}'", line, value_column)
    value = parse_value(value_text)
    if value is None:
        raise ScenarioParseError(f"Empty item in list for '{key}'", line, value_column)
    return Entry(key, value, line, value_column)


def parse_scenario_text(text: str) -> ScenarioText:
    """
    Parse scenario text into sections of entries.

    Args:
        text: Whole file contents

    Returns:
        ScenarioText; sections[0] is the top level

    Raises:
        ScenarioParseError: malformed header or entry, duplicate key or
            duplicate section, with its line and column (1-based)

    Examples:
        >>> parsed = parse_scenario_text("name = demo\\n[domain]\\nkind = box\\n")
        >>> parsed.top.get("name").value
        'demo'
        >>> parsed.find("domain").get("kind").value
        'box'
    """
    sections: list[Section] = []
    kind, label, start = "", None, 0
    entries: list[Entry] = []
    seen_sections: set[tuple[str, Optional[str]]] = {("", None)}

    def close() -> None:
        sections.append(Section(kind, label, start, tuple(entries)))

    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        if stripped.startswith("["):
            close()
            kind, label = _parse_header(_strip_comment(raw), number)
            if (kind, label) in seen_sections:
                raise ScenarioParseError(
                    f"Duplicate section [{kind}{' ' + label if label else ''}]",
                    number,
                    len(raw) - len(raw.lstrip()) + 1,
                )
            seen_sections.add((kind, label))
            start, entries = number, []
            continue
        entry = _parse_entry(raw, number)
        if any(existing.key == entry.key for existing in entries):
            raise ScenarioParseError(
                f"Duplicate key '{entry.key}'", number, len(raw) - len(raw.lstrip()) + 1
            )
        entries.append(entry)
    close()
    return ScenarioText(tuple(sections))
