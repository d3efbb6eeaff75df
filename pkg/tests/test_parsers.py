"""Tests for the scenario text parser."""

import pytest

from divsurgeon.errors import ScenarioParseError
from divsurgeon.parsers import parse_scalar, parse_scenario_text, parse_value


class TestParseScalar:
    """Tests for parse_scalar function."""

    @pytest.mark.parametrize(
        "token,expected",
        [
            ("128", 128),
            ("-3", -3),
            ("0.05", 0.05),
            ("-1e-3", -1e-3),
            ("true", True),
            ("Yes", True),
            ("off", False),
            ("torus", "torus"),
            ("solenoidal-bump", "solenoidal-bump"),
        ],
    )
    def test_typed_tokens(self, token, expected) -> None:
        value = parse_scalar(token)
        assert value == expected
        assert type(value) is type(expected)


class TestParseValue:
    """Tests for parse_value function."""

    def test_scalar(self) -> None:
        assert parse_value("0.1") == 0.1

    def test_list(self) -> None:
        assert parse_value("1, 0.5, 0.25") == (1, 0.5, 0.25)

    def test_mixed_list(self) -> None:
        assert parse_value("box, 2") == ("box", 2)

    def test_empty_item(self) -> None:
        assert parse_value("1, , 2") is None


class TestParseScenarioText:
    """Tests for parse_scenario_text function."""

    TEXT = "\n".join([
        "# demo scenario",
        "name = demo",
        "seed = 3   # inline comment",
        "",
        "[domain]",
        "kind = torus",
        "lengths = 1, 1",
        "; another comment",
        "[field X]",
        "tag = vertical",
    ])

    def test_sections_and_entries(self) -> None:
        parsed = parse_scenario_text(self.TEXT)
        assert parsed.top.values() == {"name": "demo", "seed": 3}
        assert parsed.find("domain").values() == {"kind": "torus", "lengths": (1, 1)}
        field = parsed.find("field", "X")
        assert field.label == "X"
        assert field.line == 9
        assert field.get("tag").value == "vertical"
        assert field.get("missing") is None

    def test_of_kind(self) -> None:
        parsed = parse_scenario_text(self.TEXT + "\n[field Y]\ntag = constant\n")
        assert [s.label for s in parsed.of_kind("field")] == ["X", "Y"]

    def test_entry_positions(self) -> None:
        parsed = parse_scenario_text("name = demo\n[domain]\nkind = box\n")
        entry = parsed.find("domain").get("kind")
        assert (entry.line, entry.column) == (3, 8)

    def test_empty_text(self) -> None:
        parsed = parse_scenario_text("")
        assert len(parsed.sections) == 1
        assert parsed.top.entries == ()

    @pytest.mark.parametrize(
        "text,line,column",
        [
            ("[domain\nkind = box", 1, 8),
            ("[a b c]", 1, 2),
            ("[9domain]", 1, 2),
            ("name = demo\nkind box", 2, 1),
            ("9kind = box", 1, 1),
            ("name = demo\nresolution = ", 2, 14),
            ("lengths = 1, , 1", 1, 11),
            ("name = a\nname = b", 2, 1),
            ("[domain]\n[domain]", 2, 1),
        ],
    )
    def test_errors_carry_position(self, text, line, column) -> None:
        with pytest.raises(ScenarioParseError) as excinfo:
            parse_scenario_text(text)
        assert (excinfo.value.line, excinfo.value.column) == (line, column)
        assert f"line {line}, column {column}" in str(excinfo.value)

    def test_same_key_in_two_sections(self) -> None:
        parsed = parse_scenario_text("[field X]\ntag = a\n[field Y]\ntag = b\n")
        assert parsed.find("field", "Y").get("tag").value == "b"
