import pytest

from modules.validator import MAX_LABEL_LEN, DictionaryValidator, ValidationResult, is_number


@pytest.fixture
def validator():
    return DictionaryValidator()


def _doc(*entries, grid=None):
    return {"grid": grid or {"width": 10, "height": 10}, "entries": list(entries)}


def test_valid_entries(validator):
    for entry in (
        {"label": "r", "type": "rectangle", "x": 0, "y": 0, "w": 2, "h": 3, "angle": 45},
        {"label": "d", "type": "disc", "cx": 1.5, "cy": 2, "r": 1},
        {"label": "e", "type": "ellipse", "cx": 5, "cy": 5, "rx": 3, "ry": 1},
        {"label": "p", "type": "polygon", "vertices": [[0, 0], [4, 0], [0, 4]]},
        {"label": "f", "type": "raster", "file": "piece.pgm", "dx": 2, "dy": -1},
    ):
        result = validator.validate_entry(entry)
        assert result.valid, result.errors
        assert not result.warnings


@pytest.mark.parametrize("entry, fragment", [
    ({"label": "r", "type": "rectangle", "x": 0, "y": 0, "w": 0, "h": 3}, "'w' must be positive"),
    ({"label": "r", "type": "rectangle", "x": 0, "y": 0, "w": 1}, "missing 'h'"),
    ({"label": "r", "type": "rectangle", "x": True, "y": 0, "w": 1, "h": 1}, "'x' must be a finite number"),
    ({"label": "d", "type": "disc", "cx": 1, "cy": 1, "r": float("inf")}, "'r' must be a finite number"),
    ({"label": "h", "type": "hexagon"}, "unknown entry type"),
    ({"label": "p", "type": "polygon", "vertices": [[0, 0], [1, 1]]}, "at least 3 vertices"),
    ({"label": "p", "type": "polygon", "vertices": [[0, 0], [1, 1], [2]]}, "vertex 3"),
    ({"label": "f", "type": "raster", "file": " "}, "nonempty path"),
    ({"label": "f", "type": "raster", "file": "a.pgm", "dx": 0.5}, "whole number of pixels"),
    ({"label": "bad label", "type": "disc", "cx": 1, "cy": 1, "r": 1}, "may only contain"),
    ({"type": "disc", "cx": 1, "cy": 1, "r": 1}, "'label' is required"),
])
def test_invalid_entries(validator, entry, fragment):
    result = validator.validate_entry(entry)
    assert not result.valid
    assert any(fragment in e for e in result.errors), result.errors


def test_messages_carry_the_field_line(validator):
    entry = {"label": "r", "type": "rectangle", "x": 0, "y": 0, "w": -1, "h": 1}
    result = validator.validate_entry(entry, {"": 7, "w": 9})
    assert result.errors == ["line 9: field 'w' must be positive, got -1"]


def test_warnings_do_not_invalidate(validator):
    entry = {"label": "f", "type": "raster", "file": "a.pgm", "angle": 30, "note": "x"}
    result = validator.validate_entry(entry, {"": 3})
    assert result.valid
    assert len(result.warnings) == 2


def test_long_label(validator):
    assert not validator.validate_label("a" * (MAX_LABEL_LEN + 1)).valid
    assert validator.validate_label("block_01_02").valid


@pytest.mark.parametrize("grid", [
    {"width": 0, "height": 4},
    {"width": 4},
    {"width": 4.0, "height": 4},
    [4, 4],
])
def test_invalid_grids(validator, grid):
    assert not validator.validate_grid(grid, 2).valid


def test_document_level_checks(validator):
    assert not validator.validate_document([]).valid
    assert not validator.validate_document({"grid": {"width": 2, "height": 2}}).valid
    assert not validator.validate_document(_doc()).valid
    result = validator.validate_document({"entries": [{"label": "d", "type": "disc", "cx": 1, "cy": 1, "r": 1}]})
    assert result.errors == ["missing top-level 'grid' block"]


def test_duplicate_labels(validator):
    entry = {"label": "d", "type": "disc", "cx": 1, "cy": 1, "r": 1}
    result = validator.validate_document(_doc(entry, dict(entry)), 1, [{"": 3}, {"": 4, "label": 4}])
    assert result.errors == ["line 4: duplicate label 'd' (first used by entry 1)"]


def test_merge_and_is_number():
    first, second = ValidationResult(), ValidationResult()
    second.add_error("boom")
    second.add_warning("careful")
    merged = first.merge(second)
    assert merged is first
    assert not merged.valid and merged.errors == ["boom"] and merged.warnings == ["careful"]
    assert is_number(3) and is_number(2.5)
    assert not is_number(True) and not is_number("3") and not is_number(float("nan"))
