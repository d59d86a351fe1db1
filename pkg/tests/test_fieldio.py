import numpy as np
import pytest

from maeig.fieldio import FieldReadError, field_dump, read_field, write_field
from maeig.geometry import Disk, build_grid
from maeig.dirichlet import solve_dirichlet

UNIT_DISK = Disk((0.0, 0.0), 1.0)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    g = build_grid(UNIT_DISK, 1.0 / 8.0)
    u = solve_dirichlet(g, np.ones(g.num_interior))
    return g, u


def test_round_trip_bit_exact(solved, tmp_path):
    g, u = solved
    dump = field_dump(u, g, "u", UNIT_DISK)
    path = tmp_path / "u.field"
    write_field(path, dump)
    back = read_field(path)
    assert back.name == "u"
    assert (back.nx, back.ny) == g.shape
    assert back.h == g.h and (back.x0, back.y0) == g.origin
    assert back.domain_hash == dump.domain_hash
    assert back.values.tobytes() == dump.values.tobytes()  # nan-safe bit equality
    assert np.array_equal(back.field_on(g), u)


def test_exterior_sentinel_is_nan(solved):
    g, u = solved
    dump = field_dump(u, g, "u", UNIT_DISK)
    assert np.isnan(dump.values[0, 0])  # bounding-box corner is outside the disk
    assert np.count_nonzero(~np.isnan(dump.values)) == g.num_interior


def test_truncated_file_reports_offset(solved, tmp_path):
    g, u = solved
    path = tmp_path / "u.field"
    write_field(path, field_dump(u, g, "u", UNIT_DISK))
    data = path.read_bytes()
    (tmp_path / "trunc.field").write_bytes(data[: len(data) // 2])
    with pytest.raises(FieldReadError, match="byte"):
        read_field(tmp_path / "trunc.field")


def test_header_dimension_mismatch_rejected(solved, tmp_path):
    g, u = solved
    path = tmp_path / "u.field"
    write_field(path, field_dump(u, g, "u", UNIT_DISK))
    text = path.read_text().replace(f"nx {g.shape[0]}", f"nx {g.shape[0] + 3}")
    bad = tmp_path / "bad.field"
    bad.write_text(text)
    with pytest.raises(FieldReadError, match="rows"):
        read_field(bad)


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "junk.field"
    p.write_text("not a field file\n")
    with pytest.raises(FieldReadError, match="magic"):
        read_field(p)


def test_missing_header_key_rejected(solved, tmp_path):
    g, u = solved
    path = tmp_path / "u.field"
    write_field(path, field_dump(u, g, "u", UNIT_DISK))
    lines = path.read_text().splitlines()
    lines = [ln for ln in lines if not ln.startswith("h ")]
    bad = tmp_path / "nokey.field"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(FieldReadError, match="missing 'h'"):
        read_field(bad)


def test_field_on_grid_shape_guard(solved):
    g, u = solved
    dump = field_dump(u, g, "u", UNIT_DISK)
    other = build_grid(UNIT_DISK, 1.0 / 4.0)
    with pytest.raises(FieldReadError, match="does not match"):
        dump.field_on(other)


def test_mantissa_fidelity(solved, tmp_path):
    # adversarial values: subnormals survive, and 17 significant digits
    # round-trip arbitrary doubles
    g, _ = solved
    rng = np.random.default_rng(0)
    u = rng.standard_normal(g.num_interior) * np.exp(rng.uniform(-300, 300, g.num_interior))
    dump = field_dump(u, g, "w", UNIT_DISK)
    path = tmp_path / "w.field"
    write_field(path, dump)
    assert np.array_equal(read_field(path).field_on(g), u)
