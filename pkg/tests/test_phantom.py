import numpy as np
import pytest

from bogatse.fields import default_field_spec, hole_mask
from bogatse.phantom import (
    DEFAULT_TISSUES,
    Ellipsoid,
    PhantomSpec,
    TissueClass,
    default_grid,
    default_phantom_spec,
    generate_phantom,
    lobe_center,
    voxel_coordinates,
)
from bogatse.volume import Grid, load_volume, save_volume


def test_tissue_class_validation():
    with pytest.raises(ValueError):
        TissueClass("t", 0.0, 10.0, 1.0)
    with pytest.raises(ValueError):
        TissueClass("t", 100.0, 200.0, 1.0)  # T2 > T1
    with pytest.raises(ValueError):
        TissueClass("t", 100.0, 50.0, -0.1)
    t = TissueClass("t", 100.0, 50.0, 0.0)
    assert t.pd == 0.0


def test_spec_validation():
    g = Grid(8, 8, 8)
    wm = TissueClass("wm", 1200, 47, 0.7)
    ell = Ellipsoid((4, 4, 4), (2, 2, 2), "wm")
    with pytest.raises(ValueError):
        PhantomSpec(g, (wm,), (), "wm")  # no primitives
    with pytest.raises(ValueError):
        PhantomSpec(g, (wm, wm), (ell,), "wm")  # duplicate names
    with pytest.raises(ValueError):
        PhantomSpec(g, (wm,), (ell,), "gm")  # unknown background
    with pytest.raises(ValueError):
        PhantomSpec(g, (wm,), (Ellipsoid((4, 4, 4), (2, 2, 2), "gm"),), "wm")
    with pytest.raises(ValueError):
        Ellipsoid((4, 4, 4), (2, 0, 2), "wm")


def test_paint_order_later_wins():
    g = Grid(9, 9, 9)
    a = TissueClass("a", 100, 50, 1.0)
    b = TissueClass("b", 100, 50, 1.0)
    bg = TissueClass("bg", 100, 50, 0.0)
    spec = PhantomSpec(
        g,
        (bg, a, b),
        (Ellipsoid((4, 4, 4), (3, 3, 3), "a"), Ellipsoid((4, 4, 4), (1.5, 1.5, 1.5), "b")),
        "bg",
    )
    ph = generate_phantom(spec)
    assert ph.labels[4, 4, 4] == ph.class_id("b")
    assert ph.labels[1, 4, 4] == ph.class_id("a")
    assert ph.labels[0, 0, 0] == ph.class_id("bg")


def test_clipped_primitive_warns():
    g = Grid(8, 8, 8)
    wm = TissueClass("wm", 1200, 47, 0.7)
    bg = TissueClass("bg", 100, 50, 0.0)
    spec = PhantomSpec(g, (bg, wm), (Ellipsoid((7, 4, 4), (3, 2, 2), "wm"),), "bg")
    with pytest.warns(UserWarning, match="extends outside"):
        generate_phantom(spec)


def test_default_phantom_structure(phantom64):
    ph = phantom64
    assert ph.grid == default_grid()
    names = [t.name for t in ph.classes]
    assert names == ["background", "wm", "gm", "csf", "lobe"]
    for name in names:
        assert ph.region_mask(name).count() > 0, name
    # nested shells: wm core inside gm inside csf
    assert ph.labels[32, 32, 32] == ph.class_id("wm")
    # regions partition the volume
    total = sum(ph.region_mask(n).count() for n in names)
    assert total == ph.grid.n_voxels


def test_lobe_sits_inside_field_hole(phantom64):
    lobe = phantom64.region_mask("lobe").data
    hole = hole_mask(default_field_spec())
    assert lobe.any()
    assert (lobe & hole).sum() == lobe.sum()  # lobe fully covered by the hole


def test_relaxation_maps(phantom64):
    ph = phantom64
    t1 = ph.t1_map()
    wm = ph.region_mask("wm").data
    assert (t1[wm] == 1200.0).all()
    assert (ph.t2_map()[ph.region_mask("csf").data] == 800.0).all()
    assert (ph.pd_map()[ph.region_mask("background").data] == 0.0).all()


def test_labels_volume_roundtrip(tmp_path, phantom64):
    v = phantom64.labels_volume()
    save_volume(v, tmp_path / "labels")
    out = load_volume(tmp_path / "labels")
    assert np.array_equal(out.data, phantom64.labels.astype(float))


def test_lobe_center_scales_with_grid():
    g = default_grid()
    c = lobe_center(g)
    assert c == (32.0, 52.0, 14.0)
    g2 = Grid(32, 32, 32, 3, 3, 3)
    c2 = lobe_center(g2)
    assert c2 == (16.0, 26.0, 7.0)


def test_voxel_coordinates_shapes():
    g = Grid(2, 3, 4)
    x, y, z = voxel_coordinates(g)
    assert x.shape == g.shape
    assert x[1, 0, 0] == 1.0 and y[0, 2, 0] == 2.0 and z[0, 0, 3] == 3.0


def test_default_tissues_table():
    by_name = {t.name: t for t in DEFAULT_TISSUES}
    assert by_name["csf"].t2_ms > by_name["gm"].t2_ms > by_name["wm"].t2_ms
    assert by_name["background"].pd == 0.0
    assert by_name["csf"].pd == 1.0
