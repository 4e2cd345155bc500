import numpy as np
import pytest

from hybridskin.errors import PlacementError, SelfIntersectionError
from hybridskin.geometry import (Footprint, OffsetSpec, extrude_covering,
                                 generate_supports, offset_surface,
                                 self_intersections)
from hybridskin.mesh import (Material, TriMesh, make_cylinder, make_plane_patch,
                             make_uv_sphere, sphere_tessellation_for_chord_error,
                             validate_mesh)


def v_crease_patch(alpha_deg=15.0, wing=0.05, width=0.05):
    """Two wings meeting at a sharp concave crease; folds over when offset.

    The wings are tessellated at different densities so fold-over crossings
    do not land exactly on triangle edges.
    """
    a = np.radians(alpha_deg)
    verts, faces = [], []

    def add_wing(direction, n, flip):
        base = len(verts)
        for s in np.linspace(0.0, wing, n + 1):
            for y in np.linspace(0.0, width, n + 1):
                verts.append(direction * s + np.array([0.0, y, 0.0]))
        for i in range(n):
            for j in range(n):
                a0 = base + i * (n + 1) + j
                b0 = base + (i + 1) * (n + 1) + j
                if flip:
                    faces.extend([[a0, a0 + 1, b0 + 1], [a0, b0 + 1, b0]])
                else:
                    faces.extend([[a0, b0, b0 + 1], [a0, b0 + 1, a0 + 1]])

    add_wing(np.array([np.sin(a), 0.0, np.cos(a)]), 5, False)
    add_wing(np.array([-np.sin(a), 0.0, np.cos(a)]), 4, True)
    return TriMesh.from_arrays(np.array(verts), faces, Material.STRUCTURAL)


# ---------------------------------------------------------------------------
# offset_surface
# ---------------------------------------------------------------------------

def test_offset_spec_rejects_negative_distance():
    with pytest.raises(ValueError):
        OffsetSpec(-0.001)


def test_planar_patch_offsets_exactly_along_normal():
    patch = make_plane_patch(0.1, 0.1, 5, 5)
    out = offset_surface(patch, OffsetSpec(0.004))
    assert np.allclose(out.vertices[:, 2], 0.004, atol=1e-9)
    assert np.allclose(out.vertices[:, :2], patch.vertices[:, :2], atol=1e-9)
    assert np.array_equal(out.faces, patch.faces)
    assert set(out.face_material.tolist()) == {int(Material.STRUCTURAL)}


def test_sphere_offset_matches_analytic_radius():
    r, d, tol = 0.05, 0.005, 1e-3
    n_lat, n_lon = sphere_tessellation_for_chord_error(r, tol)
    sphere = make_uv_sphere(r, n_lat, n_lon)
    out = offset_surface(sphere, OffsetSpec(d))
    radii = np.linalg.norm(out.vertices, axis=1)
    assert np.all(np.abs(radii - (r + d)) <= tol)


def test_zero_offset_is_identity():
    sphere = make_uv_sphere(0.05, 12, 24)
    out = offset_surface(sphere, OffsetSpec(0.0))
    assert np.array_equal(out.vertices, sphere.vertices)


def test_offset_composition_matches_single_offset():
    # offset(offset(m, d1), d2) == offset(m, d1 + d2) on smooth regions;
    # the sphere must be fine enough that vertex normals stay stable
    # between the two offsets (error scales ~ 1/n^2).
    sphere = make_uv_sphere(0.05, 32, 64)
    d1, d2 = 0.003, 0.004
    double = offset_surface(offset_surface(sphere, OffsetSpec(d1)), OffsetSpec(d2))
    single = offset_surface(sphere, OffsetSpec(d1 + d2))
    assert np.max(np.linalg.norm(double.vertices - single.vertices, axis=1)) < 1e-6

    patch = make_plane_patch(0.1, 0.1, 4, 4)
    double = offset_surface(offset_surface(patch, OffsetSpec(d1)), OffsetSpec(d2))
    single = offset_surface(patch, OffsetSpec(d1 + d2))
    assert np.max(np.linalg.norm(double.vertices - single.vertices, axis=1)) < 1e-9


def test_offset_is_deterministic():
    sphere = make_uv_sphere(0.05, 12, 24)
    a = offset_surface(sphere, OffsetSpec(0.004))
    b = offset_surface(sphere, OffsetSpec(0.004))
    assert np.array_equal(a.vertices, b.vertices)


def test_concave_crease_offset_raises_in_strict_mode():
    patch = v_crease_patch()
    assert not self_intersections(patch)  # clean before offsetting
    with pytest.raises(SelfIntersectionError):
        offset_surface(patch, OffsetSpec(0.005), strict=True)
    # non-strict mode returns the folded surface and only warns
    out = offset_surface(patch, OffsetSpec(0.005), strict=False)
    assert len(self_intersections(out)) > 0


# ---------------------------------------------------------------------------
# extrude_covering
# ---------------------------------------------------------------------------

def test_covering_is_displaced_flexible_copy():
    patch = make_plane_patch(0.08, 0.08, 4, 4)
    covering = extrude_covering(patch, OffsetSpec(0.003))
    assert np.allclose(covering.vertices[:, 2], 0.003, atol=1e-9)
    assert set(covering.face_material.tolist()) == {int(Material.FLEXIBLE)}
    assert np.array_equal(covering.faces, patch.faces)


def test_cylinder_shell_covering_matches_analytic_radius():
    shell = make_cylinder(0.04, 0.2, 64, capped=False)
    covering = extrude_covering(shell, OffsetSpec(0.006))
    radii = np.linalg.norm(covering.vertices[:, :2], axis=1)
    chord_tol = 0.04 * (1 - np.cos(np.pi / 64)) + 1e-6
    assert np.all(np.abs(radii - 0.046) <= chord_tol)


def test_zero_offset_covering_warns_but_succeeds(caplog):
    patch = make_plane_patch(0.05, 0.05, 2, 2)
    with caplog.at_level("WARNING", logger="hybridskin.geometry"):
        covering = extrude_covering(patch, OffsetSpec(0.0))
    assert np.array_equal(covering.vertices, patch.vertices)
    assert any("zero offset" in r.message for r in caplog.records)


# ---------------------------------------------------------------------------
# generate_supports
# ---------------------------------------------------------------------------

def patch_with_covering(size=0.1, n=10, gap=0.006):
    dermis = make_plane_patch(size, size, n, n)
    covering = extrude_covering(dermis, OffsetSpec(gap))
    return dermis, covering


def test_supports_fill_patch_with_min_spacing():
    dermis, covering = patch_with_covering()
    supports = generate_supports(dermis, covering, [], spacing=0.02, seed=0)
    assert len(supports) >= 16
    bases = np.array([s.vertices[-2] for s in supports])  # base cap center
    diff = bases[:, None, :] - bases[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, np.inf)
    assert dist.min() >= 0.02 - 1e-12


def test_supports_span_dermis_to_covering():
    dermis, covering = patch_with_covering(gap=0.006)
    supports = generate_supports(dermis, covering, [], spacing=0.03, seed=1)
    for s in supports:
        z = s.vertices[:, 2]
        assert z.min() == pytest.approx(0.0, abs=1e-9)
        assert z.max() == pytest.approx(0.006, abs=1e-9)
        assert validate_mesh(s).is_valid
        assert set(s.face_material.tolist()) == {int(Material.FLEXIBLE)}


def test_supports_respect_keepouts_by_brute_force():
    dermis, covering = patch_with_covering()
    keepouts = [
        Footprint(center=(0.0, 0.0, 0.0), normal=(0, 0, 1), radius=0.015),
        Footprint(center=(0.03, 0.03, 0.0), normal=(0, 0, 1), radius=0.01),
    ]
    radius = 0.002
    supports = generate_supports(dermis, covering, keepouts, spacing=0.02,
                                 seed=3, radius=radius)
    assert supports
    bases = np.array([s.vertices[-2] for s in supports])
    for k in keepouts:
        rel = bases - np.asarray(k.center)
        axial = rel @ np.asarray(k.normal)
        inplane = np.sqrt(np.einsum("ij,ij->i", rel, rel) - axial ** 2)
        assert np.all(inplane >= k.radius + radius - 1e-12)


def test_keepout_covering_whole_patch_raises():
    dermis, covering = patch_with_covering(size=0.05)
    blanket = [Footprint(center=(0.0, 0.0, 0.0), normal=(0, 0, 1), radius=0.2)]
    with pytest.raises(PlacementError):
        generate_supports(dermis, covering, blanket, spacing=0.02, seed=0)


def test_same_seed_gives_identical_supports():
    dermis, covering = patch_with_covering()
    a = generate_supports(dermis, covering, [], spacing=0.025, seed=42)
    b = generate_supports(dermis, covering, [], spacing=0.025, seed=42)
    assert len(a) == len(b)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.vertices, sb.vertices)
        assert np.array_equal(sa.faces, sb.faces)
    c = generate_supports(dermis, covering, [], spacing=0.025, seed=43)
    assert not all(np.array_equal(sa.vertices, sc.vertices)
                   for sa, sc in zip(a, c))


def test_mismatched_covering_rejected():
    dermis, _ = patch_with_covering(n=10)
    other = make_plane_patch(0.1, 0.1, 5, 5)
    with pytest.raises(ValueError):
        generate_supports(dermis, other, [], spacing=0.02, seed=0)
