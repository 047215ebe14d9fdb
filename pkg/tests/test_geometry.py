import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rigid_motion
from somasonic import shapes
from somasonic.errors import DegenerateGeometryError, MeshError, MeshFormatError, WatertightError
from somasonic.geometry import (
    TriMesh,
    closest_point_on_triangles,
    convex_hull,
    load_mesh,
    save_obj,
    voxelize,
)


class TestLoadMesh:
    def test_quad_cube_obj(self, cube_obj):
        mesh = load_mesh(cube_obj, "cube")
        assert len(mesh.vertices) == 8
        assert len(mesh.faces) == 12  # six quads split in two
        assert len(mesh.edges) == 12  # source connectivity has no diagonals
        assert mesh.degenerate_dropped == 0
        assert mesh.is_watertight()

    def test_zero_area_face_dropped_with_warning(self, tmp_path):
        path = tmp_path / "degen.obj"
        path.write_text(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
            "f 1 2 3\nf 1 2 4\nf 2 3 4\nf 1 3 4\n"
            "f 1 2 2\n"  # zero area
        )
        with pytest.warns(UserWarning, match="1 degenerate"):
            mesh = load_mesh(path, "degen")
        assert mesh.degenerate_dropped == 1
        assert len(mesh.faces) == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_mesh(tmp_path / "nope.obj", "x")

    def test_unparseable(self, tmp_path):
        path = tmp_path / "junk.obj"
        path.write_text("this is not a mesh\n")
        with pytest.raises(MeshFormatError):
            load_mesh(path, "junk")

    def test_empty_after_validation(self, tmp_path):
        path = tmp_path / "allzero.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
        with pytest.warns(UserWarning):
            with pytest.raises(MeshError, match="empty"):
                load_mesh(path, "flat")

    def test_face_index_out_of_range(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
        with pytest.raises(MeshError):
            load_mesh(path, "bad")

    def test_binary_stl_welds_vertices(self, tmp_path, unit_cube):
        tris = unit_cube.triangle_corners.astype("<f4")
        records = b""
        for tri in tris:
            records += b"\x00" * 12  # normal ignored
            records += tri.tobytes()
            records += b"\x00\x00"
        blob = b"\x00" * 80 + struct.pack("<I", len(tris)) + records
        path = tmp_path / "cube.stl"
        path.write_bytes(blob)
        mesh = load_mesh(path, "cube-stl")
        assert len(mesh.vertices) == 8
        assert len(mesh.faces) == 12
        assert mesh.is_watertight()

    def test_scale_factor(self, cube_obj):
        mesh = load_mesh(cube_obj, "cube", scale=0.001)
        assert mesh.volume() == pytest.approx(1e-9)

    def test_obj_export_roundtrip(self, tmp_path, small_sphere):
        out = tmp_path / "sphere.obj"
        save_obj(small_sphere, out)
        back = load_mesh(out, "sphere2")
        assert len(back.vertices) == len(small_sphere.vertices)
        assert back.volume() == pytest.approx(small_sphere.volume(), rel=1e-6)


class TestClosestPoint:
    def test_outside_face(self, unit_cube):
        hit = unit_cube.closest_point((2.0, 0.5, 0.5))
        assert np.allclose(hit.point, (1.0, 0.5, 0.5))
        assert hit.distance == pytest.approx(1.0)
        assert hit.inside is False

    def test_center_to_face(self, unit_cube):
        hit = unit_cube.closest_point((0.5, 0.5, 0.5))
        assert hit.distance == pytest.approx(0.5)
        assert hit.inside is True

    def test_on_vertex(self, unit_cube):
        hit = unit_cube.closest_point((0.0, 0.0, 0.0))
        assert hit.distance == pytest.approx(0.0, abs=1e-15)

    def test_zero_iff_on_surface(self, unit_cube):
        on_face = (0.3, 0.7, 1.0)
        on_edge = (0.5, 0.0, 0.0)
        off = (0.5, 0.5, 1.2)
        assert unit_cube.closest_point(on_face).distance == pytest.approx(0.0, abs=1e-15)
        assert unit_cube.closest_point(on_edge).distance == pytest.approx(0.0, abs=1e-15)
        assert unit_cube.closest_point(off).distance > 0

    def test_inside_none_for_open_mesh(self, unit_cube):
        open_mesh = TriMesh(unit_cube.vertices, unit_cube.faces[:-1], "open")
        assert not open_mesh.is_watertight()
        assert open_mesh.closest_point((0.5, 0.5, 0.5)).inside is None

    def test_bvh_matches_brute_force(self, unit_cube):
        sphere = shapes.icosphere(radius=0.7, subdivisions=2)  # 320 faces
        rng = np.random.default_rng(42)
        for mesh in (unit_cube, sphere):
            queries = rng.uniform(-1.5, 1.5, size=(200, 3))
            for q in queries:
                hit = mesh.closest_point(q)
                _, d_brute = mesh.closest_point_brute(q)
                assert hit.distance == pytest.approx(d_brute, abs=1e-12)

    def test_triangle_kernel_against_sampling(self):
        rng = np.random.default_rng(7)
        tris = rng.normal(size=(50, 3, 3))
        q = rng.normal(size=3)
        pts = closest_point_on_triangles(tris, q)
        d = np.linalg.norm(pts - q, axis=1)
        # Dense barycentric sampling can only find worse-or-equal points.
        u = np.linspace(0, 1, 40)
        uu, vv = np.meshgrid(u, u)
        keep = uu + vv <= 1.0
        bary = np.stack([1 - uu[keep] - vv[keep], uu[keep], vv[keep]], axis=1)
        for i in range(len(tris)):
            samples = bary @ tris[i]
            d_samples = np.linalg.norm(samples - q, axis=1).min()
            assert d[i] <= d_samples + 1e-9


class TestContainment:
    def test_cube_points(self, unit_cube):
        assert unit_cube.contains((0.5, 0.5, 0.5))
        assert not unit_cube.contains((1.5, 0.5, 0.5))
        assert not unit_cube.contains((-0.01, 0.5, 0.5))

    def test_sphere_shell(self, small_sphere):
        assert small_sphere.contains((0.0, 0.0, 0.0))
        assert not small_sphere.contains((0.06, 0.0, 0.0))


class TestVoxelize:
    def test_unit_cube_exact(self, unit_cube):
        grid = voxelize(unit_cube, 0.1)
        assert grid.occupied_count == 1000
        assert grid.occupancy.shape == (10, 10, 10)

    def test_sphere_volume_within_2pct(self):
        sphere = shapes.icosphere(radius=0.5, subdivisions=3)
        grid = voxelize(sphere, 0.02)
        analytic = 4.0 / 3.0 * np.pi * 0.5**3
        assert grid.occupied_volume == pytest.approx(analytic, rel=0.02)

    def test_open_mesh_rejected(self, unit_cube):
        open_mesh = TriMesh(unit_cube.vertices, unit_cube.faces[:-1], "open")
        with pytest.raises(WatertightError):
            voxelize(open_mesh, 0.1)

    def test_cell_size_larger_than_bbox(self, unit_cube):
        with pytest.raises(ValueError):
            voxelize(unit_cube, 2.0)

    def test_convergence_on_convex_fixtures(self, unit_cube):
        # Error halves (or better) when the cell size halves.
        sphere = shapes.icosphere(radius=0.5, subdivisions=3)
        analytic = {id(unit_cube): 1.0, id(sphere): sphere.volume()}
        for mesh, coarse in ((unit_cube, 1 / 16), (sphere, 1 / 16)):
            err = [
                abs(voxelize(mesh, h).occupied_volume - analytic[id(mesh)])
                for h in (coarse, coarse / 2)
            ]
            assert err[1] <= err[0] / 2 + 1e-12


class TestConvexHull:
    def test_cube_corners(self, unit_cube):
        hull = convex_hull(unit_cube.vertices)
        assert hull.volume() == pytest.approx(1.0)
        assert hull.is_watertight()

    def test_tetrahedron(self):
        pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
        assert convex_hull(pts).volume() == pytest.approx(1 / 6)

    def test_collinear_rejected(self):
        pts = [(i, 0.0, 0.0) for i in range(5)]
        with pytest.raises(DegenerateGeometryError):
            convex_hull(pts)

    def test_too_few_points(self):
        with pytest.raises(DegenerateGeometryError):
            convex_hull([(0, 0, 0), (1, 0, 0), (0, 1, 0)])

    def test_contains_all_inputs(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(40, 3))
        hull = convex_hull(pts)
        for p in pts:
            assert hull.closest_point(p).distance < 1e-9 or hull.contains(p)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_volume_invariant_permutation_and_rigid_motion(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(12, 3))
        base = convex_hull(pts).volume()
        perm = rng.permutation(len(pts))
        assert convex_hull(pts[perm]).volume() == pytest.approx(base, rel=1e-9)
        moved = rigid_motion(pts, seed=seed + 1)
        assert convex_hull(moved).volume() == pytest.approx(base, rel=1e-9)


class TestMeshProperties:
    def test_volume_cube(self, unit_cube):
        assert unit_cube.volume() == pytest.approx(1.0)

    def test_vertex_normals_point_outward(self, small_sphere):
        normals = small_sphere.vertex_normals()
        radial = small_sphere.vertices / np.linalg.norm(
            small_sphere.vertices, axis=1, keepdims=True
        )
        assert np.all(np.einsum("ij,ij->i", normals, radial) > 0.9)

    def test_voxel_grid_invariants(self, unit_cube):
        grid = voxelize(unit_cube, 0.25)
        assert grid.occupancy.size == np.prod(grid.dims)
        assert grid.cell_size > 0
