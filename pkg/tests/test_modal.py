import numpy as np
import pytest
import scipy.sparse as sp

from somasonic import shapes, tissue
from somasonic.errors import ModalError
from somasonic.geometry import TriMesh
from somasonic.modal import (
    AssembledSystem,
    ModalModel,
    assemble_rod,
    assemble_shell,
    compute_modes,
    load_model,
    model_cache_key,
    pitch_map,
    save_model,
    vertex_voronoi_areas,
)


def random_lumped_system(rng, n):
    """Random SPD stiffness + positive diagonal mass, 1 DOF per node."""
    g = rng.normal(size=(n, n + 3))
    k = g @ g.T + n * np.eye(n)
    m = rng.uniform(0.5, 2.0, size=n)
    return AssembledSystem(
        mass=m, stiffness=sp.csr_matrix(k), vertex_count=n, dof_per_vertex=1
    )


def dense_oracle(system):
    """Independent dense eigensolution of K phi = w^2 M phi."""
    k = system.stiffness.toarray()
    m = system.mass
    inv_sqrt = 1.0 / np.sqrt(m)
    a = inv_sqrt[:, None] * k * inv_sqrt[None, :]
    lam, psi = np.linalg.eigh((a + a.T) / 2.0)
    return np.sqrt(np.clip(lam, 0, None)), psi * inv_sqrt[:, None]


class TestRodAssembly:
    def test_textbook_lumping(self, test_params):
        # 10-segment rod: tridiagonal K with k = EA/h, masses rho*A*h.
        length, area, segs = 1.0, 1e-4, 10
        system = assemble_rod(length, area, segs, test_params)
        h = length / segs
        k = test_params.young_modulus * area / h
        m = test_params.density * area * h
        kd = system.stiffness.toarray()
        assert np.allclose(np.diag(kd)[1:-1], 2 * k)
        assert np.allclose(np.diag(kd, 1), -k)
        assert np.allclose(system.mass[1:-1], m)
        assert np.allclose(system.mass[[0, -1]], m / 2)
        assert system.boundary == frozenset({0, segs})

    def test_chain_analytic_frequencies(self, test_params):
        # Fixed-fixed chain of 8 equal masses: w_j = 2*sqrt(k/m)*sin(j*pi/18).
        system = assemble_rod(1.0, 1e-4, 9, test_params)
        model = compute_modes(system, max_modes=8, loss_factor=0.01)
        h = 1.0 / 9
        k = test_params.young_modulus * 1e-4 / h
        m = test_params.density * 1e-4 * h
        analytic = 2 * np.sqrt(k / m) * np.sin(np.arange(1, 9) * np.pi / 18)
        assert np.max(np.abs(model.frequencies - analytic) / analytic) < 1e-9

    def test_rod_continuum_convergence(self, test_params):
        # First axial modes approach f_n = n*sqrt(E/rho)/(2L).
        system = assemble_rod(1.0, 1e-4, 64, test_params)
        model = compute_modes(system, max_modes=3, loss_factor=0.01)
        c = np.sqrt(test_params.young_modulus / test_params.density)
        continuum = np.arange(1, 4) * c / 2.0
        assert np.max(np.abs(model.frequencies_hz - continuum) / continuum) < 0.02

    def test_bad_geometry(self, test_params):
        with pytest.raises(ModalError):
            assemble_rod(0.0, 1e-4, 10, test_params)


class TestShellAssembly:
    def test_thickness_linearity(self, small_sphere, test_params):
        s1 = assemble_shell(small_sphere, test_params, thickness=0.002)
        s2 = assemble_shell(small_sphere, test_params, thickness=0.004)
        assert np.allclose(s2.mass, 2 * s1.mass)
        d = (s2.stiffness - 2 * s1.stiffness).toarray()
        assert np.abs(d).max() < 1e-9 * np.abs(s1.stiffness.toarray()).max()

    def test_disconnected_components_rejected(self, test_params):
        a = shapes.icosphere(radius=0.01, subdivisions=1)
        b = shapes.icosphere(radius=0.01, subdivisions=1, center=(1, 0, 0))
        verts = np.vstack([a.vertices, b.vertices])
        faces = np.vstack([a.faces, b.faces + len(a.vertices)])
        mesh = TriMesh(verts, faces, "two-shells")
        with pytest.raises(ModalError, match="disconnected"):
            assemble_shell(mesh, test_params)

    def test_voronoi_areas_sum_to_surface(self, small_sphere):
        areas = vertex_voronoi_areas(small_sphere)
        assert areas.sum() == pytest.approx(small_sphere.face_areas().sum(), rel=1e-9)
        assert np.all(areas > 0)

    def test_mass_conserved(self, small_sphere, test_params):
        system = assemble_shell(small_sphere, test_params, thickness=0.002)
        total = test_params.density * 0.002 * small_sphere.face_areas().sum()
        assert system.mass.sum() == pytest.approx(3 * total, rel=1e-9)

    def test_stiffness_symmetric_psd(self, small_sphere, test_params):
        system = assemble_shell(small_sphere, test_params)
        k = system.stiffness
        assert abs(k - k.T).max() == 0
        lam = np.linalg.eigvalsh(k.toarray())
        assert lam.min() > -1e-9 * lam.max()


class TestComputeModes:
    def test_oracle_equivalence_random_systems(self, test_params):
        rng = np.random.default_rng(2024)
        for _ in range(5):
            n = int(rng.integers(5, 51))
            system = random_lumped_system(rng, n)
            model = compute_modes(system, max_modes=n, loss_factor=0.01)
            w_oracle, phi_oracle = dense_oracle(system)
            assert np.allclose(model.frequencies, w_oracle, rtol=1e-6)
            # |phi^T M phi_oracle| = I up to sign indeterminacy
            gram = np.abs(
                model.mode_shapes.T @ (system.mass[:, None] * phi_oracle)
            )
            assert np.allclose(gram, np.eye(n), atol=1e-6)

    def test_free_free_shell_six_rigid_modes(self, small_sphere, test_params):
        system = assemble_shell(small_sphere, test_params)
        model = compute_modes(system, max_modes=12, loss_factor=0.01)
        assert model.rigid_modes_excluded == 6
        assert np.all(model.frequencies > 0)

    def test_stiffness_scaling_law(self, small_sphere, test_params):
        m1 = compute_modes(assemble_shell(small_sphere, test_params), 12, 0.01)
        p4 = tissue.ModelParams(
            young_modulus=4 * test_params.young_modulus,
            density=test_params.density,
            poisson=test_params.poisson,
            loss_factor=test_params.loss_factor,
        )
        m4 = compute_modes(assemble_shell(small_sphere, p4), 12, 0.01)
        assert np.max(np.abs(m4.frequencies / m1.frequencies - 2.0)) < 1e-9

    def test_mass_scaling_law(self, small_sphere, test_params):
        m1 = compute_modes(assemble_shell(small_sphere, test_params), 12, 0.01)
        p4 = tissue.ModelParams(
            young_modulus=test_params.young_modulus,
            density=4 * test_params.density,
            poisson=test_params.poisson,
            loss_factor=test_params.loss_factor,
        )
        m4 = compute_modes(assemble_shell(small_sphere, p4), 12, 0.01)
        assert np.max(np.abs(m4.frequencies / m1.frequencies - 0.5)) < 1e-9

    def test_frequencies_ascending_and_damping_bounded(self, small_sphere, test_params):
        model = compute_modes(assemble_shell(small_sphere, test_params), 24, 0.05)
        assert np.all(np.diff(model.frequencies) >= 0)
        assert np.all((model.damping_ratios > 0) & (model.damping_ratios < 1))
        assert model.damping_ratios[-1] <= 0.3 + 1e-12

    def test_mass_orthonormal_shapes(self, small_sphere, test_params):
        system = assemble_shell(small_sphere, test_params)
        model = compute_modes(system, max_modes=10, loss_factor=0.01)
        gram = model.mode_shapes.T @ (system.mass[:, None] * model.mode_shapes)
        assert np.allclose(gram, np.eye(model.n_modes), atol=1e-8)

    def test_non_psd_rejected(self):
        n = 6
        system = AssembledSystem(
            mass=np.ones(n),
            stiffness=sp.csr_matrix(-np.eye(n)),
            vertex_count=n,
            dof_per_vertex=1,
        )
        with pytest.raises(ModalError, match="PSD"):
            compute_modes(system, max_modes=3, loss_factor=0.01)

    def test_sparse_path_matches_dense(self, test_params):
        # Force the iterative path by patching the dense limit.
        rng = np.random.default_rng(5)
        system = random_lumped_system(rng, 40)
        dense = compute_modes(system, max_modes=10, loss_factor=0.01)
        import somasonic.modal as m

        old = m._DENSE_LIMIT
        m._DENSE_LIMIT = 10
        try:
            sparse = compute_modes(system, max_modes=10, loss_factor=0.01)
        finally:
            m._DENSE_LIMIT = old
        assert np.allclose(sparse.frequencies, dense.frequencies, rtol=1e-8)


class TestPitchMap:
    def _model(self, freqs_hz):
        f = np.asarray(freqs_hz, dtype=float) * 2 * np.pi
        n = len(f)
        return ModalModel(
            frequencies=f,
            damping_ratios=np.full(n, 0.01),
            mode_shapes=np.ones((1, n)),
            dof_per_vertex=1,
        )

    def test_low_fundamental_lifted(self):
        mapped = pitch_map(self._model([5.0, 12.5, 40.0]), (80.0, 8000.0))
        assert mapped.pitch_scale == pytest.approx(16.0)
        assert mapped.fundamental_hz == pytest.approx(80.0)

    def test_in_band_identity(self):
        mapped = pitch_map(self._model([200.0, 500.0]), (80.0, 8000.0))
        assert mapped.pitch_scale == 1.0
        assert np.allclose(mapped.frequencies_hz, [200.0, 500.0])

    def test_excess_modes_dropped(self):
        mapped = pitch_map(self._model([40.0, 100.0, 9000.0]), (80.0, 8000.0))
        assert mapped.n_modes == 2  # 9000*2 exceeds the top edge

    def test_ratios_preserved(self):
        freqs = [3.0, 7.1, 19.4, 55.2]
        mapped = pitch_map(self._model(freqs), (80.0, 20000.0))
        base = np.asarray(freqs)
        ratios = mapped.frequencies / mapped.frequencies[0]
        assert np.max(np.abs(ratios - base / base[0])) < 1e-12

    def test_empty_model_rejected(self):
        empty = ModalModel(
            frequencies=np.zeros(0),
            damping_ratios=np.zeros(0),
            mode_shapes=np.zeros((1, 0)),
            dof_per_vertex=1,
        )
        with pytest.raises(ModalError):
            pitch_map(empty, (80.0, 8000.0))

    def test_bad_band(self):
        with pytest.raises(ModalError):
            pitch_map(self._model([100.0]), (8000.0, 80.0))


class TestCache:
    def test_roundtrip(self, tmp_path, small_sphere, test_params):
        model = compute_modes(assemble_shell(small_sphere, test_params), 8, 0.01)
        path = tmp_path / "m.npz"
        save_model(model, path)
        back = load_model(path)
        assert np.array_equal(back.frequencies, model.frequencies)
        assert np.array_equal(back.mode_shapes, model.mode_shapes)
        assert back.dof_per_vertex == model.dof_per_vertex

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "old.npz"
        np.savez(path, format_version=np.int64(999))
        with pytest.raises(ModalError, match="version"):
            load_model(path)

    def test_key_sensitivity(self, small_sphere, unit_cube, test_params):
        k1 = model_cache_key(small_sphere, test_params, 0.002, 64)
        k2 = model_cache_key(small_sphere, test_params, 0.003, 64)
        k3 = model_cache_key(unit_cube, test_params, 0.002, 64)
        assert len({k1, k2, k3}) == 3
