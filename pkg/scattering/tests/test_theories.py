import tempfile
from pathlib import Path

import torch
from django.test import SimpleTestCase

from scattering.checkpoints import load_params, save_params
from scattering.datasets import read_dataset, sidecar_path, write_dataset
from scattering.exceptions import CheckpointFormatError, ScatteringError
from scattering.linalg import COMPLEX
from scattering.networks import init_params
from scattering.theories import (S_MAGNITUDE_BOUND, MomentumGrid, Theory, TheoryConfig, amplitude,
                                 coupling_power, default_cutoff, extrapolation_ratios, generate_dataset,
                                 mandelstam, order_contribution, regenerate, s_matrix, s_matrix_from_points,
                                 scaled_grid, validation_grid)


class KinematicsTests(SimpleTestCase):

    def test_threshold(self):
        self.assertEqual(mandelstam(0.0, 0.0, 1.0), (4.0, 0.0, 0.0))

    def test_direct_substitution(self):
        s, t, u = mandelstam(1.0, 1.0, 1.0)
        self.assertEqual((s, t, u), (8.0, 0.0, -4.0))


class AmplitudeTests(SimpleTestCase):

    def test_free_theory(self):
        for theory in Theory:
            for order in (1, 2, 3):
                config = TheoryConfig(theory=theory, coupling=0.0, mass=1.0, order=order)
                self.assertEqual(abs(complex(amplitude(config, 0.7, 1.3))), 0.0)

    def test_phi4_contact_term(self):
        config = TheoryConfig(theory='phi4', coupling=0.3, mass=1.0)
        values = amplitude(config, torch.tensor([0.0, 1.0, 2.0])[:, None], torch.tensor([0.5, 1.5])[None, :])
        self.assertTrue(torch.allclose(values, torch.full((3, 2), -0.3, dtype=COMPLEX)))

    def test_free_s_matrix_is_identity(self):
        config = TheoryConfig(theory='scalar_qed', coupling=0.0, mass=2.0, order=3)
        self.assertTrue(torch.equal(s_matrix(config, MomentumGrid()), torch.eye(10, dtype=COMPLEX)))

    def test_phi4_order_one_s_matrix(self):
        config = TheoryConfig(theory='phi4', coupling=0.1, mass=1.0)
        expected = torch.eye(3, dtype=COMPLEX) + 1j * (-0.1) * torch.ones(3, 3, dtype=COMPLEX)
        self.assertTrue(torch.allclose(s_matrix(config, MomentumGrid(n_p=3)), expected))

    def test_order_terms_are_homogeneous_in_coupling(self):
        grid = MomentumGrid(n_p=5)
        for theory in Theory:
            for order in (1, 2, 3):
                low = order_contribution(TheoryConfig(theory, 0.1, 1.0, order), grid)
                high = order_contribution(TheoryConfig(theory, 0.2, 1.0, order), grid)
                expected = 2.0 ** coupling_power(theory, order)
                ratio = (high.abs().sum() / low.abs().sum()).item()
                self.assertAlmostEqual(ratio, expected, places=8, msg=f"{theory.value} order {order}")

    def test_entries_are_bounded(self):
        for theory in Theory:
            for order in (1, 2, 3):
                dataset = generate_dataset(theory, order, MomentumGrid(n_p=6))
                self.assertTrue(bool(torch.isfinite(torch.view_as_real(dataset.targets())).all()))
                self.assertLessEqual(dataset.targets().abs().max().item(), S_MAGNITUDE_BOUND)

    def test_higher_orders_are_smaller(self):
        grid = MomentumGrid(n_p=6)
        for theory in Theory:
            sizes = [order_contribution(TheoryConfig(theory, 0.4, 1.0, order), grid).abs().max().item()
                     for order in (1, 2, 3)]
            self.assertGreater(sizes[0], sizes[1], theory.value)
            self.assertGreater(sizes[1], sizes[2], theory.value)

    def test_permuting_the_grid_permutes_the_s_matrix(self):
        grid = MomentumGrid(n_p=6)
        points = grid.points()
        perm = torch.tensor([3, 0, 5, 1, 4, 2])
        for theory in Theory:
            config = TheoryConfig(theory, 0.3, 0.5, 3)
            s = s_matrix_from_points(config, points, default_cutoff(grid))
            permuted = s_matrix_from_points(config, points[perm], default_cutoff(grid))
            self.assertLess((permuted - s[perm][:, perm]).abs().max().item(), 1e-12, theory.value)

    def test_reversing_the_outgoing_momentum_swaps_t_and_u(self):
        p_f = torch.linspace(0.1, 2.0, 5, dtype=torch.float64)[:, None]
        p_i = torch.linspace(0.0, 1.5, 4, dtype=torch.float64)[None, :]
        s, t, u = mandelstam(p_i, p_f, 1.0)
        s_r, t_r, u_r = mandelstam(p_i, -p_f, 1.0)
        self.assertTrue(torch.equal(t_r, u))
        self.assertTrue(torch.equal(u_r, t))
        for theory in Theory:
            config = TheoryConfig(theory, 0.4, 1.5, 3)
            delta = amplitude(config, -p_f, p_i) - amplitude(config, p_f, p_i)
            self.assertLess(delta.abs().max().item(), 1e-12, theory.value)

    def test_invalid_configuration(self):
        with self.assertRaises(ValueError):
            TheoryConfig(theory='phi4', coupling=0.1, mass=1.0, order=4)
        with self.assertRaises(ValueError):
            TheoryConfig(theory='phi4', coupling=0.1, mass=0.0)
        with self.assertRaises(ValueError):
            TheoryConfig(theory='phi3', coupling=0.1, mass=1.0)


class DatasetTests(SimpleTestCase):

    def test_default_call_has_sixteen_samples(self):
        self.assertEqual(len(generate_dataset('phi4')), 16)

    def test_singleton_lists(self):
        self.assertEqual(len(generate_dataset('scalar_yukawa', 1, couplings=[0.2], masses=[1.0])), 1)

    def test_generation_is_pure(self):
        a = generate_dataset('scalar_qed', 2, MomentumGrid(n_p=4))
        b = generate_dataset('scalar_qed', 2, MomentumGrid(n_p=4))
        self.assertTrue(torch.equal(a.targets(), b.targets()))
        self.assertEqual(a.provenance_hash, b.provenance_hash)

    def test_coupling_major_order(self):
        dataset = generate_dataset('phi4', 1, MomentumGrid(n_p=3), couplings=(0.1, 0.2), masses=(0.5, 1.0))
        conditions = [(s.config.coupling, s.config.mass) for s in dataset.samples]
        self.assertEqual(conditions, [(0.1, 0.5), (0.1, 1.0), (0.2, 0.5), (0.2, 1.0)])

    def test_validation_grid(self):
        points = validation_grid(MomentumGrid(n_p=2, p_min=0.0, p_max=1.0)).points()
        self.assertEqual(points.tolist(), [0.5, 1.0])

    def test_scaled_grid(self):
        grid = MomentumGrid(n_p=4)
        self.assertEqual(scaled_grid(grid, 1.0), grid)
        self.assertEqual(scaled_grid(grid, 1.5).p_max, 3.0)
        with self.assertRaises(ValueError):
            scaled_grid(grid, 0.5)

    def test_extrapolation_ratios(self):
        ratios = extrapolation_ratios(2.0)
        self.assertEqual(len(ratios), 11)
        self.assertEqual(ratios[0], 1.0)
        self.assertEqual(ratios[3], 1.3)
        self.assertEqual(ratios[-1], 2.0)

    def test_regenerate_keeps_conditions(self):
        dataset = generate_dataset('phi4', 2, MomentumGrid(n_p=3), couplings=(0.1, 0.4), masses=(1.0,))
        stretched = regenerate(dataset, scaled_grid(dataset.grid, 2.0))
        self.assertEqual(len(stretched), 2)
        self.assertEqual(stretched.grid.p_max, 4.0)
        self.assertEqual(stretched.samples[1].config.coupling, 0.4)

    def test_provenance_records_the_training_cutoff(self):
        grid = MomentumGrid(n_p=4)
        dataset = generate_dataset('phi4', 2, grid, couplings=(0.2,), masses=(1.0,))
        self.assertEqual(dataset.provenance['cutoff'], default_cutoff(grid))
        self.assertEqual(default_cutoff(grid), 20.0)

    def test_derived_grids_keep_the_training_cutoff(self):
        grid = MomentumGrid(n_p=4)
        dataset = generate_dataset('phi4', 2, grid, couplings=(0.2,), masses=(1.0,))
        stretched_grid = scaled_grid(grid, 2.0)
        stretched = regenerate(dataset, stretched_grid)
        self.assertEqual(stretched.provenance['cutoff'], 20.0)
        expected = s_matrix(dataset.samples[0].config, stretched_grid, cutoff=20.0)
        self.assertTrue(torch.equal(stretched.samples[0].target, expected))
        self.assertFalse(torch.equal(stretched.samples[0].target, s_matrix(dataset.samples[0].config, stretched_grid)))


class DatasetFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / 'phi4.csv'

    def test_written_dataset_reads_back(self):
        dataset = generate_dataset('phi4', 2, validation_grid(MomentumGrid(n_p=3)), couplings=(0.1, 0.3),
                                   masses=(0.5,))
        write_dataset(dataset, self.path)
        self.assertTrue(sidecar_path(self.path).exists())
        loaded = read_dataset(self.path)
        self.assertTrue(torch.equal(loaded.targets(), dataset.targets()))
        self.assertEqual(loaded.grid, dataset.grid)
        self.assertEqual(loaded.provenance_hash, dataset.provenance_hash)

    def test_missing_sidecar_rebuilds_provenance(self):
        dataset = generate_dataset('scalar_yukawa', 1, MomentumGrid(n_p=3), couplings=(0.2,), masses=(1.0,))
        write_dataset(dataset, self.path)
        sidecar_path(self.path).unlink()
        loaded = read_dataset(self.path)
        self.assertEqual(loaded.provenance['theory'], 'scalar_yukawa')
        self.assertEqual(loaded.provenance_hash, dataset.provenance_hash)

    def test_wrong_header(self):
        self.path.write_text('a,b\n1,2\n')
        with self.assertRaises(ScatteringError):
            read_dataset(self.path)

    def test_missing_file(self):
        with self.assertRaises(ScatteringError):
            read_dataset(self.path)


class CheckpointTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / 'model.yaml'

    def test_saved_parameters_load_identically(self):
        for kind in ('node', 'fnde_mod'):
            params = init_params(kind, 3, modes=2, seed=4, hidden=5, p_scale=2.0)
            save_params(params, self.path)
            loaded = load_params(self.path)
            self.assertEqual((loaded.kind, loaded.n_p, loaded.modes, loaded.hidden, loaded.p_scale),
                             (params.kind, params.n_p, params.modes, params.hidden, params.p_scale))
            for name, tensor in params.tensors.items():
                self.assertTrue(torch.equal(loaded.tensors[name], tensor), name)

    def test_foreign_document(self):
        self.path.write_text('format: something-else\nversion: 1\n')
        with self.assertRaises(CheckpointFormatError):
            load_params(self.path)

    def test_unsupported_version(self):
        self.path.write_text('format: nde-scattering-params\nversion: 99\n')
        with self.assertRaises(CheckpointFormatError):
            load_params(self.path)

    def test_malformed_tensor(self):
        self.path.write_text('format: nde-scattering-params\nversion: 1\nkind: fno\nn_p: 3\nmodes: 3\n'
                             'hidden: 100\np_scale: 2.0\ntensors:\n  mixing: {shape: [4, 4, 2], data: [1.0]}\n')
        with self.assertRaises(CheckpointFormatError):
            load_params(self.path)
