import cmath

import torch
from django.test import SimpleTestCase

from scattering.exceptions import CirculantStructureError, ShapeError, SingularMatrixError
from scattering.linalg import (COMPLEX, circulant_embed, circulant_extract, dft2, embed_half_modes, embed_modes,
                               half_columns, hermitian_extend, idft2, mat_inverse, mode_indices, mode_truncate)


def random_complex(*shape, seed=0):
    generator = torch.Generator().manual_seed(seed)
    real = torch.randn(*shape, generator=generator, dtype=torch.float64)
    imag = torch.randn(*shape, generator=generator, dtype=torch.float64)
    return torch.complex(real, imag)


def naive_dft2(m):
    rows, cols = m.shape
    out = torch.zeros(rows, cols, dtype=COMPLEX)
    for a in range(rows):
        for b in range(cols):
            total = 0j
            for k in range(rows):
                for l in range(cols):
                    phase = cmath.exp(-2j * cmath.pi * (a * k / rows + b * l / cols))
                    total += complex(m[k, l].item()) * phase
            out[a, b] = total
    return out


class FourierTransformTests(SimpleTestCase):

    def test_constant_matrix_has_only_dc_component(self):
        spectrum = dft2(torch.ones(2, 2))
        expected = torch.zeros(2, 2, dtype=COMPLEX)
        expected[0, 0] = 4
        self.assertTrue(torch.allclose(spectrum, expected))

    def test_matches_direct_sum(self):
        m = random_complex(4, 4)
        self.assertLess((dft2(m) - naive_dft2(m)).abs().max().item(), 1e-12)

    def test_dc_inversion(self):
        s = torch.zeros(3, 3, dtype=COMPLEX)
        s[0, 0] = 2 + 1j
        self.assertTrue(torch.allclose(idft2(s), torch.full((3, 3), (2 + 1j) / 9, dtype=COMPLEX)))

    def test_zero_spectrum(self):
        self.assertEqual(idft2(torch.zeros(5, 5, dtype=COMPLEX)).abs().max().item(), 0.0)

    def test_inverse_matches_conjugation_identity(self):
        s = random_complex(6, 6, seed=1)
        oracle = torch.conj(dft2(torch.conj(s))) / 36
        self.assertLess((idft2(s) - oracle).abs().max().item(), 1e-12)

    def test_round_trip(self):
        m = random_complex(5, 7, seed=2)
        self.assertLess((idft2(dft2(m)) - m).abs().max().item(), 1e-12)

    def test_rejects_vectors(self):
        with self.assertRaises(ShapeError):
            dft2(torch.ones(4))

    def test_random_shapes_match_direct_sum(self):
        generator = torch.Generator().manual_seed(12)
        for seed in range(50):
            rows, cols = (int(v) for v in torch.randint(1, 9, (2,), generator=generator))
            m = random_complex(rows, cols, seed=100 + seed)
            self.assertLess((dft2(m) - naive_dft2(m)).abs().max().item(), 1e-12, (rows, cols))

    def test_parseval(self):
        m = random_complex(7, 5, seed=13)
        energy = (m.abs() ** 2).sum().item()
        spectral = (dft2(m).abs() ** 2).sum().item() / 35
        self.assertLess(abs(energy - spectral), 1e-12 * energy)


class ModeTruncationTests(SimpleTestCase):

    def test_cutoff_at_least_grid_is_identity(self):
        s = random_complex(6, 6)
        self.assertTrue(torch.equal(mode_truncate(s, 6), s))
        self.assertTrue(torch.equal(mode_truncate(s, 32), s))

    def test_single_mode_keeps_dc(self):
        s = random_complex(5, 5)
        truncated = mode_truncate(s, 1)
        self.assertEqual(truncated[0, 0], s[0, 0])
        truncated[0, 0] = 0
        self.assertEqual(truncated.abs().max().item(), 0.0)

    def test_window_is_symmetric_about_zero_frequency(self):
        self.assertEqual(mode_indices(10, 4).tolist(), [0, 1, 8, 9])
        self.assertEqual(mode_indices(10, 3).tolist(), [0, 1, 9])

    def test_truncation_is_idempotent(self):
        s = random_complex(8, 8, seed=3)
        once = mode_truncate(s, 3)
        self.assertTrue(torch.equal(mode_truncate(once, 3), once))

    def test_embedding_places_packed_modes(self):
        packed = random_complex(2, 2)
        full = embed_modes(packed, (4, 4))
        self.assertEqual(full[0, 0], packed[0, 0])
        self.assertEqual(full[3, 3], packed[1, 1])
        self.assertEqual(full[1:3].abs().max().item(), 0.0)

    def test_low_pass_matches_masked_direct_transform(self):
        n, modes = 8, 3
        x = random_complex(n, n, seed=14)
        kept = [k for k in range(n) if k < (modes + 1) // 2 or k >= n - modes // 2]
        spectrum = naive_dft2(x)
        masked = torch.zeros_like(spectrum)
        for a in kept:
            for b in kept:
                masked[a, b] = spectrum[a, b]
        oracle = torch.conj(naive_dft2(torch.conj(masked))) / (n * n)
        got = idft2(mode_truncate(dft2(x), modes))
        self.assertLess((got - oracle).abs().max().item(), 1e-12)


class HalfPlaneTests(SimpleTestCase):

    def test_half_plane_width(self):
        self.assertEqual(half_columns(10), 6)
        self.assertEqual(half_columns(5), 3)

    def test_real_input_spectrum_is_recovered(self):
        for n in (5, 6):
            x = torch.randn(n, n, generator=torch.Generator().manual_seed(n), dtype=torch.float64)
            spectrum = dft2(x)
            extended = hermitian_extend(spectrum[:, :half_columns(n)], n)
            self.assertLess((extended - spectrum).abs().max().item(), 1e-12, n)

    def test_half_plane_columns_are_kept(self):
        half = random_complex(6, 4, seed=15)
        self.assertTrue(torch.equal(hermitian_extend(half, 6)[:, :4], half))

    def test_extension_needs_matching_width(self):
        with self.assertRaises(ShapeError):
            hermitian_extend(random_complex(6, 3), 6)

    def test_embedding_places_packed_half_modes(self):
        packed = random_complex(2, 3, seed=16)
        half = embed_half_modes(packed, (6, 6))
        self.assertEqual(tuple(half.shape), (6, 4))
        self.assertEqual(half[0, 2], packed[0, 2])
        self.assertEqual(half[5, 1], packed[1, 1])
        self.assertEqual(half[1:5].abs().max().item(), 0.0)
        self.assertEqual(half[:, 3].abs().max().item(), 0.0)

    def test_packed_half_modes_must_fit(self):
        with self.assertRaises(ShapeError):
            embed_half_modes(random_complex(2, 5), (6, 6))


class InverseTests(SimpleTestCase):

    def test_identity(self):
        eye = torch.eye(5, dtype=COMPLEX)
        self.assertTrue(torch.allclose(mat_inverse(eye), eye))

    def test_diagonal(self):
        diag = torch.tensor([2 + 1j, -0.5, 3j], dtype=COMPLEX)
        self.assertTrue(torch.allclose(mat_inverse(torch.diag(diag)), torch.diag(1 / diag)))

    def test_multiply_back(self):
        m = random_complex(10, 10, seed=4) + 10 * torch.eye(10, dtype=COMPLEX)
        product = m @ mat_inverse(m)
        self.assertLess((product - torch.eye(10, dtype=COMPLEX)).abs().max().item(), 1e-8)

    def test_singular_matrix_is_reported(self):
        m = torch.ones(3, 3, dtype=COMPLEX)
        with self.assertRaises(SingularMatrixError):
            mat_inverse(m)

    def test_zero_matrix_is_singular(self):
        with self.assertRaises(SingularMatrixError):
            mat_inverse(torch.zeros(2, 2, dtype=COMPLEX))

    def test_rejects_non_square(self):
        with self.assertRaises(ShapeError):
            mat_inverse(torch.ones(2, 3, dtype=COMPLEX))


class CirculantTests(SimpleTestCase):

    def test_scalar_kernel_is_pointwise_scaling(self):
        d = circulant_embed(torch.tensor([[2 - 1j]]), (2, 2))
        self.assertTrue(torch.allclose(d, (2 - 1j) * torch.eye(4, dtype=COMPLEX)))

    def test_zero_kernel(self):
        self.assertEqual(circulant_embed(torch.zeros(2, 2), (3, 3)).abs().max().item(), 0.0)

    def test_matches_circular_convolution(self):
        kernel = random_complex(2, 2, seed=5)
        x = random_complex(3, 3, seed=6)
        expected = torch.zeros(3, 3, dtype=COMPLEX)
        for i in range(3):
            for j in range(3):
                for k in range(2):
                    for l in range(2):
                        expected[i, j] += kernel[k, l] * x[(i - k) % 3, (j - l) % 3]
        got = (circulant_embed(kernel, (3, 3)) @ x.reshape(-1)).reshape(3, 3)
        self.assertLess((got - expected).abs().max().item(), 1e-12)

    def test_extract_round_trip(self):
        kernel = random_complex(4, 3, seed=7)
        d = circulant_embed(kernel, (4, 4))
        self.assertLess((circulant_extract(d, (4, 3)) - kernel).abs().max().item(), 1e-12)

    def test_identity_is_delta_kernel(self):
        kernel = circulant_extract(torch.eye(9, dtype=COMPLEX), (3, 2))
        expected = torch.zeros(3, 2, dtype=COMPLEX)
        expected[0, 0] = 1
        self.assertTrue(torch.equal(kernel, expected))

    def test_non_circulant_matrix_is_rejected(self):
        with self.assertRaises(CirculantStructureError) as ctx:
            circulant_extract(random_complex(9, 9, seed=8), (3, 3))
        self.assertGreater(ctx.exception.deviation, 1e-8)

    def test_kernel_outside_requested_support_is_rejected(self):
        d = circulant_embed(random_complex(4, 4, seed=9), (4, 4))
        with self.assertRaises(CirculantStructureError):
            circulant_extract(d, (4, 3))

    def test_tolerance_relaxes_structure_check(self):
        d = circulant_embed(random_complex(3, 3, seed=10), (3, 3))
        noisy = d + 1e-6 * random_complex(9, 9, seed=11)
        kernel = circulant_extract(noisy, (3, 3), tolerance=1e-3)
        self.assertEqual(tuple(kernel.shape), (3, 3))
