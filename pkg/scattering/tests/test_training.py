import torch
from django.test import SimpleTestCase

from scattering.exceptions import ConfigurationError, NonFiniteGradientError
from scattering.linalg import COMPLEX
from scattering.networks import init_params
from scattering.theories import MomentumGrid, generate_dataset, validation_grid
from scattering.training import (AdamState, TrainConfig, adam_update, evaluate, fractional_loss, lr_at,
                                 mse_loss, repeat_runs, summarize_histories, train)

GRID = MomentumGrid(n_p=3)


def small_datasets(couplings=(0.1, 0.3), masses=(1.0,)):
    return (generate_dataset('phi4', 1, GRID, couplings, masses),
            generate_dataset('phi4', 1, validation_grid(GRID), couplings, masses))


class LossTests(SimpleTestCase):

    def test_identical_inputs(self):
        target = torch.randn(2, 3, 3, dtype=COMPLEX)
        self.assertEqual(mse_loss(target, target).item(), 0.0)

    def test_unit_offset(self):
        target = torch.randn(4, 4, dtype=COMPLEX)
        self.assertAlmostEqual(mse_loss(target + 1, target).item(), 1.0, places=12)

    def test_matches_elementwise_sum(self):
        generator = torch.Generator().manual_seed(0)
        pred = torch.complex(torch.randn(2, 3, 3, generator=generator, dtype=torch.float64),
                             torch.randn(2, 3, 3, generator=generator, dtype=torch.float64))
        target = torch.complex(torch.randn(2, 3, 3, generator=generator, dtype=torch.float64),
                               torch.randn(2, 3, 3, generator=generator, dtype=torch.float64))
        total = 0.0
        for p, t in zip(pred.reshape(-1).tolist(), target.reshape(-1).tolist()):
            total += abs(p - t) ** 2
        self.assertLess(abs(mse_loss(pred, target).item() - total / 18), 1e-12)

    def test_fractional_loss_is_normalised(self):
        target = 2 * torch.ones(3, 3, dtype=COMPLEX)
        self.assertAlmostEqual(fractional_loss(target + 1, target).item(), 0.25, places=12)


class ScheduleTests(SimpleTestCase):

    def test_step_halving(self):
        config = TrainConfig()
        self.assertEqual(lr_at(50, config), 0.02)
        self.assertEqual(lr_at(150, config), 0.01)
        self.assertEqual(lr_at(300, config), 0.005)

    def test_epoch_outside_schedule(self):
        with self.assertRaises(ValueError):
            lr_at(400, TrainConfig())

    def test_drops_must_fit_the_run(self):
        with self.assertRaises(ConfigurationError):
            TrainConfig(epochs=50)
        self.assertEqual(TrainConfig.for_epochs(200).lr_drops, (100,))
        self.assertEqual(TrainConfig.for_epochs(0).lr_drops, ())


class AdamTests(SimpleTestCase):

    def test_zero_gradient_from_fresh_state(self):
        params = {'theta': torch.tensor([1.5, -2.0], dtype=torch.float64)}
        new, state = adam_update(params, {'theta': torch.zeros(2, dtype=torch.float64)},
                                 AdamState.fresh(params), 0.02)
        self.assertTrue(torch.equal(new['theta'], params['theta']))
        self.assertEqual(state.step, 1)

    def test_first_step_moves_by_learning_rate(self):
        for gradient in (3.0, -0.01):
            params = {'theta': torch.tensor(0.0, dtype=torch.float64)}
            new, _ = adam_update(params, {'theta': torch.tensor(gradient, dtype=torch.float64)},
                                 AdamState.fresh(params), 0.02)
            self.assertAlmostEqual(abs(new['theta'].item()), 0.02, places=6)

    def test_update_is_pure(self):
        params = {'theta': torch.tensor(1.0, dtype=torch.float64)}
        state = AdamState.fresh(params)
        adam_update(params, {'theta': torch.tensor(2.0, dtype=torch.float64)}, state, 0.02)
        self.assertEqual(params['theta'].item(), 1.0)
        self.assertEqual(state.step, 0)

    def test_quadratic_converges(self):
        params = {'theta': torch.tensor(1.0, dtype=torch.float64)}
        state = AdamState.fresh(params)
        for _ in range(200):
            params, state = adam_update(params, {'theta': 2 * params['theta']}, state, 0.02)
        self.assertLess(abs(params['theta'].item()), 1e-3)

    def test_non_finite_gradient(self):
        params = {'theta': torch.tensor(1.0, dtype=torch.float64)}
        with self.assertRaises(NonFiniteGradientError):
            adam_update(params, {'theta': torch.tensor(float('nan'), dtype=torch.float64)},
                        AdamState.fresh(params), 0.02)


class TrainTests(SimpleTestCase):

    def setUp(self):
        self.dataset, self.val_dataset = small_datasets()

    def test_zero_epochs_returns_initial_parameters(self):
        initial = init_params('fno', 3, seed=2)
        params, history = train('fno', self.dataset, self.val_dataset, TrainConfig.for_epochs(0, batch=2),
                                initial=initial)
        self.assertEqual(len(history), 0)
        self.assertEqual(history.val, [])
        for name, tensor in initial.tensors.items():
            self.assertTrue(torch.equal(params.tensors[name], tensor))

    def test_same_seed_gives_identical_histories(self):
        config = TrainConfig.for_epochs(3, batch=2)
        _, first = train('fnde', self.dataset, self.val_dataset, config, seed=5)
        _, second = train('fnde', self.dataset, self.val_dataset, config, seed=5)
        self.assertEqual(first.train, second.train)
        self.assertEqual(first.val, second.val)

    def test_history_length_matches_epochs(self):
        _, history = train('node', self.dataset, self.val_dataset, TrainConfig.for_epochs(4, batch=2), hidden=8)
        self.assertEqual(len(history.train), 4)
        self.assertEqual(len(history.val), 4)

    def test_loss_decreases(self):
        _, history = train('fnde_mod', self.dataset, self.val_dataset, TrainConfig.for_epochs(15, batch=2))
        self.assertLess(history.train[-1], history.train[0])

    def test_validation_on_training_grid_matches_training_loss(self):
        _, history = train('fno', self.dataset, self.dataset, TrainConfig.for_epochs(3, batch=2))
        for train_loss, val_loss in zip(history.train, history.val):
            self.assertAlmostEqual(train_loss, val_loss, places=12)

    def test_model_scale_follows_training_grid(self):
        params, _ = train('fno', self.dataset, self.val_dataset, TrainConfig.for_epochs(1, batch=2))
        self.assertEqual(params.p_scale, GRID.p_max)

    def test_evaluate_reports_both_losses(self):
        params = init_params('fno', 3, p_scale=GRID.p_max)
        result = evaluate('fno', params, self.dataset)
        self.assertGreater(result.mse, 0.0)
        target_power = (self.dataset.targets().abs() ** 2).mean().item()
        self.assertAlmostEqual(result.fractional, result.mse / target_power, places=10)


class RepeatRunTests(SimpleTestCase):

    def setUp(self):
        self.datasets = small_datasets()

    def test_single_seed_mean_is_the_history(self):
        summary = repeat_runs('fno', self.datasets, TrainConfig.for_epochs(3, batch=2, seeds=1))
        only = summary.histories[0]
        self.assertEqual(summary.mean.train, only.train)
        self.assertEqual(summary.low.val, only.val)

    def test_fixed_initialisation_has_zero_width_envelope(self):
        initial = init_params('fnde_mod', 3, seed=1, p_scale=GRID.p_max)
        summary = repeat_runs('fnde_mod', self.datasets, TrainConfig.for_epochs(3, batch=2, seeds=3),
                              initial=initial)
        self.assertEqual(summary.low.train, summary.high.train)

    def test_mean_lies_inside_envelope(self):
        summary = repeat_runs('fno', self.datasets, TrainConfig.for_epochs(3, batch=2, seeds=3))
        self.assertEqual(len(summary.histories), 3)
        for low, mean, high in zip(summary.low.train, summary.mean.train, summary.high.train):
            self.assertLessEqual(low, mean + 1e-15)
            self.assertLessEqual(mean, high + 1e-15)

    def test_empty_summary(self):
        mean, low, high = summarize_histories([])
        self.assertEqual(mean.train, [])
