import numpy as np
import pytest

import spellersec as ss
from spellersec import attack_p300, dsp, p300
from spellersec.errors import ParameterError


@pytest.fixture(scope="module")
def crafted():
    cfg = ss.SynthP300Config(seed=5, n_channels=8, repeats=5, p300_amplitude=1.2)
    train, test = ss.synth_p300_subject(cfg, 10, 3)
    victim = p300.train_victim(train, p300.P300TrainConfig(n_filters=3))
    epochs, labels = p300.collect_epochs(train)
    nt = epochs[labels == 0]
    nt = nt - nt.mean(axis=-1, keepdims=True)
    template = attack_p300.craft_template(victim, nt, epsilon=0.5)
    return cfg, victim, test, template


class TestCraftTemplate:
    def test_shape_is_truncated(self, crafted):
        cfg, _, _, template = crafted
        # 350 ms at 240 Hz: 84 samples, shorter than the 600 ms epoch
        assert template.data.shape == (8, attack_p300.template_samples(cfg.fs))
        assert template.data.shape[1] == 84

    def test_per_channel_energy_budget(self, crafted):
        _, _, _, template = crafted
        norms = np.linalg.norm(template.data, axis=1)
        np.testing.assert_allclose(norms, 0.5, atol=1e-10)

    def test_band_limited(self, crafted):
        cfg, _, _, template = crafted
        freqs, amp = dsp.amplitude_spectrum(template.data, cfg.fs)
        stop = freqs > 25.0
        # the craft chain lowpasses at 15 Hz before truncation; truncating in
        # time smears the spectrum a little, hence the loose factor
        assert amp[:, stop].max() <= 0.1 * amp.max()

    def test_sign_decision_recorded(self, crafted):
        _, _, _, template = crafted
        assert template.sign_flipped in (True, False)

    def test_raises_on_empty_epochs(self, crafted):
        _, victim, _, _ = crafted
        with pytest.raises(ParameterError):
            attack_p300.craft_template(victim, np.empty((0, 8, 144)))

    def test_template_raises_target_probability(self, crafted):
        """The crafted direction must push non-target epochs toward the
        attended class; this is the sign check's defining property."""
        _, victim, test, template = crafted
        epochs, labels = p300.collect_epochs(test)
        nt = epochs[labels == 0][:40]
        pad = np.zeros((nt.shape[0], nt.shape[1], nt.shape[2]))
        pad[:, :, : template.data.shape[1]] = template.data[None]
        before = p300.epoch_probs(victim, nt).mean()
        after = p300.epoch_probs(victim, nt + pad).mean()
        assert after > before


class TestGaussianTemplate:
    def test_energy_matches_crafted(self, crafted):
        cfg, _, _, template = crafted
        g = attack_p300.gaussian_template(8, cfg.fs, 0.5, seed=0)
        np.testing.assert_allclose(np.linalg.norm(g.data, axis=1), 0.5, atol=1e-10)
        assert g.data.shape == template.data.shape

    def test_seeded_determinism(self):
        a = attack_p300.gaussian_template(4, 240.0, 0.3, seed=7)
        b = attack_p300.gaussian_template(4, 240.0, 0.3, seed=7)
        c = attack_p300.gaussian_template(4, 240.0, 0.3, seed=8)
        np.testing.assert_array_equal(a.data, b.data)
        assert np.any(a.data != c.data)


class TestInjection:
    def test_plan_targets_attacker_codes(self, crafted):
        _, _, test, _ = crafted
        trial = test[0]
        plan = attack_p300.plan_injection(trial, "K")
        row, col = p300.codes_for_char("K")
        assert (plan.row_code, plan.col_code) == (row, col)
        expected = trial.onsets[(trial.codes == row) | (trial.codes == col)]
        np.testing.assert_array_equal(plan.onsets, expected)
        # 2 of 12 codes per repeat block
        assert plan.onsets.size == 2 * trial.repeats

    def test_injection_is_additive(self, crafted):
        _, _, test, template = crafted
        trial = test[0]
        plan = attack_p300.plan_injection(trial, "A")
        dirty = attack_p300.inject(trial, plan, template)
        diff = dirty.sig.data - trial.sig.data
        # the difference must be exactly the planned template placements
        manual = np.zeros_like(trial.sig.data)
        for on in plan.onsets:
            manual[:, on : on + template.data.shape[1]] += template.data
        np.testing.assert_allclose(diff, manual, atol=1e-12)
        # schedule and labels carried over untouched
        np.testing.assert_array_equal(dirty.codes, trial.codes)

    def test_delay_shifts_placement(self, crafted):
        _, _, test, template = crafted
        trial = test[0]
        p0 = attack_p300.plan_injection(trial, "A", delay=0)
        p4 = attack_p300.plan_injection(trial, "A", delay=4)
        np.testing.assert_array_equal(p4.onsets, p0.onsets + 4)
        d0 = attack_p300.inject(trial, p0, template)
        d4 = attack_p300.inject(trial, p4, template)
        i = int(p0.onsets[0])
        np.testing.assert_allclose(d4.sig.data[:, i + 4 : i + 4 + 84] - trial.sig.data[:, i + 4 : i + 4 + 84],
                                   d0.sig.data[:, i : i + 84] - trial.sig.data[:, i : i + 84],
                                   atol=1e-12)

    def test_unknown_attacker_char(self, crafted):
        _, _, test, _ = crafted
        with pytest.raises(ParameterError):
            attack_p300.plan_injection(test[0], "??")


def test_overlapping_placements_sum():
    """Consecutive targeted intensifications are closer than the template is
    long (175 ms SOA vs 350 ms template), so overlaps must add."""
    cfg = ss.SynthP300Config(seed=9, n_channels=4, repeats=2)
    train, _ = ss.synth_p300_subject(cfg, 1, 0)
    trial = train[0]
    template = attack_p300.gaussian_template(4, cfg.fs, 0.5, seed=1)
    plan = attack_p300.plan_injection(trial, trial.user_char)
    dirty = attack_p300.inject(trial, plan, template)
    diff = dirty.sig.data - trial.sig.data
    soa = int(round(0.175 * cfg.fs))
    idx = sorted(int(v) for v in plan.onsets)
    consecutive = [a for a, b in zip(idx, idx[1:]) if b - a == soa]
    assert consecutive, "schedule never fired targeted codes back to back"
    on = consecutive[0]
    # inside the overlap the diff equals template head plus template tail
    head = template.data[:, soa : soa + 10]
    tail = template.data[:, :10]
    np.testing.assert_allclose(diff[:, on + soa : on + soa + 10], head + tail, atol=1e-12)
