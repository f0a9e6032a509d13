"""Scoring protocol: transfer rates, energy ratios, attack reports, sweeps.

Reports carry one row per attacker character (score from the user's and the
attacker's point of view, transfer rates, energy ratios) plus a columnwise
mean row, and serialize to stable CSV and JSON with no volatile fields, so
reruns under fixed seeds are byte-identical.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import attack_p300, attack_ssvep, dsp, p300, ssvep
from ._backend import worker_count
from .errors import DegenerateInputError, ParameterError


def itr(r: float, q: int, t_minutes: float) -> float:
    """Information transfer rate in bits per minute.

    (log2 Q + R log2 R + (1-R) log2((1-R)/(Q-1))) / T; chance-level or worse
    accuracy maps to zero, perfect accuracy to log2(Q)/T.
    """
    if q < 2:
        raise ParameterError(f"alphabet size must be >= 2, got {q}")
    if not (0.0 <= r <= 1.0):
        raise ParameterError(f"accuracy must lie in [0, 1], got {r}")
    if t_minutes <= 0:
        raise ParameterError(f"selection time must be positive, got {t_minutes}")
    if r <= 1.0 / q:
        return 0.0
    bits = np.log2(q)
    if r < 1.0:
        bits += r * np.log2(r) + (1.0 - r) * np.log2((1.0 - r) / (q - 1))
    return float(bits / t_minutes)


def spr_db(reference: np.ndarray, perturbation: np.ndarray) -> float:
    """Signal-to-perturbation ratio 10 log10(E_ref / E_pert) in dB."""
    e_ref = float(np.sum(np.asarray(reference, dtype=np.float64) ** 2))
    e_pert = float(np.sum(np.asarray(perturbation, dtype=np.float64) ** 2))
    if e_pert == 0.0:
        raise DegenerateInputError("perturbation carries no energy")
    if e_ref == 0.0:
        raise DegenerateInputError("reference carries no energy")
    return float(10.0 * np.log10(e_ref / e_pert))


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass(frozen=True)
class AttackerRow:
    """Per-attacker-character outcome over a test set."""

    character: str
    attacker_score: float
    user_score: float
    attacker_itr: float
    user_itr: float
    period_spr_db: float
    trial_spr_db: float

    def as_dict(self) -> dict:
        return {
            "character": self.character,
            "attacker_score": self.attacker_score,
            "user_score": self.user_score,
            "attacker_itr": self.attacker_itr,
            "user_itr": self.user_itr,
            "period_spr_db": self.period_spr_db,
            "trial_spr_db": self.trial_spr_db,
        }


_CSV_COLUMNS = ("character", "attacker_score", "user_score", "attacker_itr",
                "user_itr", "period_spr_db", "trial_spr_db")


@dataclass(frozen=True)
class AttackReport:
    """All attacker characters against one victim and test set."""

    rows: tuple
    q: int
    t_minutes: float
    meta: dict = field(default_factory=dict)

    @property
    def aggregate(self) -> AttackerRow:
        """Columnwise mean row, labeled MEAN."""
        return AttackerRow(
            "MEAN",
            float(np.mean([r.attacker_score for r in self.rows])),
            float(np.mean([r.user_score for r in self.rows])),
            float(np.mean([r.attacker_itr for r in self.rows])),
            float(np.mean([r.user_itr for r in self.rows])),
            float(np.mean([r.period_spr_db for r in self.rows])),
            float(np.mean([r.trial_spr_db for r in self.rows])),
        )

    def csv_text(self) -> str:
        lines = [",".join(_CSV_COLUMNS)]
        for row in list(self.rows) + [self.aggregate]:
            d = row.as_dict()
            lines.append(",".join(_fmt(d[c]) for c in _CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def json_text(self) -> str:
        obj = {
            "schema_version": 1,
            "q": self.q,
            "t_minutes": self.t_minutes,
            "meta": self.meta,
            "rows": [r.as_dict() for r in self.rows],
            "aggregate": self.aggregate.as_dict(),
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class CleanReport:
    """Unattacked decoding outcome."""

    score: float
    itr: float
    q: int
    t_minutes: float
    n_trials: int
    meta: dict = field(default_factory=dict)

    def json_text(self) -> str:
        obj = {
            "schema_version": 1,
            "score": self.score,
            "itr": self.itr,
            "q": self.q,
            "t_minutes": self.t_minutes,
            "n_trials": self.n_trials,
            "meta": self.meta,
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _diff_sprs(clean_data: np.ndarray, adv_data: np.ndarray):
    diff = adv_data - clean_data
    mask = np.any(diff != 0.0, axis=0)
    if not mask.any():
        raise DegenerateInputError("no perturbed samples in the trial")
    period = spr_db(clean_data[:, mask], diff[:, mask])
    trial = spr_db(clean_data, diff)
    return period, trial


# ---------------------------------------------------------------------------
# matrix speller


def _p300_selection_minutes(repeats_used: int, soa_s: float) -> float:
    return repeats_used * p300.N_CODES * soa_s / 60.0


def clean_score_p300(victim: p300.P300Victim, trials, repeats_used: int | None = None,
                     soa_s: float = 0.175) -> CleanReport:
    """Character accuracy and transfer rate without any perturbation."""
    trials = list(trials)
    if repeats_used is None:
        repeats_used = trials[0].repeats
    hits = 0
    for trial in trials:
        if trial.user_char is None:
            raise ParameterError("scoring needs the attended character of every trial")
        dec = p300.decode_character(victim, trial, repeats_used)
        hits += dec.character == trial.user_char
    q = len(p300.grid_characters(trials[0].grid))
    t_min = _p300_selection_minutes(repeats_used, soa_s)
    score = hits / len(trials)
    return CleanReport(score, itr(score, q, t_min), q, t_min, len(trials),
                       {"repeats_used": repeats_used})


def _score_p300_chars(victim, trials, template, chars, repeats_used, delay, soa_s):
    q = len(p300.grid_characters(trials[0].grid))
    t_min = _p300_selection_minutes(repeats_used, soa_s)
    rows = []
    for char in chars:
        a_hits = 0
        u_hits = 0
        period_sprs = []
        trial_sprs = []
        for trial in trials:
            plan = attack_p300.plan_injection(trial, char, delay)
            adv = attack_p300.inject(trial, plan, template)
            dec = p300.decode_character(victim, adv, repeats_used)
            a_hits += dec.character == char
            u_hits += dec.character == trial.user_char
            ps, ts = _diff_sprs(trial.sig.data, adv.sig.data)
            period_sprs.append(ps)
            trial_sprs.append(ts)
        a_score = a_hits / len(trials)
        u_score = u_hits / len(trials)
        rows.append(AttackerRow(char, a_score, u_score, itr(a_score, q, t_min),
                                itr(u_score, q, t_min), float(np.mean(period_sprs)),
                                float(np.mean(trial_sprs))))
    return rows


def score_p300_attack(victim: p300.P300Victim, trials, template: attack_p300.P300Template,
                      attacker_chars=None, repeats_used: int | None = None,
                      delay: int = 0, soa_s: float = 0.175,
                      workers: int | None = None) -> AttackReport:
    """Score one template against a test set for every attacker character.

    For each attacker character the template is injected at that character's
    row and column intensifications of every trial, the trial re-decoded,
    and hit rates collected from both sides along with the energy ratios of
    the injected perturbation.
    """
    trials = list(trials)
    if not trials:
        raise ParameterError("no test trials")
    if repeats_used is None:
        repeats_used = trials[0].repeats
    if attacker_chars is None:
        attacker_chars = p300.grid_characters(trials[0].grid)
    n_workers = worker_count(workers)
    if n_workers > 1 and len(attacker_chars) > 1:
        chunks = [list(c) for c in np.array_split(np.asarray(attacker_chars, dtype=object), n_workers) if len(c)]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(
                _p300_worker,
                [(victim, trials, template, chunk, repeats_used, delay, soa_s) for chunk in chunks],
            ))
        rows = [row for part in parts for row in part]
    else:
        rows = _score_p300_chars(victim, trials, template, attacker_chars,
                                 repeats_used, delay, soa_s)
    q = len(p300.grid_characters(trials[0].grid))
    meta = {"delay": int(delay), "repeats_used": int(repeats_used), "n_trials": len(trials)}
    return AttackReport(tuple(rows), q, _p300_selection_minutes(repeats_used, soa_s), meta)


def _p300_worker(args):
    return _score_p300_chars(*args)


def p300_gaussian_baseline(victim: p300.P300Victim, trials, epsilon: float, seed: int,
                           runs: int = 10, repeats_used: int | None = None,
                           soa_s: float = 0.175, workers: int | None = None):
    """Energy-matched white-noise control, averaged over independent draws.

    Returns the list of per-run reports; the headline number is the mean
    user score across runs.
    """
    trials = list(trials)
    n_channels = trials[0].sig.n_channels
    reports = []
    for k in range(runs):
        template = attack_p300.gaussian_template(n_channels, trials[0].sig.fs, epsilon, seed + k)
        reports.append(score_p300_attack(victim, trials, template, None, repeats_used,
                                         0, soa_s, workers))
    return reports


# ---------------------------------------------------------------------------
# frequency-coded speller


def clean_score_ssvep(victim: ssvep.SsvepVictim, trials) -> CleanReport:
    trials = list(trials)
    hits = 0
    for trial in trials:
        hits += ssvep.decode_trial(victim, trial).index == trial.freq_index
    q = len(victim.grid)
    t_min = victim.selection_time_s / 60.0
    score = hits / len(trials)
    return CleanReport(score, itr(score, q, t_min), q, t_min, len(trials), {})


def _ssvep_filtered_windows(victim, trials):
    """Filtered clean analysis windows, one per trial."""
    coeffs = victim.coefficients()
    out = []
    for trial in trials:
        filtered = dsp.apply_filter(trial.sig, coeffs)
        start = trial.onset_sample + victim.window_start
        out.append(dsp.extract_epoch(filtered, start, victim.window_len))
    return out


def crafting_windows(victim: ssvep.SsvepVictim, trials) -> np.ndarray:
    """Stack victim-preprocessed windows of a crafting block."""
    return np.asarray(_ssvep_filtered_windows(victim, list(trials)))


def _score_ssvep_templates(victim, trials, templates, indices, delay):
    q = len(victim.grid)
    t_min = victim.selection_time_s / 60.0
    coeffs = victim.coefficients()
    clean_windows = _ssvep_filtered_windows(victim, trials)
    delta_cache: dict = {}
    rows = []
    for ai in indices:
        template = templates[ai]
        delta = template.delta
        a_hits = 0
        u_hits = 0
        period_sprs = []
        trial_sprs = []
        for trial, clean_win in zip(trials, clean_windows):
            key = (trial.onset_sample, trial.sig.n_samples)
            if key not in delta_cache:
                padded = np.zeros((delta.shape[0], trial.sig.n_samples))
                lo = trial.onset_sample + victim.window_start + delay
                t0 = 0
                if lo < 0:
                    t0 = -lo
                    lo = 0
                hi = min(lo + (delta.shape[1] - t0), trial.sig.n_samples)
                if hi > lo:
                    padded[:, lo:hi] = delta[:, t0 : t0 + (hi - lo)]
                filt = dsp.apply_filter(dsp.Signal(padded, victim.fs), coeffs)
                start = trial.onset_sample + victim.window_start
                delta_cache[key] = (
                    dsp.extract_epoch(filt, start, victim.window_len),
                    padded,
                    (lo, hi),
                )
            delta_win, padded, span = delta_cache[key]
            dec = ssvep.decode_window(victim, clean_win + delta_win)
            a_hits += dec.index == ai
            u_hits += dec.index == trial.freq_index
            lo, hi = span
            period_sprs.append(spr_db(trial.sig.data[:, lo:hi], padded[:, lo:hi]))
            trial_sprs.append(spr_db(trial.sig.data, padded[:, lo:hi]))
        # the injected perturbation is identical across templates only in
        # position, not content, so the cache is cleared per attacker
        delta_cache.clear()
        a_score = a_hits / len(trials)
        u_score = u_hits / len(trials)
        rows.append(AttackerRow(victim.grid.characters[ai], a_score, u_score,
                                itr(a_score, q, t_min), itr(u_score, q, t_min),
                                float(np.mean(period_sprs)), float(np.mean(trial_sprs))))
    return rows


def score_ssvep_attack(victim: ssvep.SsvepVictim, trials, templates,
                       attacker_indices=None, delay: int = 0,
                       workers: int | None = None) -> AttackReport:
    """Score per-frequency templates against a test set.

    ``templates`` maps grid index to template (dict, or sequence aligned
    with the grid). Injection is aligned to the analysis window start plus
    ``delay``; decoding works on the filtered sum, which equals filtering
    the perturbed recording because the victim filter is linear.
    """
    trials = list(trials)
    if not trials:
        raise ParameterError("no test trials")
    if isinstance(templates, (list, tuple)):
        templates = dict(enumerate(templates))
    if attacker_indices is None:
        attacker_indices = sorted(templates.keys())
    for ai in attacker_indices:
        if ai not in templates:
            raise ParameterError(f"no template for grid index {ai}")
        expect = victim.grid.frequencies[ai]
        if abs(templates[ai].frequency - expect) > 1e-9:
            raise ParameterError(
                f"template at index {ai} tuned to {templates[ai].frequency} Hz, "
                f"grid says {expect} Hz"
            )
    n_workers = worker_count(workers)
    if n_workers > 1 and len(attacker_indices) > 1:
        chunks = [list(map(int, c)) for c in np.array_split(np.asarray(attacker_indices), n_workers) if len(c)]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(
                _ssvep_worker,
                [(victim, trials, templates, chunk, delay) for chunk in chunks],
            ))
        rows = [row for part in parts for row in part]
    else:
        rows = _score_ssvep_templates(victim, trials, templates, attacker_indices, delay)
    meta = {"delay": int(delay), "n_trials": len(trials)}
    return AttackReport(tuple(rows), len(victim.grid), victim.selection_time_s / 60.0, meta)


def _ssvep_worker(args):
    return _score_ssvep_templates(*args)


NOISE_KINDS = ("gaussian", "single", "compound")


@dataclass(frozen=True)
class NoiseReport:
    """Noise-baseline outcome at a fixed energy ratio."""

    kind: str
    spr_db: float
    runs: int
    per_run_scores: tuple
    score: float
    itr: float
    q: int
    t_minutes: float
    period_spr_db: float
    trial_spr_db: float
    meta: dict = field(default_factory=dict)

    def json_text(self) -> str:
        obj = {
            "schema_version": 1,
            "kind": self.kind,
            "spr_db": self.spr_db,
            "runs": self.runs,
            "per_run_scores": list(self.per_run_scores),
            "score": self.score,
            "itr": self.itr,
            "q": self.q,
            "t_minutes": self.t_minutes,
            "period_spr_db": self.period_spr_db,
            "trial_spr_db": self.trial_spr_db,
            "meta": self.meta,
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def ssvep_noise_baseline(victim: ssvep.SsvepVictim, trials, kind: str,
                         spr_target_db: float = 25.0, seed: int = 0,
                         runs: int = 10) -> NoiseReport:
    """User score under window-aligned noise at a fixed energy ratio.

    Fresh noise per trial and run, seeded reproducibly. The scaling anchor
    is the mean raw analysis-window energy over the scored trials.
    """
    if kind not in NOISE_KINDS:
        raise ParameterError(f"noise kind must be one of {NOISE_KINDS}, got {kind!r}")
    trials = list(trials)
    n_ch = trials[0].sig.n_channels
    n_win = victim.window_len
    ref_energy = float(np.mean([
        np.sum(dsp.extract_epoch(t.sig, t.onset_sample + victim.window_start, n_win) ** 2)
        for t in trials
    ]))
    per_run = []
    period_sprs = []
    trial_sprs = []
    for run in range(runs):
        hits = 0
        for ti, trial in enumerate(trials):
            child = int(np.random.SeedSequence((seed, run, ti)).generate_state(1)[0])
            if kind == "gaussian":
                noise = attack_ssvep.gaussian_noise(n_ch, n_win, spr_target_db, ref_energy, child)
            elif kind == "single":
                noise = attack_ssvep.single_periodic_noise(victim.grid, n_ch, n_win, victim.fs,
                                                           spr_target_db, ref_energy, child)
            else:
                noise = attack_ssvep.compound_periodic_noise(victim.grid, n_ch, n_win, victim.fs,
                                                             spr_target_db, ref_energy, child)
            adv = attack_ssvep.inject_window(trial, victim, noise)
            hits += ssvep.decode_trial(victim, adv).index == trial.freq_index
            ps, ts = _diff_sprs(trial.sig.data, adv.sig.data)
            period_sprs.append(ps)
            trial_sprs.append(ts)
        per_run.append(hits / len(trials))
    q = len(victim.grid)
    t_min = victim.selection_time_s / 60.0
    score = float(np.mean(per_run))
    return NoiseReport(kind, float(spr_target_db), runs, tuple(per_run), score,
                       itr(score, q, t_min), q, t_min, float(np.mean(period_sprs)),
                       float(np.mean(trial_sprs)), {"seed": int(seed)})


# ---------------------------------------------------------------------------
# sweeps and transfer


@dataclass(frozen=True)
class DelayPoint:
    delay: int
    attacker_mean: float
    attacker_std: float
    user_mean: float
    user_std: float


@dataclass(frozen=True)
class DelaySweep:
    points: tuple

    def csv_text(self) -> str:
        lines = ["delay,attacker_mean,attacker_std,user_mean,user_std"]
        for pt in self.points:
            lines.append(",".join(_fmt(v) for v in (
                pt.delay, pt.attacker_mean, pt.attacker_std, pt.user_mean, pt.user_std)))
        return "\n".join(lines) + "\n"

    def json_text(self) -> str:
        obj = {
            "schema_version": 1,
            "points": [
                {"delay": pt.delay, "attacker_mean": pt.attacker_mean,
                 "attacker_std": pt.attacker_std, "user_mean": pt.user_mean,
                 "user_std": pt.user_std}
                for pt in self.points
            ],
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _sweep_point(report: AttackReport, delay: int) -> DelayPoint:
    a = np.asarray([r.attacker_score for r in report.rows])
    u = np.asarray([r.user_score for r in report.rows])
    return DelayPoint(int(delay), float(a.mean()), float(a.std()),
                      float(u.mean()), float(u.std()))


def delay_sweep_p300(victim, trials, template, delays, attacker_chars=None,
                     repeats_used=None, soa_s: float = 0.175,
                     workers: int | None = None) -> DelaySweep:
    """Attack scores as the injection slips by whole samples."""
    points = []
    for delay in delays:
        rep = score_p300_attack(victim, trials, template, attacker_chars,
                                repeats_used, int(delay), soa_s, workers)
        points.append(_sweep_point(rep, int(delay)))
    return DelaySweep(tuple(points))


def delay_sweep_ssvep(victim, trials, templates, delays, attacker_indices=None,
                      workers: int | None = None) -> DelaySweep:
    points = []
    for delay in delays:
        rep = score_ssvep_attack(victim, trials, templates, attacker_indices,
                                 int(delay), workers)
        points.append(_sweep_point(rep, int(delay)))
    return DelaySweep(tuple(points))


def transfer_matrix(victims, templates_per_subject, test_sets, score_fn) -> np.ndarray:
    """Cross-subject attacker-score matrix.

    Entry (i, j) is the aggregate attacker score when subject i's templates
    run against subject j's victim and test set; the diagonal is the
    self-attack. ``score_fn(victim, trials, templates)`` must return an
    AttackReport.
    """
    n = len(victims)
    if not (len(templates_per_subject) == len(test_sets) == n):
        raise ParameterError("victims, templates and test sets must align")
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = score_fn(victims[j], test_sets[j], templates_per_subject[i]).aggregate.attacker_score
    return out
