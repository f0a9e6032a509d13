"""Command line front end.

Subcommands cover the full workflow: generate synthetic subjects, train a
matrix-speller victim, craft templates, score attacks and noise controls,
sweep the injection delay, and run cross-subject transfer. Every run
writes a provenance record next to its outputs (tool version, normalized
arguments, a hash over them, the seeds involved); outputs carry no
timestamps, so rerunning a command reproduces them byte for byte.

Exit codes: 0 on success, 1 on a domain error (bad data, no convergence),
2 on usage errors.
"""

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, attack_p300, attack_ssvep, dataio, evaluation, p300, ssvep, synth
from .errors import ParameterError, SpellersecError

_SEED_KEYS = ("seed",)


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_provenance(path: Path, subcommand: str, args: argparse.Namespace) -> None:
    norm = {
        k: _jsonable(v)
        for k, v in sorted(vars(args).items())
        if k not in ("func", "subcommand")
    }
    body = json.dumps(norm, sort_keys=True)
    record = {
        "schema_version": 1,
        "tool": "spellersec",
        "tool_version": __version__,
        "subcommand": subcommand,
        "args": norm,
        "config_hash": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        "seeds": {k: norm[k] for k in _SEED_KEYS if norm.get(k) is not None},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _config_dict(cfg) -> dict:
    out = {}
    for key, value in asdict(cfg).items():
        if isinstance(value, tuple):
            value = list(value)
        if value is None or isinstance(value, (bool, int, float, str, list)):
            out[key] = value
        else:
            out[key] = "custom"
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.paradigm == "p300":
        cfg = synth.SynthP300Config(seed=args.seed, repeats=args.repeats)
        train, test = synth.synth_p300_subject(cfg, args.train, args.test)
        ds = dataio.p300_dataset(train, test, f"synth-p300-{args.seed}",
                                 {"generator": "synth", "config": _config_dict(cfg)})
    else:
        cfg = synth.SynthSsvepConfig(seed=args.seed)
        trials = synth.synth_ssvep_subject(cfg, n_blocks=args.blocks)
        ds = dataio.ssvep_dataset(trials, ssvep.default_grid(), f"synth-ssvep-{args.seed}",
                                  {"generator": "synth", "config": _config_dict(cfg),
                                   "n_blocks": args.blocks})
    dataio.write_dataset(ds, out)
    _write_provenance(out / "provenance.json", "synth", args)
    print(f"wrote {len(ds.trials)} trials to {out}")
    return 0


def cmd_train(args) -> int:
    ds = dataio.read_dataset(args.dataset)
    trials = dataio.to_p300_trials(ds, split="train")
    if not trials:
        raise ParameterError(f"{args.dataset}: no trials in the train split")
    cfg = p300.P300TrainConfig(n_filters=args.n_filters, variant=args.variant, l2=args.l2)
    victim = p300.train_victim(trials, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.save_p300_victim(victim, out)
    _write_provenance(Path(str(out) + ".provenance.json"), "train", args)
    print(f"trained {args.variant} victim on {len(trials)} trials -> {out}")
    return 0


def _ssvep_victim(ds, args) -> ssvep.SsvepVictim:
    return ssvep.SsvepVictim(dataio.dataset_grid(ds), ds.fs, decoder=args.decoder)


def cmd_craft(args) -> int:
    ds = dataio.read_dataset(args.dataset)
    if args.paradigm == "p300":
        if args.model is None:
            raise ParameterError("crafting against the matrix speller needs --model")
        victim = dataio.load_p300_victim(args.model)
        trials = dataio.to_p300_trials(ds, split="train")
        epochs, labels = p300.collect_epochs(trials, victim.epoch_ms)
        nontarget = epochs[labels == 0] - epochs[labels == 0].mean(axis=-1, keepdims=True)
        template = attack_p300.craft_template(victim, nontarget, args.epsilon)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        dataio.save_p300_template(template, out)
        _write_provenance(Path(str(out) + ".provenance.json"), "craft", args)
        print(f"template from {nontarget.shape[0]} epochs -> {out} "
              f"(sign_flipped={template.sign_flipped})")
        return 0

    victim = _ssvep_victim(ds, args)
    trials = dataio.to_ssvep_trials(ds, blocks=set(args.blocks) if args.blocks else None)
    if not trials:
        raise ParameterError("no crafting trials after the block filter")
    windows = evaluation.crafting_windows(victim, trials)
    grid = victim.grid
    if args.targets == "all":
        indices = range(len(grid))
    else:
        indices = [grid.index_of(ch) for ch in args.targets]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for k in indices:
        template = attack_ssvep.craft_delta(
            windows, grid.frequencies[k], ds.fs, victim.n_harmonics,
            args.alpha, args.step, args.threshold)
        name = f"template_{k:02d}.bin"
        dataio.save_ssvep_template(template, out / name)
        index.append({"index": k, "character": grid.characters[k],
                      "frequency": grid.frequencies[k], "file": name,
                      "final_spr_db": template.final_spr_db,
                      "iterations": template.iterations})
        print(f"{grid.characters[k]!r} {grid.frequencies[k]:.1f} Hz: "
              f"{template.final_spr_db:.2f} dB in {template.iterations} iterations")
    (out / "index.json").write_text(
        json.dumps({"schema_version": 1, "grid": grid.to_dict(), "templates": index},
                   sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _write_provenance(out / "provenance.json", "craft", args)
    return 0


def _load_template_dir(path: Path) -> dict:
    index_path = path / "index.json"
    if not index_path.exists():
        raise ParameterError(f"{path}: no index.json; point --templates at a crafted set")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    return {int(e["index"]): dataio.load_ssvep_template(path / e["file"])
            for e in index["templates"]}


def _write_report(report, out: Path) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    Path(str(out) + ".csv").write_text(report.csv_text(), encoding="utf-8")
    Path(str(out) + ".json").write_text(report.json_text(), encoding="utf-8")


def cmd_attack(args) -> int:
    ds = dataio.read_dataset(args.dataset)
    out = Path(args.out)
    if args.paradigm == "p300":
        if args.model is None:
            raise ParameterError("scoring the matrix speller needs --model")
        victim = dataio.load_p300_victim(args.model)
        trials = dataio.to_p300_trials(ds, split=args.split)
        if not trials:
            raise ParameterError(f"no trials in split {args.split!r}")
        clean = evaluation.clean_score_p300(victim, trials, args.repeats)
        if args.noise is not None:
            reports = evaluation.p300_gaussian_baseline(
                victim, trials, args.epsilon, args.seed, args.runs,
                args.repeats, workers=args.workers)
            scores = [r.aggregate.user_score for r in reports]
            summary = {
                "schema_version": 1,
                "kind": "gaussian",
                "runs": args.runs,
                "per_run_user_scores": scores,
                "user_score": float(np.mean(scores)),
                "clean_score": clean.score,
                "clean_itr": clean.itr,
            }
            out.parent.mkdir(parents=True, exist_ok=True)
            Path(str(out) + ".json").write_text(
                json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
            print(f"clean {clean.score:.3f}, under noise {summary['user_score']:.3f}")
        else:
            if args.template is None:
                raise ParameterError("need --template (or --noise for the control)")
            template = dataio.load_p300_template(args.template)
            report = evaluation.score_p300_attack(victim, trials, template, None,
                                                  args.repeats, args.delay,
                                                  workers=args.workers)
            _write_report(report, out)
            agg = report.aggregate
            print(f"clean {clean.score:.3f}, attacker {agg.attacker_score:.3f}, "
                  f"user {agg.user_score:.3f}")
    else:
        victim = _ssvep_victim(ds, args)
        trials = dataio.to_ssvep_trials(ds, blocks=set(args.blocks) if args.blocks else None)
        if not trials:
            raise ParameterError("no trials after the block filter")
        clean = evaluation.clean_score_ssvep(victim, trials)
        if args.noise is not None:
            report = evaluation.ssvep_noise_baseline(victim, trials, args.noise,
                                                     args.spr, args.seed, args.runs)
            out.parent.mkdir(parents=True, exist_ok=True)
            Path(str(out) + ".json").write_text(report.json_text(), encoding="utf-8")
            print(f"clean {clean.score:.3f}, under {args.noise} noise {report.score:.3f} "
                  f"at {args.spr:.1f} dB")
        else:
            if args.templates is None:
                raise ParameterError("need --templates (or --noise for the control)")
            templates = _load_template_dir(Path(args.templates))
            report = evaluation.score_ssvep_attack(victim, trials, templates, None,
                                                   args.delay, args.workers)
            _write_report(report, out)
            agg = report.aggregate
            print(f"clean {clean.score:.3f}, attacker {agg.attacker_score:.3f}, "
                  f"user {agg.user_score:.3f}")
    _write_provenance(Path(str(out) + ".provenance.json"), "attack", args)
    return 0


def cmd_sweep_delay(args) -> int:
    ds = dataio.read_dataset(args.dataset)
    out = Path(args.out)
    if args.paradigm == "p300":
        if args.model is None or args.template is None:
            raise ParameterError("the matrix-speller sweep needs --model and --template")
        victim = dataio.load_p300_victim(args.model)
        trials = dataio.to_p300_trials(ds, split=args.split)
        template = dataio.load_p300_template(args.template)
        sweep = evaluation.delay_sweep_p300(victim, trials, template, args.delays,
                                            None, args.repeats, workers=args.workers)
    else:
        if args.templates is None:
            raise ParameterError("the frequency-speller sweep needs --templates")
        victim = _ssvep_victim(ds, args)
        trials = dataio.to_ssvep_trials(ds, blocks=set(args.blocks) if args.blocks else None)
        templates = _load_template_dir(Path(args.templates))
        sweep = evaluation.delay_sweep_ssvep(victim, trials, templates, args.delays,
                                             None, args.workers)
    out.parent.mkdir(parents=True, exist_ok=True)
    Path(str(out) + ".csv").write_text(sweep.csv_text(), encoding="utf-8")
    Path(str(out) + ".json").write_text(sweep.json_text(), encoding="utf-8")
    _write_provenance(Path(str(out) + ".provenance.json"), "sweep-delay", args)
    for pt in sweep.points:
        print(f"delay {pt.delay:+d}: attacker {pt.attacker_mean:.3f}, user {pt.user_mean:.3f}")
    return 0


def cmd_transfer(args) -> int:
    spec = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    paradigm = spec.get("paradigm")
    subjects = spec.get("subjects", [])
    if paradigm not in ("p300", "ssvep"):
        raise ParameterError(f"manifest paradigm must be p300 or ssvep, got {paradigm!r}")
    if len(subjects) < 2:
        raise ParameterError("transfer needs at least two subjects")
    ids = [s["id"] for s in subjects]
    victims = []
    templates = []
    test_sets = []
    if paradigm == "p300":
        for s in subjects:
            ds = dataio.read_dataset(s["dataset"])
            victims.append(dataio.load_p300_victim(s["model"]))
            templates.append(dataio.load_p300_template(s["template"]))
            test_sets.append(dataio.to_p300_trials(ds, split=spec.get("split", "test")))

        def score(victim, trials, template):
            return evaluation.score_p300_attack(victim, trials, template,
                                                workers=args.workers)
    else:
        blocks = set(spec["blocks"]) if "blocks" in spec else None
        decoder = spec.get("decoder", "cca")
        for s in subjects:
            ds = dataio.read_dataset(s["dataset"])
            victims.append(ssvep.SsvepVictim(dataio.dataset_grid(ds), ds.fs, decoder=decoder))
            templates.append(_load_template_dir(Path(s["templates"])))
            test_sets.append(dataio.to_ssvep_trials(ds, blocks=blocks))

        def score(victim, trials, tpls):
            return evaluation.score_ssvep_attack(victim, trials, tpls, workers=args.workers)

    matrix = evaluation.transfer_matrix(victims, templates, test_sets, score)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["source\\victim," + ",".join(ids)]
    for sid, row in zip(ids, matrix):
        lines.append(sid + "," + ",".join(repr(float(v)) for v in row))
    Path(str(out) + ".csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    Path(str(out) + ".json").write_text(json.dumps(
        {"schema_version": 1, "paradigm": paradigm, "subjects": ids,
         "matrix": [[float(v) for v in row] for row in matrix]},
        sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _write_provenance(Path(str(out) + ".provenance.json"), "transfer", args)
    print(f"{len(ids)}x{len(ids)} transfer matrix -> {out}.csv")
    return 0


def cmd_spectrum(args) -> int:
    ds = dataio.read_dataset(args.dataset)
    match = [t for t in ds.trials if t.trial_id == args.trial]
    if not match:
        raise ParameterError(f"no trial with id {args.trial}")
    from . import dsp

    freqs, amps = dsp.amplitude_spectrum(match[0].data.astype(np.float64), ds.fs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = "frequency_hz," + ",".join(ds.channel_names)
    lines = [header]
    for i, f in enumerate(freqs):
        lines.append(repr(float(f)) + "," + ",".join(repr(float(v)) for v in amps[:, i]))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_provenance(Path(str(out) + ".provenance.json"), "spectrum", args)
    print(f"{len(freqs)} bins x {len(ds.channel_names)} channels -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spellersec",
        description="Perturbation attacks and controls for EEG speller pipelines.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic subject dataset")
    sp.add_argument("--paradigm", choices=("p300", "ssvep"), required=True)
    sp.add_argument("--out", required=True, help="dataset directory to create")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--train", type=int, default=16, help="training characters (matrix speller)")
    sp.add_argument("--test", type=int, default=10, help="test characters (matrix speller)")
    sp.add_argument("--repeats", type=int, default=15, help="intensification rounds per character")
    sp.add_argument("--blocks", type=int, default=6, help="blocks (frequency speller)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="fit a matrix-speller victim")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--variant", choices=("riemann", "xdawn_lr"), default="riemann")
    sp.add_argument("--n-filters", type=int, default=4)
    sp.add_argument("--l2", type=float, default=1.0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("craft", help="craft perturbation templates")
    sp.add_argument("--paradigm", choices=("p300", "ssvep"), required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True,
                    help="template file (matrix) or directory (frequency)")
    sp.add_argument("--model", help="victim model (matrix speller)")
    sp.add_argument("--epsilon", type=float, default=0.5,
                    help="per-channel template norm (matrix speller)")
    sp.add_argument("--decoder", choices=("cca", "fbcca"), default="cca")
    sp.add_argument("--blocks", type=_int_list, default=None,
                    help="crafting blocks, comma separated (frequency speller)")
    sp.add_argument("--targets", default="all",
                    help="'all' or a string of grid characters to craft for")
    sp.add_argument("--alpha", type=float, default=0.05, help="energy penalty weight")
    sp.add_argument("--step", type=float, default=1e-3, help="descent step size")
    sp.add_argument("--threshold", type=float, default=25.0, help="stopping ratio in dB")
    sp.set_defaults(func=cmd_craft)

    sp = sub.add_parser("attack", help="score templates or a noise control")
    sp.add_argument("--paradigm", choices=("p300", "ssvep"), required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True, help="report path without extension")
    sp.add_argument("--model", help="victim model (matrix speller)")
    sp.add_argument("--template", help="template file (matrix speller)")
    sp.add_argument("--templates", help="template directory (frequency speller)")
    sp.add_argument("--split", default="test", help="matrix-speller split to score")
    sp.add_argument("--blocks", type=_int_list, default=None,
                    help="frequency-speller blocks to score")
    sp.add_argument("--repeats", type=int, default=None,
                    help="intensification rounds to use when decoding")
    sp.add_argument("--delay", type=int, default=0, help="injection delay in samples")
    sp.add_argument("--decoder", choices=("cca", "fbcca"), default="cca")
    sp.add_argument("--noise", choices=evaluation.NOISE_KINDS, default=None,
                    help="score a noise control instead of templates")
    sp.add_argument("--spr", type=float, default=25.0, help="noise energy ratio in dB")
    sp.add_argument("--epsilon", type=float, default=0.5,
                    help="noise template norm (matrix speller)")
    sp.add_argument("--runs", type=int, default=10, help="independent noise draws")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("sweep-delay", help="attack scores over injection delays")
    sp.add_argument("--paradigm", choices=("p300", "ssvep"), required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True, help="output path without extension")
    sp.add_argument("--delays", type=_int_list, required=True,
                    help="comma-separated delays in samples")
    sp.add_argument("--model")
    sp.add_argument("--template")
    sp.add_argument("--templates")
    sp.add_argument("--split", default="test")
    sp.add_argument("--blocks", type=_int_list, default=None)
    sp.add_argument("--repeats", type=int, default=None)
    sp.add_argument("--decoder", choices=("cca", "fbcca"), default="cca")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_sweep_delay)

    sp = sub.add_parser("transfer", help="cross-subject template transfer matrix")
    sp.add_argument("--manifest", required=True,
                    help="JSON listing subjects with datasets, models, templates")
    sp.add_argument("--out", required=True, help="output path without extension")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_transfer)

    sp = sub.add_parser("spectrum", help="export a trial's amplitude spectrum")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--trial", type=int, default=0)
    sp.add_argument("--out", required=True, help="CSV file to write")
    sp.set_defaults(func=cmd_spectrum)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpellersecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
